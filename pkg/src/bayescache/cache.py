"""Dynamic prototype cache: entry storage, matching, creation, updates.

Updates are functional: every mutation returns a new CacheState whose
untouched entries are shared with the old one, so snapshots taken by
callers stay valid.  The pipeline is the single writer; reads are safe
from anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import EmptyCache, IndexOutOfRange
from .records import AdaptConfig, PredictionTriple, ProposalRecord, l2_normalize


@dataclass(frozen=True, eq=False)
class CacheEntry:
    """One cached pattern: prototype direction, mean scale, prior, count.

    ``count`` is the number of proposals absorbed into the entry, starting
    at 1 on creation.
    """

    prototype: np.ndarray
    prior: np.ndarray
    count: int
    scale: Optional[np.ndarray] = None


class CacheState:
    """Ordered, append-only collection of cache entries.

    The entry tuple never shrinks and existing indices are stable, so a
    matching distribution computed against an older state still addresses
    the right entries.  Matrix views are built lazily once per state.
    """

    __slots__ = ("entries", "created_total", "updated_total",
                 "_prototypes", "_scales", "_priors")

    def __init__(self, entries: tuple[CacheEntry, ...] = (),
                 created_total: int = 0, updated_total: int = 0):
        self.entries = entries
        self.created_total = created_total
        self.updated_total = updated_total
        self._prototypes: Optional[np.ndarray] = None
        self._scales: Optional[np.ndarray] = None
        self._priors: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.entries)

    def prototype_matrix(self) -> np.ndarray:
        if self._prototypes is None:
            self._prototypes = np.stack([e.prototype for e in self.entries])
        return self._prototypes

    def scale_matrix(self) -> Optional[np.ndarray]:
        if self._scales is None:
            if any(e.scale is None for e in self.entries):
                return None
            self._scales = np.stack([e.scale for e in self.entries])
        return self._scales

    def prior_matrix(self) -> np.ndarray:
        if self._priors is None:
            self._priors = np.stack([e.prior for e in self.entries])
        return self._priors


def confidence_filter(final_pred: np.ndarray, tau1: float) -> bool:
    """True when the prediction is confident enough to touch the cache."""
    return float(np.max(final_pred)) >= tau1


def best_match(match_dist: np.ndarray) -> tuple[int, float]:
    """Index and mass of the best-matching entry (lowest index on ties)."""
    m = np.asarray(match_dist, dtype=np.float64)
    if m.shape[0] == 0:
        raise EmptyCache("best_match on empty matching distribution")
    idx = int(np.argmax(m))
    return idx, float(m[idx])


def create_entry(cache: CacheState, proposal: ProposalRecord,
                 final_pred: np.ndarray) -> CacheState:
    """Append a new entry seeded by the proposal, with count 1."""
    entry = CacheEntry(
        prototype=l2_normalize(proposal.feature),
        prior=np.array(final_pred, dtype=np.float64),
        count=1,
        scale=proposal.box.scale_wh() if proposal.box is not None else None,
    )
    return CacheState(cache.entries + (entry,),
                      cache.created_total + 1, cache.updated_total)


def _count_update(entry: CacheEntry, feature, scale_wh, final_pred,
                  update_prior: bool) -> CacheEntry:
    c = entry.count
    prototype = l2_normalize((c * entry.prototype + feature) / (c + 1))
    scale = None if entry.scale is None else (c * entry.scale + scale_wh) / (c + 1)
    prior = entry.prior if not update_prior else (c * entry.prior + final_pred) / (c + 1)
    return replace(entry, prototype=prototype, scale=scale, prior=prior, count=c + 1)


def _momentum_update(entry: CacheEntry, feature, scale_wh, final_pred,
                     alpha: float, update_prior: bool) -> CacheEntry:
    prototype = l2_normalize(alpha * entry.prototype + (1 - alpha) * feature)
    scale = None if entry.scale is None else alpha * entry.scale + (1 - alpha) * scale_wh
    prior = entry.prior
    if update_prior:
        prior = alpha * entry.prior + (1 - alpha) * final_pred
        total = prior.sum()
        if abs(total - 1.0) > 1e-12:
            prior = prior / total
    return replace(entry, prototype=prototype, scale=scale, prior=prior,
                   count=entry.count + 1)


def _delayed_update(entry: CacheEntry, feature, scale_wh, final_pred,
                    k: int, update_prior: bool) -> CacheEntry:
    # The counter advances on every match, but the stored vectors refresh
    # only when it reaches a multiple of k, using that match's proposal;
    # the skipped matches contribute nothing.
    c = entry.count + 1
    if c % k != 0:
        return replace(entry, count=c)
    prototype = l2_normalize(((c - 1) * entry.prototype + feature) / c)
    scale = None if entry.scale is None else ((c - 1) * entry.scale + scale_wh) / c
    prior = entry.prior if not update_prior else ((c - 1) * entry.prior + final_pred) / c
    return replace(entry, prototype=prototype, scale=scale, prior=prior, count=c)


def update_entry(cache: CacheState, m: int, proposal: ProposalRecord,
                 final_pred: np.ndarray, cfg: AdaptConfig,
                 update_prior: Optional[bool] = None) -> CacheState:
    """Fold one proposal into entry ``m`` using the configured strategy."""
    if not (0 <= m < len(cache)):
        raise IndexOutOfRange(f"entry index {m} outside [0, {len(cache)})")
    if update_prior is None:
        update_prior = cfg.prior_adapt
    entry = cache.entries[m]
    feature = np.asarray(proposal.feature, dtype=np.float64)
    final_pred = np.asarray(final_pred, dtype=np.float64)
    scale_wh = proposal.box.scale_wh() if proposal.box is not None else None
    if cfg.update_strategy == "count":
        new = _count_update(entry, feature, scale_wh, final_pred, update_prior)
    elif cfg.update_strategy == "momentum":
        new = _momentum_update(entry, feature, scale_wh, final_pred,
                               cfg.momentum_alpha, update_prior)
    else:
        new = _delayed_update(entry, feature, scale_wh, final_pred,
                              cfg.delayed_k, update_prior)
    entries = cache.entries[:m] + (new,) + cache.entries[m + 1:]
    return CacheState(entries, cache.created_total, cache.updated_total + 1)


def adapt(cache: CacheState, proposal: ProposalRecord,
          triple: PredictionTriple, cfg: AdaptConfig) -> CacheState:
    """Confidence-gated cache update for one scored proposal.

    The matching decision uses the similarity pre-computed at prediction
    time (carried in the triple); a proposal scored against an empty cache
    therefore always takes the creation path, even if an earlier proposal
    of the same image has created entries since.
    """
    if not confidence_filter(triple.final_pred, cfg.tau1):
        return cache
    prior_seed = triple.final_pred
    if not cfg.prior_adapt:
        # Likelihood-only control: the entry's class belief is frozen at
        # what the unadapted model said when the entry was born, keeping
        # the prior side independent of cache feedback.  (A one-hot pin
        # would carry zero entropy and hijack the uncertainty-weighted
        # fusion, relabeling every later entry after the first one.)
        prior_seed = triple.init_pred
    no_match = (len(cache) == 0 or triple.match_similarity is None
                or triple.match_similarity < cfg.tau2)
    if no_match:
        return create_entry(cache, proposal, prior_seed)
    return update_entry(cache, triple.matched_index, proposal,
                        triple.final_pred, cfg)

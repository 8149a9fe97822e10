"""Matrix-form core: similarities, matching distribution, posterior, fusion.

All operations are pure functions of immutable inputs.  The scalar
reference implementation living in ``oracle.py`` recomputes the same
posterior without any of these helpers; keep the two independent.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .cache import CacheState
from .errors import DimensionMismatch, EmptyCache, KMismatch, MissingScale
from .records import AdaptConfig, Box, ProposalRecord

SQRT2 = float(np.sqrt(2.0))


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax; invariant to adding a constant."""
    z = np.asarray(scores, dtype=np.float64)
    e = np.exp(z - np.max(z))
    return e / e.sum()


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, stable on both tails."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy in nats with the continuous extension 0*log(0) = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def cosine_to_rows(vector: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Cosine similarity between ``vector`` and each row of ``rows``."""
    v = np.asarray(vector, dtype=np.float64)
    m = np.asarray(rows, dtype=np.float64)
    if v.shape[0] != m.shape[1]:
        raise DimensionMismatch(
            f"vector dimension {v.shape[0]} vs rows dimension {m.shape[1]}"
        )
    vnorm = np.linalg.norm(v)
    rnorms = np.linalg.norm(m, axis=1)
    return (m @ v) / (rnorms * vnorm)


def feature_similarity(feature: np.ndarray, cache: CacheState) -> np.ndarray:
    """Cosine similarity of a feature against every cached prototype."""
    if len(cache) == 0:
        raise EmptyCache("feature_similarity on empty cache")
    return cosine_to_rows(feature, cache.prototype_matrix())


def scale_similarity(box: Box, cache: CacheState) -> np.ndarray:
    """1 - ||(w,h) - cached scale|| / sqrt(2), elementwise in [0, 1]."""
    if len(cache) == 0:
        raise EmptyCache("scale_similarity on empty cache")
    scales = cache.scale_matrix()
    if scales is None:
        raise MissingScale("cache entries carry no spatial scales")
    diff = scales - box.scale_wh()
    return 1.0 - np.linalg.norm(diff, axis=1) / SQRT2


def combined_similarity(proposal: ProposalRecord, cache: CacheState,
                        cfg: AdaptConfig) -> np.ndarray:
    """Pre-softmax matching scores; feature-only unless in detection mode."""
    sf = feature_similarity(proposal.feature, cache)
    if not cfg.detection:
        return sf
    if proposal.box is None:
        raise MissingScale("detection proposal lacks a box")
    sb = scale_similarity(proposal.box, cache)
    return cfg.ws * sb + (1.0 - cfg.ws) * sf


def match_distribution(proposal: ProposalRecord, cache: CacheState,
                       cfg: AdaptConfig) -> np.ndarray:
    """Softmax over combined similarities: the entry-matching distribution."""
    return softmax(combined_similarity(proposal, cache, cfg))


def cache_posterior(match_dist: np.ndarray, cache: CacheState) -> np.ndarray:
    """Mixture of cached priors weighted by the matching distribution."""
    if len(cache) == 0:
        raise EmptyCache("cache_posterior on empty cache")
    return np.asarray(match_dist, dtype=np.float64) @ cache.prior_matrix()


def fuse(init_pred: np.ndarray, cache_pred: np.ndarray,
         strategy: str = "entropy") -> np.ndarray:
    """Combine the model's own prediction with the cache-based one.

    entropy      exp(-H)-weighted convex combination (confidence-weighted)
    average      plain arithmetic mean
    init_only    pass the model prediction through
    cache_only   pass the cache prediction through
    """
    p = np.asarray(init_pred, dtype=np.float64)
    q = np.asarray(cache_pred, dtype=np.float64)
    if p.shape != q.shape:
        raise KMismatch(f"cannot fuse K={p.shape} with K={q.shape}")
    if strategy == "entropy":
        wp = np.exp(-shannon_entropy(p))
        wq = np.exp(-shannon_entropy(q))
        return (wp * p + wq * q) / (wp + wq)
    if strategy == "average":
        return (p + q) / 2.0
    if strategy == "init_only":
        return p
    if strategy == "cache_only":
        return q
    raise ValueError(f"unknown fusion strategy {strategy!r}")

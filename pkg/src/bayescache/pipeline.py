"""Online orchestration over an ordered image stream.

Within one image, every proposal is scored against the cache state the
image arrived at (pure reads), and only then does the adaptation loop run
proposal-by-proposal, so intra-image updates cascade during adaptation but
never leak into prediction.  Images are strictly sequential.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from .cache import CacheState, adapt, confidence_filter
from .engine import cache_posterior, combined_similarity, fuse, softmax
from .records import (
    AdaptConfig,
    Box,
    ImageRecord,
    PredictionTriple,
)


@dataclass(frozen=True)
class ProposalOutcome:
    """A prediction triple together with the evaluation-only annotations."""

    triple: PredictionTriple
    gt_label: Optional[int] = None
    box: Optional[Box] = None
    gt_box: Optional[Box] = None


@dataclass(frozen=True)
class ImageResult:
    image_id: str
    outcomes: tuple[ProposalOutcome, ...]


@dataclass
class SessionResult:
    """Everything a session produced: per-proposal triples in stream order,
    the final cache, and the per-image cache-size trace."""

    config: AdaptConfig
    images: list[ImageResult]
    cache: Optional[CacheState]
    cache_trace: list[int]
    elapsed_seconds: float = field(default=0.0, compare=False)

    @property
    def n_images(self) -> int:
        return len(self.images)


def process_image(rec: ImageRecord, cache: CacheState,
                  cfg: AdaptConfig, adapt_enabled: bool = True
                  ) -> tuple[list[PredictionTriple], CacheState]:
    """Score every proposal of one image, then fold them into the cache.

    With an empty cache the final prediction falls back to the model's own,
    whatever the fusion strategy.
    """
    triples: list[PredictionTriple] = []
    for prop in rec.proposals:
        if len(cache) == 0:
            triples.append(PredictionTriple(
                init_pred=prop.init_pred, final_pred=prop.init_pred,
            ))
            continue
        sims = combined_similarity(prop, cache, cfg)
        mdist = softmax(sims)
        midx = int(np.argmax(mdist))
        pc = cache_posterior(mdist, cache)
        pf = fuse(prop.init_pred, pc, cfg.fusion_strategy)
        triples.append(PredictionTriple(
            init_pred=prop.init_pred, final_pred=pf, cache_pred=pc,
            match_dist=mdist, matched_index=midx,
            match_similarity=float(sims[midx]),
        ))

    if not adapt_enabled:
        return triples, cache

    out: list[PredictionTriple] = []
    for prop, triple in zip(rec.proposals, triples):
        absorbed = confidence_filter(triple.final_pred, cfg.tau1)
        cache = adapt(cache, prop, triple, cfg)
        out.append(triple.with_absorbed(absorbed))
    return out, cache


def run_session(stream: Iterable[ImageRecord], cfg: AdaptConfig,
                adapt_enabled: bool = True) -> SessionResult:
    """Fold process_image over the stream, starting from an empty cache."""
    start = time.perf_counter()
    cache = CacheState()
    images: list[ImageResult] = []
    trace: list[int] = []
    for rec in stream:
        triples, cache = process_image(rec, cache, cfg, adapt_enabled)
        outcomes = tuple(
            ProposalOutcome(triple=t, gt_label=p.gt_label, box=p.box,
                            gt_box=p.gt_box)
            for t, p in zip(triples, rec.proposals)
        )
        images.append(ImageResult(image_id=rec.image_id, outcomes=outcomes))
        trace.append(len(cache))
    return SessionResult(
        config=cfg, images=images, cache=cache, cache_trace=trace,
        elapsed_seconds=time.perf_counter() - start,
    )


# Named configurations of the ablation suite.  "baseline" is the raw model
# (no adaptation at all); "la" adapts prototypes and scales but pins each
# entry's prior one-hot at creation; "full" is the complete method.
VARIANTS = ("baseline", "la", "full", "average", "cache_only",
            "momentum", "delayed")


def variant_config(base: AdaptConfig, name: str) -> tuple[AdaptConfig, bool]:
    """(config, adapt_enabled) pair implementing a named variant."""
    if name == "baseline":
        return replace(base, fusion_strategy="init_only"), False
    if name == "la":
        return replace(base, prior_adapt=False), True
    if name == "full":
        return base, True
    if name == "average":
        return replace(base, fusion_strategy="average"), True
    if name == "cache_only":
        return replace(base, fusion_strategy="cache_only"), True
    if name == "momentum":
        return replace(base, update_strategy="momentum"), True
    if name == "delayed":
        return replace(base, update_strategy="delayed"), True
    raise ValueError(f"unknown variant {name!r}")


def run_variant_suite(stream: Iterable[ImageRecord], base_cfg: AdaptConfig,
                      variants: Iterable[str] = VARIANTS
                      ) -> dict[str, SessionResult]:
    """Run the named variants over one materialized stream."""
    records = list(stream)
    results: dict[str, SessionResult] = {}
    for name in variants:
        cfg, adapt_enabled = variant_config(base_cfg, name)
        results[name] = run_session(records, cfg, adapt_enabled)
    return results

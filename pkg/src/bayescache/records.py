"""Shared value types and their validation.

Embeddings and probability vectors are plain float64 ndarrays; the invariants
(unit L2 norm, simplex membership) are enforced at construction points rather
than through wrapper classes.  All types here are immutable and safe to share
between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadDistribution,
    DimensionMismatch,
    MissingBox,
    NotNormalized,
    SchemaError,
)

# A vector whose norm (or sum) is within PASS_ATOL of 1 is accepted as-is;
# within REPAIR_ATOL it is silently re-normalized (extractor quantization);
# beyond that it is rejected as corrupt.
PASS_ATOL = 1e-6
REPAIR_ATOL = 1e-4

RECOGNITION = "recognition"
DETECTION = "detection"
TASKS = (RECOGNITION, DETECTION)

UPDATE_STRATEGIES = ("count", "momentum", "delayed")
FUSION_STRATEGIES = ("entropy", "average", "init_only", "cache_only")


def l2_normalize(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Return ``values`` as a unit-norm float64 vector."""
    v = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise NotNormalized("cannot normalize a zero vector")
    return v / norm


def check_feature(values: Sequence[float] | np.ndarray, d: Optional[int] = None) -> np.ndarray:
    """Validate an embedding: float64, shape (d,), unit norm within tolerance.

    Norm deviations up to REPAIR_ATOL are repaired by re-normalization;
    larger deviations raise NotNormalized.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"feature must be a vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise DimensionMismatch(f"feature has dimension {v.shape[0]}, expected {d}")
    norm = float(np.linalg.norm(v))
    err = abs(norm - 1.0)
    if err <= PASS_ATOL:
        return v
    if err <= REPAIR_ATOL:
        return v / norm
    raise NotNormalized(f"feature norm {norm:.6g} deviates from 1 by {err:.3g}")


def check_distribution(probs: Sequence[float] | np.ndarray, k: Optional[int] = None) -> np.ndarray:
    """Validate a probability vector: non-negative, sums to 1 within tolerance.

    Sums off by up to REPAIR_ATOL are repaired by rescaling (32-bit record
    files round-trip through this); larger deviations raise BadDistribution.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise BadDistribution(f"distribution must be a vector, got shape {p.shape}")
    if k is not None and p.shape[0] != k:
        raise DimensionMismatch(f"distribution covers {p.shape[0]} classes, expected {k}")
    if np.any(p < 0.0):
        raise BadDistribution("distribution has negative mass")
    total = float(p.sum())
    err = abs(total - 1.0)
    if err <= PASS_ATOL:
        return p
    if err <= REPAIR_ATOL:
        return p / total
    raise BadDistribution(f"distribution sums to {total:.6g}")


@dataclass(frozen=True)
class Box:
    """Bounding box as center coordinates plus width/height.

    All four values are fractions of the image dimensions, in [0, 1].
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise SchemaError(f"box {name}={v:.6g} outside [0, 1]")

    def scale_wh(self) -> np.ndarray:
        """The (w, h) pair used for spatial-scale matching."""
        return np.array([self.w, self.h], dtype=np.float64)

    def corners(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max)."""
        return (self.x - self.w / 2, self.y - self.h / 2,
                self.x + self.w / 2, self.y + self.h / 2)


@dataclass(frozen=True, eq=False)
class ProposalRecord:
    """One output unit of the upstream model.

    ``box`` is present exactly in detection mode.  ``gt_label`` / ``gt_box``
    are evaluation-only annotations and never influence prediction.
    """

    feature: np.ndarray
    init_pred: np.ndarray
    box: Optional[Box] = None
    gt_label: Optional[int] = None
    gt_box: Optional[Box] = None


@dataclass(frozen=True, eq=False)
class ImageRecord:
    """Ordered proposals of one image (exactly one in recognition mode)."""

    image_id: str
    proposals: tuple[ProposalRecord, ...]


@dataclass(frozen=True)
class AdaptConfig:
    """Session-wide knobs of the adaptation engine.

    tau2 nominally lives in (0, 1]; values outside that range are accepted
    to express the two degenerate regimes (always-match / never-match).
    """

    K: int
    d: int
    task: str = RECOGNITION
    tau1: float = 0.8
    tau2: float = 0.8
    ws: float = 0.2
    update_strategy: str = "count"
    fusion_strategy: str = "entropy"
    momentum_alpha: float = 0.95
    delayed_k: int = 5
    prior_adapt: bool = True

    def __post_init__(self):
        if self.K < 1 or self.d < 1:
            raise ValueError("K and d must be positive")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.update_strategy not in UPDATE_STRATEGIES:
            raise ValueError(f"unknown update strategy {self.update_strategy!r}")
        if self.fusion_strategy not in FUSION_STRATEGIES:
            raise ValueError(f"unknown fusion strategy {self.fusion_strategy!r}")
        if not (0.0 < self.tau1):
            raise ValueError("tau1 must be positive")
        if not (0.0 <= self.ws <= 1.0):
            raise ValueError("ws must lie in [0, 1]")
        if not (0.0 < self.momentum_alpha < 1.0):
            raise ValueError("momentum_alpha must lie in (0, 1)")
        if self.delayed_k < 1:
            raise ValueError("delayed_k must be positive")

    @property
    def detection(self) -> bool:
        return self.task == DETECTION


@dataclass(frozen=True, eq=False)
class PredictionTriple:
    """Per-proposal prediction bundle.

    ``match_dist`` and friends are absent when the cache was empty at
    prediction time.  ``match_similarity`` is the pre-softmax combined
    similarity of the best-matching entry, the quantity the match
    threshold tau2 is compared against.
    """

    init_pred: np.ndarray
    final_pred: np.ndarray
    cache_pred: Optional[np.ndarray] = None
    match_dist: Optional[np.ndarray] = None
    matched_index: Optional[int] = None
    match_similarity: Optional[float] = None
    absorbed: bool = False

    @property
    def match_score(self) -> Optional[float]:
        """Matching-distribution mass of the best entry."""
        if self.match_dist is None or self.matched_index is None:
            return None
        return float(self.match_dist[self.matched_index])

    def with_absorbed(self, absorbed: bool) -> "PredictionTriple":
        return replace(self, absorbed=absorbed)


def validate_proposal(prop: ProposalRecord, cfg: AdaptConfig) -> ProposalRecord:
    """Validate (and possibly repair) a single proposal against the session."""
    feature = check_feature(prop.feature, cfg.d)
    init_pred = check_distribution(prop.init_pred, cfg.K)
    if cfg.detection and prop.box is None:
        raise MissingBox("detection record lacks a bounding box")
    if not cfg.detection and prop.box is not None:
        raise SchemaError("recognition record carries a bounding box")
    if prop.gt_label is not None and not (0 <= prop.gt_label < cfg.K):
        raise SchemaError(f"gt_label {prop.gt_label} outside [0, {cfg.K})")
    if feature is prop.feature and init_pred is prop.init_pred:
        return prop
    return replace(prop, feature=feature, init_pred=init_pred)


def validate_record(rec: ImageRecord, cfg: AdaptConfig) -> ImageRecord:
    """Validate an image record; returns it unchanged when already clean.

    Never mutates the session's K, d, or task: those come solely from cfg.
    """
    if not cfg.detection and len(rec.proposals) != 1:
        raise SchemaError(
            f"recognition record {rec.image_id!r} has {len(rec.proposals)} proposals"
        )
    validated = tuple(validate_proposal(p, cfg) for p in rec.proposals)
    if all(v is p for v, p in zip(validated, rec.proposals)):
        return rec
    return ImageRecord(image_id=rec.image_id, proposals=validated)

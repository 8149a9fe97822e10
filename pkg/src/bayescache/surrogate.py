"""Synthetic stand-in for the upstream models.

Reproduces the two initial-prediction forms (softmax over cosine
similarities, and softmax over sigmoid-squashed cosine similarities)
against a bank of synthetic class prototypes, and generates
distribution-shifted streams so the whole engine runs without any
external model or weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import cosine_to_rows, sigmoid, softmax
from .errors import BadShiftSpec
from .records import (
    DETECTION,
    Box,
    ImageRecord,
    ProposalRecord,
    check_distribution,
    l2_normalize,
)


@dataclass(frozen=True, eq=False)
class PrototypeBank:
    """Per-class text-side prototypes (rows unit-norm) and, for detection
    streams, the canonical (w, h) scale the generator draws boxes around."""

    text_embeds: np.ndarray
    class_scales: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return self.text_embeds.shape[0]

    @property
    def d(self) -> int:
        return self.text_embeds.shape[1]


@dataclass(frozen=True, eq=False)
class ShiftSpec:
    """Test-time distribution shift applied by the stream generator.

    prior_skew       target class frequencies (sums to 1)
    prototype_drift  fixed per-class rotation away from the text prototype,
                     radians, norm-preserving
    noise_sigma      isotropic feature noise before re-normalization
    scale_jitter     log-normal multiplicative jitter on box width/height
    background_rate  detection only: fraction of decoy proposals whose
                     feature matches no class
    """

    prior_skew: np.ndarray
    prototype_drift: float = 0.0
    noise_sigma: float = 0.0
    scale_jitter: float = 0.0
    background_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        skew = np.asarray(self.prior_skew, dtype=np.float64)
        if skew.ndim != 1 or np.any(skew < 0) or abs(skew.sum() - 1.0) > 1e-9:
            raise BadShiftSpec("prior_skew is not a probability distribution")
        object.__setattr__(self, "prior_skew", skew)
        for name in ("prototype_drift", "noise_sigma", "scale_jitter"):
            if getattr(self, name) < 0:
                raise BadShiftSpec(f"{name} must be non-negative")
        if not (0.0 <= self.background_rate < 1.0):
            raise BadShiftSpec("background_rate must lie in [0, 1)")


def concentrated_skew(K: int, top: int, mass: float) -> np.ndarray:
    """Skew putting ``mass`` on the first ``top`` classes, rest uniform."""
    skew = np.full(K, (1.0 - mass) / (K - top), dtype=np.float64)
    skew[:top] = mass / top
    return skew


def make_prototype_bank(K: int, d: int, seed: int = 0,
                        max_pairwise_cos: float = 0.5,
                        with_scales: bool = False,
                        max_attempts: int = 10_000) -> PrototypeBank:
    """Sample K unit prototypes with pairwise cosine <= max_pairwise_cos.

    Rejection keeps the classes separable even at small d; raises when the
    requested geometry cannot be placed.
    """
    if K < 2:
        raise ValueError("a prototype bank needs at least 2 classes")
    rng = np.random.default_rng(seed)
    rows: list[np.ndarray] = []
    for _ in range(K):
        for attempt in range(max_attempts):
            v = l2_normalize(rng.standard_normal(d))
            if all(float(v @ r) <= max_pairwise_cos for r in rows):
                rows.append(v)
                break
        else:
            raise ValueError(
                f"could not place {K} prototypes with pairwise cosine "
                f"<= {max_pairwise_cos} in dimension {d}"
            )
    scales = None
    if with_scales:
        scales = rng.uniform(0.15, 0.55, size=(K, 2))
    return PrototypeBank(text_embeds=np.stack(rows), class_scales=scales)


def clip_init_pred(feature: np.ndarray, bank: PrototypeBank) -> np.ndarray:
    """Softmax over cosine similarities to the class prototypes."""
    return softmax(cosine_to_rows(feature, bank.text_embeds))


def gdino_init_pred(feature: np.ndarray, bank: PrototypeBank) -> np.ndarray:
    """Softmax over sigmoid-squashed cosine similarities."""
    return softmax(sigmoid(cosine_to_rows(feature, bank.text_embeds)))


def _rotate_in_random_plane(v: np.ndarray, angle: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Rotate ``v`` by ``angle`` in a random 2-plane containing it."""
    if angle == 0.0:
        return v
    for _ in range(100):
        u = rng.standard_normal(v.shape[0])
        u = u - (u @ v) * v
        norm = np.linalg.norm(u)
        if norm > 1e-12:
            break
    u = u / norm
    return np.cos(angle) * v + np.sin(angle) * u


def _draw_box(w: float, h: float, rng: np.random.Generator) -> Box:
    w = float(np.clip(w, 0.02, 1.0))
    h = float(np.clip(h, 0.02, 1.0))
    x = rng.uniform(w / 2, 1.0 - w / 2) if w < 1.0 else 0.5
    y = rng.uniform(h / 2, 1.0 - h / 2) if h < 1.0 else 0.5
    return Box(x=x, y=y, w=w, h=h)


def generate_stream(bank: PrototypeBank, shift: ShiftSpec, n_images: int,
                    proposals_per_image: int = 1,
                    task: str = "recognition") -> list[ImageRecord]:
    """Deterministic synthetic stream for a fixed seed.

    Each class mean is the text prototype rotated once by prototype_drift
    (the systematic shift); per-proposal features add isotropic noise and
    are re-normalized.  Detection streams draw boxes around the per-class
    canonical scale and may inject background decoys with mismatched
    features at ``shift.background_rate``.
    """
    if n_images < 1:
        raise ValueError("n_images must be at least 1")
    detection = task == DETECTION
    if not detection and proposals_per_image != 1:
        raise ValueError("recognition streams carry exactly one proposal per image")
    if shift.prior_skew.shape[0] != bank.K:
        raise BadShiftSpec(
            f"prior_skew covers {shift.prior_skew.shape[0]} classes, bank has {bank.K}"
        )
    if detection and bank.class_scales is None:
        raise BadShiftSpec("detection stream needs a bank with class scales")

    rng = np.random.default_rng(shift.seed)
    means = np.stack([
        _rotate_in_random_plane(bank.text_embeds[k], shift.prototype_drift, rng)
        for k in range(bank.K)
    ])

    predict = gdino_init_pred if detection else clip_init_pred
    records = []
    for i in range(n_images):
        proposals = []
        for _ in range(proposals_per_image):
            if detection and rng.random() < shift.background_rate:
                feature = l2_normalize(rng.standard_normal(bank.d))
                box = _draw_box(rng.uniform(0.05, 0.9), rng.uniform(0.05, 0.9), rng)
                proposals.append(ProposalRecord(
                    feature=feature,
                    init_pred=check_distribution(predict(feature, bank)),
                    box=box,
                ))
                continue
            gt = int(rng.choice(bank.K, p=shift.prior_skew))
            if shift.noise_sigma == 0.0:
                feature = means[gt]
            else:
                feature = l2_normalize(
                    means[gt] + shift.noise_sigma * rng.standard_normal(bank.d)
                )
            box = gt_box = None
            if detection:
                jitter = np.exp(shift.scale_jitter * rng.standard_normal(2))
                w, h = bank.class_scales[gt] * jitter
                box = gt_box = _draw_box(w, h, rng)
            proposals.append(ProposalRecord(
                feature=feature,
                init_pred=check_distribution(predict(feature, bank)),
                box=box,
                gt_label=gt,
                gt_box=gt_box,
            ))
        records.append(ImageRecord(image_id=f"img{i:06d}", proposals=tuple(proposals)))
    return records

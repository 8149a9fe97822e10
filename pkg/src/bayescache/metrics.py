"""Post-hoc evaluation: top-1 accuracy, IoU, AP@50, segment breakdowns.

AP uses all-point interpolation (precision envelope integrated over every
recall step) and averages over the classes present in the ground truth.
"""

from __future__ import annotations

import csv
import io
from typing import Optional, Sequence

import numpy as np

from .engine import shannon_entropy
from .errors import BadRange, MissingGroundTruth
from .pipeline import SessionResult
from .records import Box


def _check_segment(segment: tuple[float, float]) -> tuple[float, float]:
    lo, hi = segment
    if not (0.0 <= lo < hi <= 1.0):
        raise BadRange(f"segment ({lo}, {hi}) is not a sub-interval of [0, 1]")
    return lo, hi


def _image_slice(result: SessionResult, segment: tuple[float, float]):
    lo, hi = _check_segment(segment)
    n = result.n_images
    return result.images[int(round(lo * n)):int(round(hi * n))]


def _pick_pred(outcome, use: str) -> Optional[np.ndarray]:
    t = outcome.triple
    if use == "final":
        return t.final_pred
    if use == "init":
        return t.init_pred
    if use == "cache":
        return t.cache_pred
    raise ValueError(f"unknown prediction kind {use!r}")


def top1_accuracy(result: SessionResult, segment: tuple[float, float] = (0.0, 1.0),
                  use: str = "final") -> float:
    """Fraction of proposals whose argmax prediction hits the ground truth.

    Ties break to the lowest index.  Every proposal in the segment must
    carry a gt_label.
    """
    correct = 0
    total = 0
    for img in _image_slice(result, segment):
        for outcome in img.outcomes:
            if outcome.gt_label is None:
                raise MissingGroundTruth(
                    f"proposal in image {img.image_id!r} has no gt_label"
                )
            pred = _pick_pred(outcome, use)
            if pred is None:   # cache prediction absent while cache was empty
                pred = outcome.triple.init_pred
            correct += int(np.argmax(pred)) == outcome.gt_label
            total += 1
    if total == 0:
        raise MissingGroundTruth("segment contains no proposals")
    return correct / total


def protocol_accuracy(result: SessionResult, warmup_frac: float = 0.15,
                      segment: tuple[float, float] = (0.0, 1.0)) -> float:
    """Cache-only evaluation protocol: the first ``warmup_frac`` of the
    sequence is scored with the model's own prediction (the cache is still
    being populated), the remainder with the final prediction."""
    lo, hi = _check_segment(segment)
    n = result.n_images
    warm_cut = warmup_frac * n
    correct = 0
    total = 0
    for idx in range(int(round(lo * n)), int(round(hi * n))):
        img = result.images[idx]
        use = "init" if idx < warm_cut else "final"
        for outcome in img.outcomes:
            if outcome.gt_label is None:
                raise MissingGroundTruth(
                    f"proposal in image {img.image_id!r} has no gt_label"
                )
            pred = _pick_pred(outcome, use)
            correct += int(np.argmax(pred)) == outcome.gt_label
            total += 1
    if total == 0:
        raise MissingGroundTruth("segment contains no proposals")
    return correct / total


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two centered boxes; 0 when disjoint."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _average_precision(scores: Sequence[float], hits: Sequence[bool],
                       n_gt: int) -> float:
    """All-point interpolated AP from per-detection (score, hit) pairs."""
    if n_gt == 0:
        return 0.0
    if not scores:
        return 0.0
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    tp = 0
    fp = 0
    recalls = [0.0]
    precisions = [1.0]
    for i in order:
        tp += hits[i]
        fp += not hits[i]
        recalls.append(tp / n_gt)
        precisions.append(tp / (tp + fp))
    # precision envelope, then sum area over recall steps
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    for i in range(1, len(recalls)):
        ap += (recalls[i] - recalls[i - 1]) * precisions[i]
    return ap


def ap50(result: SessionResult, segment: tuple[float, float] = (0.0, 1.0),
         iou_threshold: float = 0.5, score_floor: float = 0.0,
         use: str = "final") -> float:
    """Mean AP at the given IoU threshold over classes with ground truth.

    Each proposal contributes one detection: its argmax class and max
    probability under the chosen prediction.  Detections greedily claim
    the unmatched same-class ground truth with the highest IoU.
    """
    images = _image_slice(result, segment)
    # class -> image -> list of gt boxes
    gt_boxes: dict[int, dict[int, list[Box]]] = {}
    detections: dict[int, list[tuple[float, int, Box]]] = {}
    for img_idx, img in enumerate(images):
        for outcome in img.outcomes:
            if outcome.gt_label is not None and outcome.gt_box is not None:
                gt_boxes.setdefault(outcome.gt_label, {}) \
                        .setdefault(img_idx, []).append(outcome.gt_box)
            pred = _pick_pred(outcome, use)
            if pred is None:
                pred = outcome.triple.init_pred
            cls = int(np.argmax(pred))
            score = float(np.max(pred))
            if score >= score_floor and outcome.box is not None:
                detections.setdefault(cls, []).append((score, img_idx, outcome.box))
    if not gt_boxes:
        raise MissingGroundTruth("segment contains no ground-truth boxes")

    aps = []
    for cls, per_image_gt in gt_boxes.items():
        dets = sorted(detections.get(cls, []), key=lambda t: -t[0])
        claimed: dict[int, list[bool]] = {
            i: [False] * len(boxes) for i, boxes in per_image_gt.items()
        }
        scores: list[float] = []
        hits: list[bool] = []
        for score, img_idx, box in dets:
            best_iou = 0.0
            best_j = -1
            for j, gt in enumerate(per_image_gt.get(img_idx, [])):
                if claimed[img_idx][j]:
                    continue
                v = iou(box, gt)
                if v > best_iou:
                    best_iou = v
                    best_j = j
            hit = best_iou >= iou_threshold
            if hit:
                claimed[img_idx][best_j] = True
            scores.append(score)
            hits.append(hit)
        n_gt = sum(len(b) for b in per_image_gt.values())
        aps.append(_average_precision(scores, hits, n_gt))
    return float(np.mean(aps))


def segment_report(result: SessionResult,
                   splits: Sequence[tuple[float, float]]) -> list[dict]:
    """Per-segment metric table: accuracy (recognition) or mAP50
    (detection) plus entropy statistics and absorption counts."""
    rows = []
    detection = result.config.detection
    for segment in splits:
        images = _image_slice(result, segment)
        n_proposals = sum(len(img.outcomes) for img in images)
        absorbed = sum(
            o.triple.absorbed for img in images for o in img.outcomes
        )
        init_entropies = [
            shannon_entropy(o.triple.init_pred)
            for img in images for o in img.outcomes
        ]
        final_entropies = [
            shannon_entropy(o.triple.final_pred)
            for img in images for o in img.outcomes
        ]
        row = {
            "lo": segment[0],
            "hi": segment[1],
            "n_images": len(images),
            "n_proposals": n_proposals,
            "absorbed": absorbed,
            "mean_init_entropy": float(np.mean(init_entropies)) if init_entropies else float("nan"),
            "mean_final_entropy": float(np.mean(final_entropies)) if final_entropies else float("nan"),
        }
        if detection:
            row["map50"] = ap50(result, segment)
        else:
            row["accuracy"] = top1_accuracy(result, segment)
        rows.append(row)
    return rows


def report_to_csv(rows: list[dict]) -> str:
    """Render segment_report rows as CSV text."""
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def plot_data(result: SessionResult) -> dict:
    """Accuracy-over-time and cache-size trace, JSON-friendly."""
    running: list[float] = []
    correct = 0
    total = 0
    have_gt = True
    for img in result.images:
        for outcome in img.outcomes:
            if outcome.gt_label is None:
                continue
            correct += int(np.argmax(outcome.triple.final_pred)) == outcome.gt_label
            total += 1
        running.append(correct / total if total else float("nan"))
    return {
        "image_index": list(range(result.n_images)),
        "running_accuracy": running,
        "cache_trace": list(result.cache_trace),
    }

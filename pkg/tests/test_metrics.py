"""Evaluation metrics: accuracy, IoU, AP@50, segment reports."""

import numpy as np
import pytest

from bayescache import AdaptConfig, Box, PredictionTriple
from bayescache.errors import BadRange, MissingGroundTruth
from bayescache.metrics import (
    ap50,
    iou,
    plot_data,
    protocol_accuracy,
    report_to_csv,
    segment_report,
    top1_accuracy,
)
from bayescache.pipeline import ImageResult, ProposalOutcome, SessionResult


def outcome(final, gt=None, box=None, gt_box=None, init=None, absorbed=False):
    final = np.asarray(final, dtype=np.float64)
    init_pred = final if init is None else np.asarray(init, dtype=np.float64)
    return ProposalOutcome(
        triple=PredictionTriple(init_pred=init_pred, final_pred=final,
                                absorbed=absorbed),
        gt_label=gt, box=box, gt_box=gt_box,
    )


def session_of(image_outcomes, task="recognition", k=2, d=2):
    images = [
        ImageResult(image_id=f"img{i}", outcomes=tuple(outs))
        for i, outs in enumerate(image_outcomes)
    ]
    return SessionResult(
        config=AdaptConfig(K=k, d=d, task=task),
        images=images, cache=None,
        cache_trace=list(range(1, len(images) + 1)),
    )


class TestTop1Accuracy:
    def test_all_correct(self):
        result = session_of([[outcome([0.9, 0.1], gt=0)],
                             [outcome([0.2, 0.8], gt=1)]])
        assert top1_accuracy(result) == 1.0

    def test_uniform_prediction_tie_breaks_to_index_zero(self):
        result = session_of([[outcome([0.5, 0.5], gt=0)]] * 4)
        assert top1_accuracy(result) == 1.0

    def test_three_of_four(self):
        result = session_of([
            [outcome([0.9, 0.1], gt=0)],
            [outcome([0.9, 0.1], gt=0)],
            [outcome([0.9, 0.1], gt=1)],
            [outcome([0.1, 0.9], gt=1)],
        ])
        assert top1_accuracy(result) == 0.75

    def test_missing_ground_truth(self):
        result = session_of([[outcome([0.9, 0.1])]])
        with pytest.raises(MissingGroundTruth):
            top1_accuracy(result)

    def test_protocol_accuracy_uses_init_during_warmup(self):
        # init predicts class 0, final predicts class 1; labels are 0 early
        # and 1 late, so the protocol scores 100% while plain final does not
        outs = []
        for i in range(20):
            gt = 0 if i < 3 else 1
            outs.append([outcome([0.1, 0.9], gt=gt, init=[0.9, 0.1])])
        result = session_of(outs)
        assert protocol_accuracy(result, warmup_frac=0.15) == 1.0
        assert top1_accuracy(result) < 1.0


class TestIoU:
    def test_identical_boxes(self):
        a = Box(0.5, 0.5, 0.4, 0.4)
        assert iou(a, a) == 1.0

    def test_disjoint_boxes(self):
        assert iou(Box(0.2, 0.2, 0.2, 0.2), Box(0.8, 0.8, 0.2, 0.2)) == 0.0

    def test_half_width_offset_pair(self):
        a = Box(0.25, 0.5, 0.5, 1.0)
        b = Box(0.5, 0.5, 0.5, 1.0)
        assert iou(a, b) == pytest.approx(1 / 3, abs=5e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            def rand_box():
                w, h = rng.uniform(0.05, 0.5, 2)
                return Box(rng.uniform(w / 2, 1 - w / 2),
                           rng.uniform(h / 2, 1 - h / 2), w, h)
            a, b = rand_box(), rand_box()
            va, vb = iou(a, b), iou(b, a)
            assert va == pytest.approx(vb, abs=1e-12)
            assert 0.0 <= va <= 1.0


class TestAp50:
    def test_every_gt_matched_perfectly(self):
        box = Box(0.5, 0.5, 0.3, 0.3)
        result = session_of(
            [[outcome([0.9, 0.1], gt=0, box=box, gt_box=box)],
             [outcome([0.1, 0.9], gt=1, box=box, gt_box=box)]],
            task="detection")
        assert ap50(result) == 1.0

    def test_no_detections_gives_zero(self):
        box = Box(0.5, 0.5, 0.3, 0.3)
        result = session_of(
            [[outcome([0.9, 0.1], gt=0, box=box, gt_box=box)]],
            task="detection")
        assert ap50(result, score_floor=1.1) == 0.0

    def test_true_positive_rank_order_changes_ap(self):
        gt_box = Box(0.5, 0.5, 0.3, 0.3)
        far_box = Box(0.1, 0.1, 0.1, 0.1)
        # TP scored above FP -> AP 1.0
        result = session_of([[
            outcome([0.9, 0.1], gt=0, box=gt_box, gt_box=gt_box),
            outcome([0.8, 0.2], box=far_box),
        ]], task="detection")
        assert ap50(result) == 1.0
        # FP scored above TP -> AP 0.5
        result = session_of([[
            outcome([0.8, 0.2], gt=0, box=gt_box, gt_box=gt_box),
            outcome([0.9, 0.1], box=far_box),
        ]], task="detection")
        assert ap50(result) == 0.5

    def test_invariant_under_monotone_score_rescaling(self):
        rng = np.random.default_rng(11)
        k = 3
        images = []
        for i in range(30):
            outs = []
            for _ in range(4):
                w, h = rng.uniform(0.1, 0.4, 2)
                box = Box(rng.uniform(w / 2, 1 - w / 2),
                          rng.uniform(h / 2, 1 - h / 2), w, h)
                pred = rng.dirichlet(np.ones(k))
                gt = int(rng.integers(0, k)) if rng.random() < 0.7 else None
                outs.append(outcome(pred, gt=gt, box=box,
                                    gt_box=box if gt is not None else None))
            images.append(outs)
        base = session_of(images, task="detection", k=k)
        # strictly monotone transform of every prediction: sqrt preserves
        # argmax and ranking of max-scores
        squashed_images = []
        for img in base.images:
            outs = []
            for o in img.outcomes:
                p = np.sqrt(o.triple.final_pred)
                outs.append(ProposalOutcome(
                    triple=PredictionTriple(init_pred=p, final_pred=p),
                    gt_label=o.gt_label, box=o.box, gt_box=o.gt_box))
            squashed_images.append(list(outs))
        squashed = session_of(squashed_images, task="detection", k=k)
        assert ap50(base) == pytest.approx(ap50(squashed), abs=1e-12)

    def test_requires_ground_truth(self):
        result = session_of(
            [[outcome([0.9, 0.1], box=Box(0.5, 0.5, 0.2, 0.2))]],
            task="detection")
        with pytest.raises(MissingGroundTruth):
            ap50(result)


class TestSegmentReport:
    def make_result(self):
        outs = [[outcome([0.9, 0.1], gt=0 if i % 4 else 1)] for i in range(20)]
        return session_of(outs)

    def test_full_range_equals_whole_metric(self):
        result = self.make_result()
        rows = segment_report(result, [(0.0, 1.0)])
        assert rows[0]["accuracy"] == top1_accuracy(result)
        assert rows[0]["n_images"] == 20

    def test_halves_partition_counts_exactly(self):
        result = self.make_result()
        rows = segment_report(result, [(0.0, 0.5), (0.5, 1.0)])
        assert rows[0]["n_images"] + rows[1]["n_images"] == 20
        assert rows[0]["n_proposals"] + rows[1]["n_proposals"] == 20

    def test_bad_range(self):
        result = self.make_result()
        for bad in [(0.5, 0.5), (-0.1, 1.0), (0.0, 1.2), (0.9, 0.1)]:
            with pytest.raises(BadRange):
                segment_report(result, [bad])

    def test_csv_rendering(self):
        result = self.make_result()
        text = report_to_csv(segment_report(result, [(0.0, 1.0)]))
        lines = text.strip().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("lo,hi,n_images")

    def test_plot_data_shapes(self):
        result = self.make_result()
        data = plot_data(result)
        assert len(data["running_accuracy"]) == 20
        assert len(data["cache_trace"]) == 20
        assert data["running_accuracy"][-1] == top1_accuracy(result)

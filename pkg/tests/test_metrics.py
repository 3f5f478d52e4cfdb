import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import box
from tdmvision.errors import ValidationError
from tdmvision.frames import BoundingBox, Detection
from tdmvision.metrics import (
    ConfusionMatrix,
    LossWeights,
    MatchOutcome,
    average_precision,
    bce,
    ciou_loss,
    composite_loss,
    confusion_matrix,
    f1_from_pr,
    iou,
    map_suite,
    mask_iou,
    match_detections,
    miou,
    mpla,
    prf1,
)

# multiples of 1/8 keep sums and differences exact, so translation is lossless
finite = st.integers(-8000, 8000).map(lambda v: v / 8)


@st.composite
def boxes(draw, positive=False):
    x0, y0 = draw(finite), draw(finite)
    lo = 4 if positive else 0
    size = st.integers(lo, 2400).map(lambda v: v / 8)
    return BoundingBox(x0, y0, x0 + draw(size), y0 + draw(size))


class TestIoU:
    def test_identical(self):
        assert iou(box(1, 2, 5, 9), box(1, 2, 5, 9)) == 1.0

    def test_disjoint(self):
        assert iou(box(0, 0, 1, 1), box(5, 5, 6, 6)) == 0.0

    def test_partial(self):
        assert iou(box(0, 0, 10, 10), box(5, 5, 15, 15)) == pytest.approx(25 / 175, abs=1e-15)

    def test_both_degenerate(self):
        assert iou(box(1, 1, 1, 1), box(1, 1, 1, 1)) == 0.0

    @given(boxes(), boxes(), finite, finite)
    def test_symmetry_and_translation(self, a, b, dx, dy):
        assert iou(a, b) == iou(b, a)
        assert iou(a.translate(dx, dy), b.translate(dx, dy)) == pytest.approx(iou(a, b), abs=1e-12)
        assert 0.0 <= iou(a, b) <= 1.0

    @given(boxes(positive=True))
    def test_self(self, a):
        assert iou(a, a) == pytest.approx(1.0)


class TestCIoU:
    def test_perfect(self):
        assert ciou_loss(box(3, 4, 9, 8), box(3, 4, 9, 8)) == 0.0

    def test_concentric_same_aspect(self):
        # 10x10 inside 20x20, same center: IoU 0.25, no distance or aspect penalty
        assert ciou_loss(box(5, 5, 15, 15), box(0, 0, 20, 20)) == pytest.approx(0.75)

    def test_adjacent_against_term_oracle(self):
        got = ciou_loss(box(0, 0, 10, 10), box(10, 0, 20, 10))
        assert got == pytest.approx(oracles.ciou_terms((0, 0, 10, 10), (10, 0, 20, 10)), abs=1e-12)
        assert got == pytest.approx(1.2)

    def test_random_against_term_oracle(self):
        rng = random.Random(7)
        for _ in range(200):
            p = [rng.uniform(0, 50), rng.uniform(0, 50)]
            p += [p[0] + rng.uniform(0.1, 40), p[1] + rng.uniform(0.1, 40)]
            g = [rng.uniform(0, 50), rng.uniform(0, 50)]
            g += [g[0] + rng.uniform(0.1, 40), g[1] + rng.uniform(0.1, 40)]
            assert ciou_loss(BoundingBox(*p), BoundingBox(*g)) == pytest.approx(
                oracles.ciou_terms(p, g), abs=1e-12)

    def test_zero_height_uses_limit(self):
        v = ciou_loss(box(0, 0, 4, 0), box(0, 0, 4, 4))
        assert math.isfinite(v) and v > 0

    @given(boxes(positive=True), st.floats(0.1, 5))
    def test_concentric_reduces_to_iou(self, a, scale):
        cx, cy = a.center
        b = BoundingBox(cx - a.width * scale / 2, cy - a.height * scale / 2,
                        cx + a.width * scale / 2, cy + a.height * scale / 2)
        assert ciou_loss(a, b) == pytest.approx(1 - iou(a, b), abs=1e-9)


class TestLosses:
    def test_bce_perfect(self):
        assert bce(1.0, 1) == pytest.approx(-math.log(1 - 1e-7))
        assert bce(1.0, 1) == pytest.approx(1e-7, rel=1e-6)

    def test_bce_half(self):
        assert bce(0.5, 1) == pytest.approx(0.6931471805599453)

    def test_bce_confident_wrong(self):
        assert bce(0.9, 0) == pytest.approx(2.302585092994046)

    @pytest.mark.parametrize("p", [-0.01, 1.5])
    def test_bce_domain(self, p):
        with pytest.raises(ValidationError):
            bce(p, 1)

    def test_composite(self):
        assert composite_loss(LossWeights(), 0, 0, 0) == 0
        assert composite_loss(LossWeights(1, 1, 1), 0.2, 0.3, 0.5) == pytest.approx(1.0)
        assert composite_loss(LossWeights(0.5, 0.3, 0.2), 1, 2, 3) == pytest.approx(1.7)

    def test_composite_rejects_negative(self):
        with pytest.raises(ValidationError):
            composite_loss(LossWeights(), 0.1, -0.2, 0.0)
        with pytest.raises(ValidationError):
            LossWeights(-1, 0, 0)


def det(x0, y0, x1, y1, score):
    return Detection(BoundingBox(x0, y0, x1, y1), score)


class TestMatching:
    def test_exact(self):
        m = match_detections([det(0, 0, 10, 10, 0.9)], [box(0, 0, 10, 10)], 0.5)
        assert (m.tp, m.fp, m.fn) == (1, 0, 0)

    def test_no_detections(self):
        m = match_detections([], [box(0, 0, 1, 1)] * 3, 0.5)
        assert (m.tp, m.fp, m.fn) == (0, 0, 3)

    def test_duplicate_goes_to_higher_score(self):
        gt = box(0, 0, 10, 10)
        # both have IoU 0.6 with the ground truth
        d_hi = det(0, 0, 10, 6, 0.9)
        d_lo = det(0, 4, 10, 10, 0.8)
        assert iou(d_hi.box, gt) == pytest.approx(0.6)
        m = match_detections([d_lo, d_hi], [gt], 0.5)
        assert (m.tp, m.fp, m.fn) == (1, 1, 0)
        assert m.flags == ((0.9, True), (0.8, False))

    def test_gt_tie_goes_to_lowest_index(self):
        m = match_detections([det(0, 0, 10, 10, 0.5)], [box(0, 0, 10, 10)] * 2, 0.5)
        assert m.tp == 1 and m.fn == 1

    def test_random_counts(self):
        rng = random.Random(11)
        for _ in range(1000):
            gts = [BoundingBox(x, y, x + rng.uniform(1, 20), y + rng.uniform(1, 20))
                   for x, y in ((rng.uniform(0, 40), rng.uniform(0, 40))
                                for _ in range(rng.randint(0, 6)))]
            dets = [det(x, y, x + rng.uniform(1, 20), y + rng.uniform(1, 20), rng.random())
                    for x, y in ((rng.uniform(0, 40), rng.uniform(0, 40))
                                 for _ in range(rng.randint(0, 8)))]
            m = match_detections(dets, gts, rng.choice([0.3, 0.5, 0.75]))
            assert m.tp + m.fn == len(gts)
            assert m.tp + m.fp == len(dets)


class TestPRF1:
    def test_formula(self):
        p, r, f = prf1(MatchOutcome(8, 2, 0))
        assert (p, r) == (0.8, 1.0)
        assert f == pytest.approx(16 / 18)

    def test_zero_convention(self):
        assert prf1(MatchOutcome(0, 0, 0)) == (0.0, 0.0, 0.0)

    def test_reported_detector_row(self):
        assert f1_from_pr(0.9042, 0.9204) == pytest.approx(0.9123, abs=5e-4)


def random_instance(rng, max_dets=20, max_gts=10, n_images=None, coarse_scores=False):
    n_images = n_images or rng.randint(1, 3)
    dets, gts = {}, {}
    for k in range(n_images):
        key = f"im{k}"
        gts[key] = []
        for _ in range(rng.randint(0, max(1, max_gts // n_images))):
            x, y = rng.uniform(0, 30), rng.uniform(0, 30)
            gts[key].append(BoundingBox(x, y, x + rng.uniform(4, 15), y + rng.uniform(4, 15)))
        dets[key] = []
        for _ in range(rng.randint(0, max(1, max_dets // n_images))):
            if gts[key] and rng.random() < 0.7:
                g = rng.choice(gts[key])
                j = rng.uniform(-0.15, 0.15) * g.width
                b = BoundingBox(g.x_min + j, g.y_min + j, g.x_max + j, g.y_max + j)
            else:
                x, y = rng.uniform(0, 30), rng.uniform(0, 30)
                b = BoundingBox(x, y, x + rng.uniform(4, 15), y + rng.uniform(4, 15))
            score = round(rng.random(), 1) if coarse_scores else rng.random()
            dets[key].append(Detection(b, score))
    if not any(gts.values()):
        gts["im0"].append(BoundingBox(0, 0, 5, 5))
    return dets, gts


def as_plain(dets, gts):
    return ({k: [(d.box.as_tuple(), d.score) for d in v] for k, v in dets.items()},
            {k: [b.as_tuple() for b in v] for k, v in gts.items()})


class TestAveragePrecision:
    def test_single_match(self):
        assert average_precision({"a": [det(0, 0, 5, 5, 0.7)]}, {"a": [box(0, 0, 5, 5)]}, 0.5) == 1.0

    def test_no_detections(self):
        assert average_precision({}, {"a": [box(0, 0, 5, 5)]}, 0.5) == 0.0

    def test_no_ground_truth(self):
        with pytest.raises(ValidationError):
            average_precision({"a": [det(0, 0, 1, 1, 0.5)]}, {"a": []}, 0.5)

    def test_hand_worked(self):
        # ranks: TP, FP, TP over 2 gts -> points (0.5, 1), (0.5, 0.5), (1, 2/3)
        gts = {"a": [box(0, 0, 10, 10), box(20, 20, 30, 30)]}
        dets = {"a": [det(0, 0, 10, 10, 0.9), det(50, 50, 60, 60, 0.8), det(20, 20, 30, 30, 0.7)]}
        assert average_precision(dets, gts, 0.5) == pytest.approx(0.5 * 1 + 0.5 * 2 / 3)

    def test_tied_scores_form_one_operating_point(self):
        gts = {"a": [box(0, 0, 10, 10)]}
        dets = {"a": [det(40, 40, 50, 50, 0.5), det(0, 0, 10, 10, 0.5)]}
        assert average_precision(dets, gts, 0.5) == pytest.approx(0.5)

    @pytest.mark.parametrize("coarse", [False, True])
    def test_matches_threshold_sweep(self, coarse):
        rng = random.Random(2024 + coarse)
        for _ in range(60):
            dets, gts = random_instance(rng, coarse_scores=coarse)
            pd, pg = as_plain(dets, gts)
            for tau in (0.5, 0.75, 0.95):
                assert average_precision(dets, gts, tau) == pytest.approx(
                    oracles.ap_threshold_sweep(pd, pg, tau), abs=1e-9)

    def test_monotone_in_threshold(self):
        rng = random.Random(5)
        for _ in range(100):
            dets, gts = random_instance(rng)
            aps = [average_precision(dets, gts, t) for t in (0.3, 0.5, 0.75, 0.95)]
            assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))


class TestMapSuite:
    def test_perfect(self):
        gts = {"a": [box(0, 0, 10, 10)], "b": [box(5, 5, 9, 9), box(20, 20, 40, 30)]}
        dets = {k: [Detection(b, 0.9) for b in v] for k, v in gts.items()}
        assert map_suite(dets, gts) == {"mAP50": 1.0, "mAP75": 1.0, "mAP95": 1.0}

    def test_threshold_gating(self):
        gts = {"a": [box(0, 0, 10, 10)]}
        dets = {"a": [det(0, 0, 10, 6, 0.9)]}
        assert map_suite(dets, gts) == {"mAP50": 1.0, "mAP75": 0.0, "mAP95": 0.0}

    def test_random_against_oracle(self):
        rng = random.Random(99)
        for _ in range(20):
            dets, gts = random_instance(rng)
            pd, pg = as_plain(dets, gts)
            got = map_suite(dets, gts)
            for name, tau in (("mAP50", 0.5), ("mAP75", 0.75), ("mAP95", 0.95)):
                assert got[name] == pytest.approx(oracles.ap_threshold_sweep(pd, pg, tau), abs=1e-9)

    def test_sweep_column(self):
        gts = {"a": [box(0, 0, 10, 10)]}
        dets = {"a": [det(0, 0, 10, 8, 0.9)]}  # IoU 0.8
        out = map_suite(dets, gts, sweep=True)
        # passes at 0.50 .. 0.80 (7 of 10 thresholds)
        assert out["mAP50_95"] == pytest.approx(0.7)

    def test_per_class_average(self):
        gts = {"a": [box(0, 0, 10, 10), box(20, 20, 30, 30)]}
        classes = {"a": [0, 1]}
        dets = {"a": [Detection(box(0, 0, 10, 10), 0.9, 0), Detection(box(20, 20, 30, 30), 0.9, 0)]}
        # class 0: tied TP and FP give one point (R=1, P=0.5); class 1 has no detections
        out = map_suite(dets, gts, gt_classes=classes)
        assert out["mAP50"] == pytest.approx((0.5 + 0.0) / 2)


class TestSegmentation:
    def test_confusion_diagonal(self):
        gt = np.array([0] * 10 + [1] * 6).reshape(4, 4)
        cm = confusion_matrix(gt, gt, 2)
        np.testing.assert_array_equal(cm.p, [[10, 0], [0, 6]])

    def test_confusion_all_background(self):
        gt = np.array([0] * 8 + [1] * 8).reshape(4, 4)
        cm = confusion_matrix(np.zeros((4, 4), int), gt, 2)
        np.testing.assert_array_equal(cm.p, [[8, 0], [8, 0]])

    def test_confusion_random_against_tally(self):
        rng = np.random.default_rng(3)
        for k in (2, 3, 5):
            pred = rng.integers(0, k, (8, 8))
            gt = rng.integers(0, k, (8, 8))
            cm = confusion_matrix(pred, gt, k)
            assert cm.p.tolist() == oracles.tally_confusion(pred.tolist(), gt.tolist(), k)

    def test_confusion_errors(self):
        with pytest.raises(ValidationError):
            confusion_matrix(np.zeros((2, 2), int), np.zeros((2, 3), int), 2)
        with pytest.raises(ValidationError):
            confusion_matrix(np.full((2, 2), 2), np.zeros((2, 2), int), 2)

    def test_mpla_values(self):
        assert mpla(ConfusionMatrix(np.array([[10, 0], [0, 6]]))) == 1.0
        assert mpla(ConfusionMatrix(np.array([[50, 10], [5, 35]]))) == pytest.approx(
            (50 / 60 + 35 / 40) / 2, abs=1e-12)
        assert mpla(ConfusionMatrix(np.array([[0, 10], [10, 0]]))) == 0.0

    def test_miou_values(self):
        assert miou(ConfusionMatrix(np.diag([3, 4, 5]))) == 1.0
        assert miou(ConfusionMatrix(np.array([[50, 10], [5, 35]]))) == pytest.approx(
            (50 / 65 + 35 / 50) / 2, abs=1e-12)
        assert miou(ConfusionMatrix(np.array([[0, 10], [10, 0]]))) == 0.0

    def test_empty_class_excluded(self):
        cm = ConfusionMatrix(np.array([[5, 0, 0], [0, 0, 0], [1, 0, 3]]))
        assert mpla(cm) == pytest.approx((1 + 0.75) / 2)

    def test_all_empty_raises(self):
        with pytest.raises(ValidationError):
            mpla(ConfusionMatrix(np.zeros((2, 2), int)))
        with pytest.raises(ValidationError):
            miou(ConfusionMatrix(np.zeros((2, 2), int)))

    @settings(max_examples=200)
    @given(st.lists(st.integers(1, 10 ** 6), min_size=1, max_size=6),
           st.integers(0, 2 ** 32 - 1), st.integers(1, 50))
    def test_diagonal_exact_and_scale_invariant(self, diag, seed, factor):
        assert mpla(ConfusionMatrix(np.diag(diag))) == 1.0
        assert miou(ConfusionMatrix(np.diag(diag))) == 1.0
        k = len(diag)
        p = np.random.default_rng(seed).integers(0, 100, (k, k)) + np.diag(diag)
        assert mpla(ConfusionMatrix(p * factor)) == pytest.approx(mpla(ConfusionMatrix(p)), abs=1e-12)
        assert miou(ConfusionMatrix(p * factor)) == pytest.approx(miou(ConfusionMatrix(p)), abs=1e-12)

    def test_mask_iou(self):
        a = np.zeros((4, 4), bool)
        a[0, :] = True  # 4 px
        b = np.zeros((4, 4), bool)
        b[0, 2:] = True
        b[1:4, 0:2] = True  # 2 + 6 = 8 px, overlap 2
        assert mask_iou(a, b) == pytest.approx(0.2)
        assert mask_iou(a, a) == 1.0
        assert mask_iou(a, ~a) == 0.0
        assert mask_iou(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
        with pytest.raises(ValidationError):
            mask_iou(a, np.zeros((3, 3)))

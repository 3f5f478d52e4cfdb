"""Detection and segmentation metrics plus the detector training losses.

Box matching is greedy: detections are visited in descending score order
(stable for ties) and each claims the unmatched ground-truth box with the
highest IoU, provided that IoU reaches the threshold. Average precision is
the exact area under the precision envelope, with operating points taken
only at distinct score thresholds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .frames import BoundingBox, Detection, box_area

log = logging.getLogger(__name__)

BCE_EPS = 1e-7
MAP_THRESHOLDS = {"mAP50": 0.50, "mAP75": 0.75, "mAP95": 0.95}
SWEEP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class LossWeights:
    lambda_iou: float = 1.0
    lambda_cls: float = 1.0
    lambda_obj: float = 1.0

    def __post_init__(self) -> None:
        for name in ("lambda_iou", "lambda_cls", "lambda_obj"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class MatchOutcome:
    tp: int
    fp: int
    fn: int
    # (score, is_tp) for every detection, descending score
    flags: tuple[tuple[float, bool], ...] = ()


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Pixel counts; ``p[i, j]`` = pixels of true class ``i`` predicted as ``j``."""

    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ValidationError(f"confusion matrix must be square, got shape {p.shape}")
        if (p < 0).any():
            raise ValidationError("confusion matrix entries must be non-negative")
        object.__setattr__(self, "p", p)

    @property
    def k_plus_1(self) -> int:
        return int(self.p.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.p.shape == other.p.shape and bool(np.array_equal(self.p, other.p))

    __hash__ = None  # type: ignore[assignment]


# --- boxes -----------------------------------------------------------------

def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = box_area(a) + box_area(b) - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_matrix(a: Sequence[BoundingBox], b: Sequence[BoundingBox]) -> np.ndarray:
    """Pairwise IoU, shape ``(len(a), len(b))``."""
    if not a or not b:
        return np.zeros((len(a), len(b)))
    A = np.array([x.as_tuple() for x in a], dtype=float)
    B = np.array([x.as_tuple() for x in b], dtype=float)
    iw = np.minimum(A[:, None, 2], B[None, :, 2]) - np.maximum(A[:, None, 0], B[None, :, 0])
    ih = np.minimum(A[:, None, 3], B[None, :, 3]) - np.maximum(A[:, None, 1], B[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = (A[:, 2] - A[:, 0]) * (A[:, 3] - A[:, 1])
    area_b = (B[:, 2] - B[:, 0]) * (B[:, 3] - B[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return out


def _aspect_angle(w: float, h: float) -> float:
    if h == 0:
        return math.pi / 2
    return math.atan(w / h)


def ciou_loss(pred: BoundingBox, gt: BoundingBox) -> float:
    """Complete-IoU box regression loss, ``1 - CIoU``."""
    overlap = iou(pred, gt)
    (pcx, pcy), (gcx, gcy) = pred.center, gt.center
    rho2 = (pcx - gcx) ** 2 + (pcy - gcy) ** 2
    cw = max(pred.x_max, gt.x_max) - min(pred.x_min, gt.x_min)
    ch = max(pred.y_max, gt.y_max) - min(pred.y_min, gt.y_min)
    c2 = cw * cw + ch * ch
    distance = rho2 / c2 if c2 > 0 else 0.0

    v = (4.0 / math.pi ** 2) * (
        _aspect_angle(gt.width, gt.height) - _aspect_angle(pred.width, pred.height)
    ) ** 2
    denom = (1.0 - overlap) + v
    alpha = v / denom if denom > 0 else 0.0
    return 1.0 - (overlap - distance - alpha * v)


# --- losses ----------------------------------------------------------------

def bce(p: float, y: int) -> float:
    """Binary cross-entropy of one prediction, with ``p`` clamped to ``[eps, 1 - eps]``."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"probability {p} outside [0, 1]")
    if y not in (0, 1):
        raise ValidationError(f"label must be 0 or 1, got {y}")
    q = min(max(p, BCE_EPS), 1.0 - BCE_EPS)
    return -(y * math.log(q) + (1 - y) * math.log(1.0 - q))


def composite_loss(w: LossWeights, l_iou: float, l_cls: float, l_obj: float) -> float:
    for name, v in (("l_iou", l_iou), ("l_cls", l_cls), ("l_obj", l_obj)):
        if not (math.isfinite(v) and v >= 0):
            raise ValidationError(f"{name} must be finite and >= 0, got {v}")
    return w.lambda_iou * l_iou + w.lambda_cls * l_cls + w.lambda_obj * l_obj


# --- matching and counts ---------------------------------------------------

def _score_order(dets: Sequence[Detection]) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: -dets[i].score)


def match_detections(dets: Sequence[Detection], gts: Sequence[BoundingBox],
                     tau: float) -> MatchOutcome:
    if not 0.0 < tau <= 1.0:
        raise ValidationError(f"IoU threshold must be in (0, 1], got {tau}")
    order = _score_order(dets)
    ious = iou_matrix([dets[i].box for i in order], list(gts))
    claimed = np.zeros(len(gts), dtype=bool)
    flags = []
    tp = 0
    for row, i in enumerate(order):
        hit = False
        if len(gts):
            cand = np.where(claimed, -1.0, ious[row])
            j = int(np.argmax(cand))
            if cand[j] >= tau:
                claimed[j] = True
                hit = True
                tp += 1
        flags.append((dets[i].score, hit))
    return MatchOutcome(tp=tp, fp=len(dets) - tp, fn=len(gts) - tp, flags=tuple(flags))


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def f1_from_pr(precision: float, recall: float) -> float:
    return _safe_div(2.0 * precision * recall, precision + recall)


def prf1(m: MatchOutcome) -> tuple[float, float, float]:
    precision = _safe_div(m.tp, m.tp + m.fp)
    recall = _safe_div(m.tp, m.tp + m.fn)
    return precision, recall, f1_from_pr(precision, recall)


def sum_outcomes(outcomes: Sequence[MatchOutcome]) -> MatchOutcome:
    flags = sorted((f for m in outcomes for f in m.flags), key=lambda f: -f[0])
    return MatchOutcome(
        tp=sum(m.tp for m in outcomes),
        fp=sum(m.fp for m in outcomes),
        fn=sum(m.fn for m in outcomes),
        flags=tuple(flags),
    )


# --- average precision -----------------------------------------------------

def envelope_area(recall: Sequence[float], precision: Sequence[float]) -> float:
    """Area under the monotone precision envelope of ``(recall, precision)`` points.

    Points must be ordered by non-decreasing recall.
    """
    if len(recall) == 0:
        return 0.0
    r = np.concatenate(([0.0], np.asarray(recall, dtype=float)))
    p = np.maximum.accumulate(np.asarray(precision, dtype=float)[::-1])[::-1]
    return float(np.sum((r[1:] - r[:-1]) * p))


def average_precision(dets: Mapping[str, Sequence[Detection]],
                      gts: Mapping[str, Sequence[BoundingBox]], tau: float) -> float:
    """All-point interpolated AP over a set of images.

    Images present in ``dets`` but absent from ``gts`` contribute only
    false positives.
    """
    n_gt = sum(len(v) for v in gts.values())
    if n_gt == 0:
        raise ValidationError("average precision is undefined without ground truth")

    pooled: list[tuple[float, bool]] = []
    for key, image_dets in dets.items():
        pooled.extend(match_detections(image_dets, gts.get(key, ()), tau).flags)
    if not pooled:
        return 0.0
    pooled.sort(key=lambda f: -f[0])

    scores = np.array([s for s, _ in pooled])
    hits = np.array([h for _, h in pooled], dtype=float)
    ctp = np.cumsum(hits)
    cfp = np.cumsum(1.0 - hits)
    # one operating point per distinct score: the last index of each tie run
    ends = np.nonzero(np.append(scores[1:] != scores[:-1], True))[0]
    recall = ctp[ends] / n_gt
    precision = ctp[ends] / (ctp[ends] + cfp[ends])
    return envelope_area(recall, precision)


def map_suite(dets: Mapping[str, Sequence[Detection]], gts: Mapping[str, Sequence[BoundingBox]],
              gt_classes: Mapping[str, Sequence[int]] | None = None,
              sweep: bool = False) -> dict[str, float]:
    """AP at IoU 0.50, 0.75 and 0.95, averaged over ground-truth classes.

    Without ``gt_classes`` every box is one class and detection class ids
    are ignored. ``sweep=True`` adds ``mAP50_95``, the mean over
    0.50:0.05:0.95.
    """
    if gt_classes is None:
        per_class = [(dict(dets), dict(gts))]
    else:
        classes = sorted({c for v in gt_classes.values() for c in v})
        if not classes:
            raise ValidationError("average precision is undefined without ground truth")
        per_class = []
        for c in classes:
            cd = {k: [d for d in v if d.class_id == c] for k, v in dets.items()}
            cg = {k: [b for b, bc in zip(gts[k], gt_classes[k]) if bc == c] for k in gts}
            per_class.append((cd, cg))

    def mean_ap(tau: float) -> float:
        return float(np.mean([average_precision(d, g, tau) for d, g in per_class]))

    out = {name: mean_ap(tau) for name, tau in MAP_THRESHOLDS.items()}
    if sweep:
        out["mAP50_95"] = float(np.mean([mean_ap(t) for t in SWEEP_THRESHOLDS]))
    return out


# --- segmentation ----------------------------------------------------------

def confusion_matrix(pred_labels: np.ndarray, gt_labels: np.ndarray,
                     k_plus_1: int) -> ConfusionMatrix:
    pred = np.asarray(pred_labels)
    gt = np.asarray(gt_labels)
    if pred.shape != gt.shape:
        raise ValidationError(f"label raster shapes differ: {pred.shape} vs {gt.shape}")
    if k_plus_1 < 1:
        raise ValidationError(f"class count must be >= 1, got {k_plus_1}")
    for name, arr in (("pred", pred), ("gt", gt)):
        if arr.size and (arr.min() < 0 or arr.max() >= k_plus_1):
            raise ValidationError(f"{name} labels outside [0, {k_plus_1})")
    flat = gt.astype(np.int64).ravel() * k_plus_1 + pred.astype(np.int64).ravel()
    counts = np.bincount(flat, minlength=k_plus_1 * k_plus_1)
    return ConfusionMatrix(counts.reshape(k_plus_1, k_plus_1))


def _mean_over_included(num: np.ndarray, den: np.ndarray, metric: str) -> float:
    included = den > 0
    if not included.any():
        raise ValidationError(f"{metric} is undefined: every class is empty")
    if not included.all():
        log.info("%s: excluding empty classes %s", metric, np.nonzero(~included)[0].tolist())
    return float(np.mean(num[included] / den[included]))


def mpla(cm: ConfusionMatrix) -> float:
    """Mean per-class pixel accuracy over classes present in the ground truth."""
    p = cm.p.astype(float)
    return _mean_over_included(np.diag(p), p.sum(axis=1), "mPLA")


def miou(cm: ConfusionMatrix) -> float:
    p = cm.p.astype(float)
    diag = np.diag(p)
    return _mean_over_included(diag, p.sum(axis=1) + p.sum(axis=0) - diag, "mIoU")


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValidationError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a & b)) / union

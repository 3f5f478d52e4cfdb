"""Image-condition tagging and per-condition error breakdown."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .frames import BoundingBox, Detection, Frame, box_area
from .metrics import MatchOutcome, average_precision, iou, prf1, sum_outcomes

if TYPE_CHECKING:
    from .annotations import AnnotationRecord

CONDITIONS = ("blurred", "underexposed", "overexposed", "small_object", "occluded")
BUCKETS = CONDITIONS + ("normal",)

LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]])


@dataclass(frozen=True)
class ConditionThresholds:
    blur_laplacian_var: float = 50.0
    dark_mean: float = 40.0
    bright_mean: float = 200.0
    small_object_area_frac: float = 0.02
    occlusion_iou: float = 0.5
    # "any": one small box tags the image; "all": every box must be small
    small_object_rule: str = "any"

    def __post_init__(self) -> None:
        if not self.dark_mean < self.bright_mean:
            raise ValidationError("dark_mean must be below bright_mean")
        if not 0.0 < self.small_object_area_frac < 1.0:
            raise ValidationError("small_object_area_frac must lie in (0, 1)")
        if not 0.0 < self.occlusion_iou <= 1.0:
            raise ValidationError("occlusion_iou must lie in (0, 1]")
        if self.small_object_rule not in ("any", "all"):
            raise ValidationError("small_object_rule must be 'any' or 'all'")


@dataclass(frozen=True)
class ConditionTags:
    blurred: bool = False
    underexposed: bool = False
    overexposed: bool = False
    small_object: bool = False
    occluded: bool = False

    def __post_init__(self) -> None:
        if self.underexposed and self.overexposed:
            raise ValidationError("an image cannot be both underexposed and overexposed")

    @property
    def normal(self) -> bool:
        return not any(getattr(self, c) for c in CONDITIONS)

    def names(self) -> tuple[str, ...]:
        """Set flags in canonical order; ``("normal",)`` when none are set."""
        flags = tuple(c for c in CONDITIONS if getattr(self, c))
        return flags or ("normal",)

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "ConditionTags":
        names = set(names)
        unknown = names - set(BUCKETS)
        if unknown:
            raise ValidationError(f"unknown condition tags {sorted(unknown)}")
        if "normal" in names and len(names) > 1:
            raise ValidationError("'normal' cannot be combined with other tags")
        return cls(**{c: c in names for c in CONDITIONS})


def to_grayscale(f: Frame) -> Frame:
    if f.channels == 1:
        return f
    rgb = f.pixels.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    gray = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return Frame(f.id, f.timestamp_ms, gray, f.source_tag)


def _gray_pixels(f: Frame) -> np.ndarray:
    if f.channels != 1:
        raise ValidationError("expected a single-channel frame")
    return f.pixels


def laplacian_variance(f: Frame) -> float:
    """Population variance of 4-neighbour Laplacian responses over interior pixels."""
    px = _gray_pixels(f).astype(np.int64)
    if px.shape[0] < 3 or px.shape[1] < 3:
        raise ValidationError(f"laplacian needs at least 3x3 pixels, got {px.shape[1]}x{px.shape[0]}")
    resp = (
        px[:-2, 1:-1] + px[2:, 1:-1] + px[1:-1, :-2] + px[1:-1, 2:] - 4 * px[1:-1, 1:-1]
    )
    return float(resp.astype(np.float64).var())


def exposure_class(f: Frame, t: ConditionThresholds = ConditionThresholds()) -> str:
    mean = float(_gray_pixels(f).mean())
    if mean < t.dark_mean:
        return "underexposed"
    if mean > t.bright_mean:
        return "overexposed"
    return "normal"


def small_object_flag(gt_boxes: Sequence[BoundingBox], image_w: int, image_h: int,
                      t: ConditionThresholds = ConditionThresholds()) -> bool:
    area = float(image_w) * float(image_h)
    if area <= 0:
        raise ValidationError("image area must be positive")
    small = [box_area(b) / area < t.small_object_area_frac for b in gt_boxes]
    if not small:
        return False
    return all(small) if t.small_object_rule == "all" else any(small)


def occlusion_flag(gt_boxes: Sequence[BoundingBox],
                   t: ConditionThresholds = ConditionThresholds()) -> bool:
    return any(iou(a, b) > t.occlusion_iou for a, b in itertools.combinations(gt_boxes, 2))


def categorize(f: Frame, rec: "AnnotationRecord",
               t: ConditionThresholds = ConditionThresholds()) -> ConditionTags:
    if (f.width, f.height) != (rec.width, rec.height):
        raise ValidationError(
            f"image {rec.image_id!r} is {f.width}x{f.height}, manifest says {rec.width}x{rec.height}"
        )
    gray = to_grayscale(f)
    exposure = exposure_class(gray, t)
    return ConditionTags(
        blurred=laplacian_variance(gray) < t.blur_laplacian_var,
        underexposed=exposure == "underexposed",
        overexposed=exposure == "overexposed",
        small_object=small_object_flag(rec.gt_boxes, rec.width, rec.height, t),
        occluded=occlusion_flag(rec.gt_boxes, t),
    )


@dataclass(frozen=True)
class BreakdownRow:
    condition: str
    images: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    map50: float | None  # None when the bucket holds no ground truth

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "images": self.images,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "map50": self.map50,
        }


def error_breakdown(
    per_image: Sequence[tuple[ConditionTags, MatchOutcome, Sequence[Detection], Sequence[BoundingBox]]],
) -> list[BreakdownRow]:
    """Accumulate per-image match outcomes into overlapping condition buckets.

    An image counts toward every condition it is tagged with, or toward
    ``normal`` when it has none. Rows follow the fixed bucket order and
    only buckets with at least one image appear.
    """
    members: dict[str, list[int]] = {b: [] for b in BUCKETS}
    for idx, (tags, _, _, _) in enumerate(per_image):
        for name in tags.names():
            members[name].append(idx)

    rows = []
    for bucket in BUCKETS:
        idxs = members[bucket]
        if not idxs:
            continue
        total = sum_outcomes([per_image[i][1] for i in idxs])
        precision, recall, _ = prf1(total)
        dets = {str(i): list(per_image[i][2]) for i in idxs}
        gts = {str(i): list(per_image[i][3]) for i in idxs}
        ap = average_precision(dets, gts, 0.5) if any(gts.values()) else None
        rows.append(BreakdownRow(bucket, len(idxs), total.tp, total.fp, total.fn,
                                 precision, recall, ap))
    return rows

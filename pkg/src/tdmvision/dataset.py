"""Dataset audits (split leakage, ratios, histograms, heatmap) and the
synthetic fixture generator used by the tests and the ``fixture`` command."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import AnnotationRecord, Manifest, save_manifest
from .errors import TdmError, ValidationError
from .frames import BoundingBox
from .pnm import write_pnm

TARGET_FRACTIONS = {"train": 0.80, "val": 0.10, "test": 0.10}
GROUP_SIZE = 4


@dataclass(frozen=True)
class SplitReport:
    counts: dict[str, int]
    fractions: dict[str, float]
    deviations: dict[str, float]
    leaks: tuple[str, ...]
    # group id -> splits it appears in, for leaking groups only
    leak_detail: dict[str, tuple[str, ...]] = field(default_factory=dict)
    tolerance: float = 0.05

    @property
    def passed(self) -> bool:
        return not self.leaks

    @property
    def flagged(self) -> tuple[str, ...]:
        """Splits whose fraction strays from target by more than ``tolerance``."""
        return tuple(s for s, d in self.deviations.items() if abs(d) > self.tolerance)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "leaks": list(self.leaks),
            "leak_detail": {k: list(v) for k, v in self.leak_detail.items()},
            "counts": self.counts,
            "fractions": self.fractions,
            "deviations": self.deviations,
            "flagged": list(self.flagged),
        }


def split_check(train: Manifest, val: Manifest, test: Manifest,
                tolerance: float = 0.05) -> SplitReport:
    splits = {"train": train, "val": val, "test": test}
    counts = {name: len(m.records) for name, m in splits.items()}
    total = sum(counts.values())
    fractions = {name: (c / total if total else 0.0) for name, c in counts.items()}
    deviations = {name: fractions[name] - TARGET_FRACTIONS[name] for name in splits}

    seen: dict[str, set[str]] = {}
    for name, m in splits.items():
        for rec in m.records:
            seen.setdefault(rec.group_id, set()).add(name)
    order = list(splits)
    detail = {
        g: tuple(sorted(s, key=order.index)) for g, s in sorted(seen.items()) if len(s) > 1
    }
    return SplitReport(counts, fractions, deviations, tuple(detail), detail, tolerance)


def instance_histogram(m: Manifest) -> dict[int, int]:
    return dict(sorted(Counter(len(r.gt_boxes) for r in m.records).items()))


def resolution_histogram(m: Manifest) -> dict[tuple[int, int], int]:
    return dict(sorted(Counter((r.width, r.height) for r in m.records).items()))


@dataclass(frozen=True, eq=False)
class Heatmap:
    grid_size: int
    counts: np.ndarray  # (G, G), indexed [row, col]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def spatial_heatmap(m: Manifest, grid_size: int = 32) -> Heatmap:
    """Count normalized box centers on a ``grid_size`` square grid.

    Centers on the far image edge land in the last cell; centers outside
    the image are skipped.
    """
    if grid_size < 1:
        raise ValidationError(f"grid size must be >= 1, got {grid_size}")
    g = grid_size
    counts = np.zeros((g, g), dtype=np.int64)
    for rec in m.records:
        for b in rec.gt_boxes:
            cx, cy = b.center
            if not (0 <= cx <= rec.width and 0 <= cy <= rec.height):
                continue
            col = min(int(math.floor(cx / rec.width * g)), g - 1)
            row = min(int(math.floor(cy / rec.height * g)), g - 1)
            counts[row, col] += 1
    return Heatmap(g, counts)


# --- synthetic fixtures ----------------------------------------------------

FIXTURE_KINDS = ("blurred", "underexposed", "overexposed", "small_object", "occluded")
_PERIODS = ("day", "dusk_dawn", "night")


def group_split_sizes(n_groups: int) -> tuple[int, int, int]:
    """Whole-group split sizes nearest to 80/10/10 (halves round up)."""
    n_train = int(math.floor(0.8 * n_groups + 0.5))
    n_val = min(int(math.floor(0.1 * n_groups + 0.5)), n_groups - n_train)
    return n_train, n_val, n_groups - n_train - n_val


def _place_box(rng: np.random.Generator, w: int, h: int, frac: float,
               avoid: list[BoundingBox]) -> BoundingBox:
    """Integer box covering about ``frac`` of the image, not touching ``avoid``."""
    side_w = max(1, int(round(math.sqrt(frac) * w)))
    side_h = max(1, int(round(frac * w * h / side_w)))
    side_h = min(side_h, h)
    for _ in range(200):
        x0 = int(rng.integers(0, w - side_w + 1))
        y0 = int(rng.integers(0, h - side_h + 1))
        box = BoundingBox(x0, y0, x0 + side_w, y0 + side_h)
        if all(box.x_max <= a.x_min or a.x_max <= box.x_min or
               box.y_max <= a.y_min or a.y_max <= box.y_min for a in avoid):
            return box
    return box


def _render(rng: np.random.Generator, kind: str, w: int, h: int
            ) -> tuple[np.ndarray, list[BoundingBox]]:
    boxes: list[BoundingBox] = []
    if kind == "small_object":
        boxes.append(_place_box(rng, w, h, 0.01, boxes))
        boxes.append(_place_box(rng, w, h, 0.08, boxes))
    elif kind == "occluded":
        a = _place_box(rng, w, h, 0.10, boxes)
        shift = max(1, int(a.width // 10))
        x0 = min(a.x_min + shift, w - a.width)
        boxes += [a, BoundingBox(x0, a.y_min, x0 + a.width, a.y_max)]
    else:
        for _ in range(int(rng.integers(1, 3))):
            boxes.append(_place_box(rng, w, h, float(rng.uniform(0.05, 0.12)), boxes))

    if kind == "blurred":
        return np.full((h, w), 128, dtype=np.uint8), boxes
    lo, hi, fg = {"underexposed": (20, 40, 38), "overexposed": (212, 250, 215)}.get(
        kind, (60, 180, 220)
    )
    img = rng.integers(lo, hi + 1, size=(h, w), dtype=np.uint8)
    for b in boxes:
        x0, y0, x1, y1 = (int(v) for v in b.as_tuple())
        img[y0:y1, x0:x1] = fg
    return img, boxes


def synthetic_fixture(seed: int, n_images: int, w: int, h: int, out_dir: str | Path,
                      condition_fraction: float = 0.1
                      ) -> tuple[Manifest, Manifest, Manifest]:
    """Write a deterministic PGM corpus plus ``train/val/test.json`` manifests.

    Images come in groups of four consecutive frames sharing a group id;
    whole groups are assigned to splits. Each condition kind covers
    ``condition_fraction`` of the images (at least one), the rest are
    normal.
    """
    if n_images < 3:
        raise ValidationError(f"n_images must be >= 3, got {n_images}")
    if w < 16 or h < 16:
        raise ValidationError(f"fixture images must be at least 16x16, got {w}x{h}")
    if not 0.0 <= condition_fraction * len(FIXTURE_KINDS) <= 1.0:
        raise ValidationError("condition fractions must sum to at most 1")
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise TdmError(f"cannot create fixture directory {out}: {exc}") from exc

    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    per_kind = max(1, int(round(condition_fraction * n_images)))
    kinds = ["normal"] * n_images
    slots = rng.permutation(n_images)
    for k, kind in enumerate(FIXTURE_KINDS):
        for idx in slots[k * per_kind:(k + 1) * per_kind]:
            kinds[int(idx)] = kind

    n_groups = math.ceil(n_images / GROUP_SIZE)
    group_order = rng.permutation(n_groups)
    n_train, n_val, _ = group_split_sizes(n_groups)
    split_of_group = {}
    for pos, g in enumerate(group_order):
        split_of_group[int(g)] = "train" if pos < n_train else "val" if pos < n_train + n_val else "test"

    records: dict[str, list[AnnotationRecord]] = {"train": [], "val": [], "test": []}
    for i in range(n_images):
        img, boxes = _render(rng, kinds[i], w, h)
        name = f"img_{i:05d}.pgm"
        try:
            write_pnm(out / "images" / name, img)
        except OSError as exc:
            raise TdmError(f"cannot write {out / 'images' / name}: {exc}") from exc
        group = i // GROUP_SIZE
        period = "night" if kinds[i] == "underexposed" else _PERIODS[group % 2]
        records[split_of_group[group]].append(AnnotationRecord(
            image_id=f"img_{i:05d}",
            file=f"images/{name}",
            width=w,
            height=h,
            group_id=f"video_{group:04d}",
            gt_boxes=tuple(boxes),
            capture_period=period,
        ))

    manifests = tuple(Manifest(split, tuple(records[split])) for split in ("train", "val", "test"))
    for m in manifests:
        try:
            save_manifest(m, out / f"{m.split}.json")
        except OSError as exc:
            raise TdmError(f"cannot write manifest to {out}: {exc}") from exc
    return manifests  # type: ignore[return-value]

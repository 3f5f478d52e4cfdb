"""Raster and geometry value types used by every stage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def _frozen_array(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in continuous corner coordinates.

    Rasterization treats the right and bottom edges as exclusive: pixel
    column ``j`` belongs to the box when its center ``j + 0.5`` lies in
    ``[x_min, x_max)``.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in (self.x_min, self.y_min, self.x_max, self.y_max))
        for name, v in zip(("x_min", "y_min", "x_max", "y_max"), vals):
            object.__setattr__(self, name, v)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite box coordinates {vals}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValidationError(f"box corners out of order: {vals}")

    @classmethod
    def from_seq(cls, seq) -> "BoundingBox":
        if len(seq) != 4:
            raise ValidationError(f"box needs 4 coordinates, got {len(seq)}")
        return cls(*(float(v) for v in seq))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x_min, self.y_min, self.x_max, self.y_max

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    class_id: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "score", float(self.score))
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"detection score {self.score} outside [0, 1]")
        if self.class_id < 0:
            raise ValidationError(f"negative class_id {self.class_id}")


@dataclass(frozen=True, eq=False)
class Frame:
    """One image travelling through the pipeline.

    ``pixels`` is a read-only uint8 array shaped ``(height, width)`` for
    grayscale or ``(height, width, 3)`` for RGB.
    """

    id: int
    timestamp_ms: float
    pixels: np.ndarray
    source_tag: str = ""

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValidationError(f"frame id must be non-negative, got {self.id}")
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValidationError(f"frame pixels must be uint8, got {px.dtype}")
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[:, :, 0]
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ValidationError(f"unsupported frame shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError(f"frame dimensions must be >= 1, got {px.shape[:2]}")
        object.__setattr__(self, "pixels", _frozen_array(px))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.id == other.id
            and self.timestamp_ms == other.timestamp_ms
            and self.source_tag == other.source_tag
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class MaskRaster:
    """Binary mask covering the rectangle at ``(offset_x, offset_y)``."""

    offset_x: int
    offset_y: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ValidationError(f"mask bits must be a non-empty 2-D array, got {bits.shape}")
        object.__setattr__(self, "bits", _frozen_array(bits))

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def rect(self) -> tuple[int, int, int, int]:
        """Pixel rectangle ``(x0, y0, x1, y1)`` with exclusive far edges."""
        return self.offset_x, self.offset_y, self.offset_x + self.width, self.offset_y + self.height

    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MaskRaster):
            return NotImplemented
        return (
            self.offset_x == other.offset_x
            and self.offset_y == other.offset_y
            and self.bits.shape == other.bits.shape
            and bool(np.array_equal(self.bits, other.bits))
        )

    __hash__ = None  # type: ignore[assignment]


def clamp_box(b: BoundingBox, w: float, h: float) -> BoundingBox:
    """Clip ``b`` to ``[0, w] x [0, h]``.

    A box entirely outside the image collapses onto the nearest border
    with zero area.
    """
    if w < 1 or h < 1:
        raise ValidationError(f"image dimensions must be >= 1, got {w}x{h}")

    def clip(v: float, hi: float) -> float:
        return min(max(v, 0.0), float(hi))

    return BoundingBox(clip(b.x_min, w), clip(b.y_min, h), clip(b.x_max, w), clip(b.y_max, h))


def box_area(b: BoundingBox) -> float:
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def pixel_rect(b: BoundingBox, w: int, h: int) -> tuple[int, int, int, int]:
    """Pixel rectangle ``(x0, y0, x1, y1)`` covered by ``b`` inside a ``w x h`` frame.

    Pixels whose centers fall inside the clamped box are included. The
    result may be empty (``x0 == x1`` or ``y0 == y1``).
    """
    c = clamp_box(b, w, h)
    x0 = int(math.ceil(c.x_min - 0.5))
    x1 = int(math.ceil(c.x_max - 0.5))
    y0 = int(math.ceil(c.y_min - 0.5))
    y1 = int(math.ceil(c.y_max - 0.5))
    x0, x1 = min(max(x0, 0), w), min(max(x1, 0), w)
    y0, y1 = min(max(y0, 0), h), min(max(y1, 0), h)
    return x0, y0, max(x0, x1), max(y0, y1)


def roi_rect(b: BoundingBox, w: int, h: int) -> tuple[int, int, int, int]:
    """Like :func:`pixel_rect` but never empty.

    Degenerate boxes widen to one pixel, kept inside the frame, so every
    prompt has a valid mask rectangle.
    """
    x0, y0, x1, y1 = pixel_rect(b, w, h)
    if x1 == x0:
        x0 = min(x0, w - 1)
        x1 = x0 + 1
    if y1 == y0:
        y0 = min(y0, h - 1)
        y1 = y0 + 1
    return x0, y0, x1, y1


def box_mask(b: BoundingBox, w: int, h: int) -> np.ndarray:
    """Full-frame boolean raster of the pixels covered by ``b``."""
    out = np.zeros((h, w), dtype=bool)
    x0, y0, x1, y1 = pixel_rect(b, w, h)
    out[y0:y1, x0:x1] = True
    return out


def mask_to_global(m: MaskRaster, frame_w: int, frame_h: int) -> np.ndarray:
    """Place ``m`` into a ``frame_h x frame_w`` boolean raster, dropping out-of-frame bits."""
    x0, y0, x1, y1 = m.rect
    cx0, cy0 = max(x0, 0), max(y0, 0)
    cx1, cy1 = min(x1, frame_w), min(y1, frame_h)
    if cx0 >= cx1 or cy0 >= cy1:
        raise ValidationError(
            f"mask rectangle {m.rect} lies entirely outside the {frame_w}x{frame_h} frame"
        )
    out = np.zeros((frame_h, frame_w), dtype=bool)
    out[cy0:cy1, cx0:cx1] = m.bits[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
    return out


def crop_to_mask(raster: np.ndarray) -> MaskRaster | None:
    """Smallest MaskRaster holding every set pixel of ``raster``; None if empty."""
    ys, xs = np.nonzero(raster)
    if ys.size == 0:
        return None
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    return MaskRaster(x0, y0, raster[y0:y1, x0:x1].copy())

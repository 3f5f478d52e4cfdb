"""Drawing detections and masks over a frame."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..frames import Frame, mask_to_global, pixel_rect
from .model import AnnotatedFrame

PALETTE = np.array(
    [
        (230, 25, 75),
        (60, 180, 75),
        (255, 225, 25),
        (0, 130, 200),
        (245, 130, 48),
        (145, 30, 180),
        (70, 240, 240),
        (240, 50, 230),
    ],
    dtype=np.uint16,
)


def color_for(index: int) -> np.ndarray:
    return PALETTE[index % len(PALETTE)]


def render_overlay(af: AnnotatedFrame, f: Frame) -> np.ndarray:
    """RGB copy of ``f`` with masks blended at 50% and 1-px box outlines on top."""
    if af.frame_id != f.id:
        raise ValidationError(f"annotated frame {af.frame_id} does not match frame {f.id}")
    w, h = f.width, f.height
    rgb = f.pixels if f.channels == 3 else np.repeat(f.pixels[:, :, None], 3, axis=2)
    out = rgb.astype(np.uint16)

    for m, owner in zip(af.masks, af.mask_owner):
        x0, y0, x1, y1 = m.rect
        if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
            raise ValidationError(f"mask rectangle {m.rect} exceeds the {w}x{h} frame")
        sel = mask_to_global(m, w, h)
        # half-up rounding of (pixel + color) / 2
        out[sel] = (out[sel] + color_for(owner) + 1) // 2

    for i, d in enumerate(af.detections):
        x0, y0, x1, y1 = pixel_rect(d.box, w, h)
        if x1 <= x0 or y1 <= y0:
            continue
        c = color_for(i)
        out[y0, x0:x1] = c
        out[y1 - 1, x0:x1] = c
        out[y0:y1, x0] = c
        out[y0:y1, x1 - 1] = c
    return out.astype(np.uint8)

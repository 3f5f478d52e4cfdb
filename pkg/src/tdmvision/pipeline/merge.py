"""Combining detector and segmenter outputs into annotated frames."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..frames import Detection, Frame, MaskRaster, crop_to_mask, mask_to_global, roi_rect
from .model import AnnotatedFrame


def _clip_to_rect(m: MaskRaster, rect: tuple[int, int, int, int]) -> MaskRaster:
    x0, y0, x1, y1 = rect
    mx0, my0, mx1, my1 = m.rect
    cx0, cy0, cx1, cy1 = max(x0, mx0), max(y0, my0), min(x1, mx1), min(y1, my1)
    if cx0 >= cx1 or cy0 >= cy1:
        # no overlap with the ROI: keep an empty one-pixel mask at the ROI origin
        return MaskRaster(x0, y0, np.zeros((1, 1), dtype=bool))
    bits = m.bits[cy0 - my0:cy1 - my0, cx0 - mx0:cx1 - mx0]
    if (cx0, cy0, cx1, cy1) == m.rect:
        return m
    return MaskRaster(cx0, cy0, bits.copy())


def merge(f: Frame, dets: Sequence[Detection], masks: Sequence[MaskRaster],
          mode: str = "pipelined") -> AnnotatedFrame:
    """Pair masks with detections.

    ``pipelined``: ``masks[i]`` answers the prompt ``dets[i]`` and is
    clipped to that box's ROI. ``parallel_independent``: each full-frame
    mask goes to the detection it overlaps most (lowest index on ties),
    pixels outside every detection box are cleared, masks with no overlap
    are dropped, and masks sharing an owner are OR-ed together.
    """
    dets = tuple(dets)
    w, h = f.width, f.height
    mode = mode.replace("-", "_")
    if mode in ("pipelined", "sequential"):
        if len(masks) != len(dets):
            raise ValidationError(
                f"frame {f.id}: {len(masks)} masks for {len(dets)} detections"
            )
        clipped = tuple(_clip_to_rect(m, roi_rect(d.box, w, h)) for d, m in zip(dets, masks))
        return AnnotatedFrame(f.id, dets, clipped, tuple(range(len(dets))))

    if mode != "parallel_independent":
        raise ValidationError(f"unknown merge mode {mode!r}")
    if not dets:
        return AnnotatedFrame(f.id, dets, (), ())

    box_rasters = np.zeros((len(dets), h, w), dtype=bool)
    for i, d in enumerate(dets):
        x0, y0, x1, y1 = roi_rect(d.box, w, h)
        box_rasters[i, y0:y1, x0:x1] = True
    covered = box_rasters.any(axis=0)

    owned: dict[int, np.ndarray] = {}
    for m in masks:
        g = mask_to_global(m, w, h)
        overlaps = (box_rasters & g).sum(axis=(1, 2))
        best = int(np.argmax(overlaps))
        if overlaps[best] == 0:
            continue
        kept = g & covered
        owned[best] = owned[best] | kept if best in owned else kept

    out_masks, owners = [], []
    for i in sorted(owned):
        cropped = crop_to_mask(owned[i])
        if cropped is not None:
            out_masks.append(cropped)
            owners.append(i)
    return AnnotatedFrame(f.id, dets, tuple(out_masks), tuple(owners))

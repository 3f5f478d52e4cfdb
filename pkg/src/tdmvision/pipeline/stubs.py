"""Deterministic stand-ins for the detector and the box-prompted segmenter.

Outputs depend only on ``(seed, frame id, frame size)``; the configured
latency is realized with a sleep that tops up to the exact deadline.
"""

from __future__ import annotations

import time
from typing import Protocol, Sequence

import numpy as np

from ..frames import BoundingBox, Detection, Frame, MaskRaster, roi_rect

_DET_SALT = 0xDE7
_SEG_SALT = 0x5E6
_JITTER_SALT = 0x717


class Detector(Protocol):
    def detect(self, frame: Frame) -> list[Detection]: ...


class Segmenter(Protocol):
    def segment(self, frame: Frame, boxes: Sequence[BoundingBox]) -> list[MaskRaster]: ...

    def segment_full(self, frame: Frame) -> list[MaskRaster]: ...


def _rng(seed: int, frame_id: int, salt: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, frame_id, salt])


def hold(ms: float) -> None:
    """Block for ``ms`` milliseconds, staying within about 1 ms of the target."""
    if ms <= 0:
        return
    deadline = time.perf_counter() + ms / 1000.0
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return
        # coarse sleep, then yield-spin the last millisecond
        time.sleep(remaining - 0.001 if remaining > 0.002 else 0)


def _delay(seed: int, frame_id: int, salt: int, latency_ms: float, jitter_ms: float) -> float:
    if jitter_ms <= 0:
        return latency_ms
    offset = _rng(seed, frame_id, salt ^ _JITTER_SALT).uniform(-jitter_ms, jitter_ms)
    return max(0.0, latency_ms + offset)


def stub_boxes(seed: int, frame_id: int, w: int, h: int) -> list[tuple[BoundingBox, float]]:
    """One to three integer-cornered boxes with scores in (0, 1]."""
    rng = _rng(seed, frame_id, _DET_SALT)
    out = []
    for _ in range(int(rng.integers(1, 4))):
        bw = int(rng.integers(1, max(2, w // 2 + 1)))
        bh = int(rng.integers(1, max(2, h // 2 + 1)))
        x0 = int(rng.integers(0, w - bw + 1))
        y0 = int(rng.integers(0, h - bh + 1))
        score = 1.0 - float(rng.random())  # (0, 1]
        out.append((BoundingBox(x0, y0, x0 + bw, y0 + bh), round(score, 6)))
    return out


class StubDetector:
    def __init__(self, seed: int = 0, latency_ms: float = 0.0, jitter_ms: float = 0.0) -> None:
        self.seed = seed
        self.latency_ms = latency_ms
        self.jitter_ms = jitter_ms

    def detect(self, frame: Frame) -> list[Detection]:
        hold(_delay(self.seed, frame.id, _DET_SALT, self.latency_ms, self.jitter_ms))
        return [Detection(box, score, 0)
                for box, score in stub_boxes(self.seed, frame.id, frame.width, frame.height)]


def _ellipse(w: int, h: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ry, rx = max(h / 2.0, 0.5), max(w / 2.0, 0.5)
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


class StubSegmenter:
    def __init__(self, seed: int = 0, latency_ms: float = 0.0, jitter_ms: float = 0.0) -> None:
        self.seed = seed
        self.latency_ms = latency_ms
        self.jitter_ms = jitter_ms

    def segment(self, frame: Frame, boxes: Sequence[BoundingBox]) -> list[MaskRaster]:
        """One filled ROI-local mask per prompt box; the delay is paid once per call."""
        hold(_delay(self.seed, frame.id, _SEG_SALT, self.latency_ms, self.jitter_ms))
        masks = []
        for box in boxes:
            x0, y0, x1, y1 = roi_rect(box, frame.width, frame.height)
            masks.append(MaskRaster(x0, y0, np.ones((y1 - y0, x1 - x0), dtype=bool)))
        return masks

    def segment_full(self, frame: Frame) -> list[MaskRaster]:
        """Promptless masks: ellipses inside the objects the stub detector reports, plus
        one spurious blob every few frames."""
        hold(_delay(self.seed, frame.id, _SEG_SALT, self.latency_ms, self.jitter_ms))
        w, h = frame.width, frame.height
        masks = []
        for box, _ in stub_boxes(self.seed, frame.id, w, h):
            x0, y0, x1, y1 = roi_rect(box, w, h)
            bits = np.zeros((h, w), dtype=bool)
            bits[y0:y1, x0:x1] = _ellipse(x1 - x0, y1 - y0)
            masks.append(MaskRaster(0, 0, bits))
        rng = _rng(self.seed, frame.id, _SEG_SALT)
        if rng.random() < 0.5:
            bw, bh = max(1, w // 8), max(1, h // 8)
            x0 = int(rng.integers(0, w - bw + 1))
            y0 = int(rng.integers(0, h - bh + 1))
            bits = np.zeros((h, w), dtype=bool)
            bits[y0:y0 + bh, x0:x0 + bw] = True
            masks.append(MaskRaster(0, 0, bits))
        return masks

"""Configuration, per-frame results and run reports for the pipeline."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..frames import Detection, MaskRaster

MODES = ("sequential", "pipelined", "parallel_independent")


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "pipelined"
    queue_capacity: int = 4
    warmup_frames: int = 10
    det_latency_ms: float = 0.0
    seg_latency_ms: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0
    watchdog_s: float = 30.0

    def __post_init__(self) -> None:
        mode = self.mode.replace("-", "_")
        if mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        object.__setattr__(self, "mode", mode)
        if self.queue_capacity < 1:
            raise ValidationError(f"queue_capacity must be >= 1, got {self.queue_capacity}")
        if self.warmup_frames < 0:
            raise ValidationError("warmup_frames must be >= 0")
        if self.det_latency_ms < 0 or self.seg_latency_ms < 0 or self.jitter_ms < 0:
            raise ValidationError("latencies and jitter must be >= 0")
        if (self.det_latency_ms or self.seg_latency_ms) and \
                self.jitter_ms > min(self.det_latency_ms, self.seg_latency_ms):
            raise ValidationError("jitter_ms must not exceed the smaller stage latency")
        if self.watchdog_s <= 0:
            raise ValidationError("watchdog_s must be positive")


@dataclass
class StageTimings:
    """Monotone-clock timestamps (ms since run start) for one frame."""

    frame_id: int
    ingest_ts: float = 0.0
    det_start: float = 0.0
    det_end: float = 0.0
    seg_start: float = 0.0
    seg_end: float = 0.0
    post_end: float = 0.0

    @property
    def det_ms(self) -> float:
        return self.det_end - self.det_start

    @property
    def seg_ms(self) -> float:
        return self.seg_end - self.seg_start

    @property
    def e2e_ms(self) -> float:
        return self.post_end - self.ingest_ts


@dataclass(frozen=True, eq=False)
class AnnotatedFrame:
    """Merged stage outputs for one frame.

    ``mask_owner[i]`` is the index into ``detections`` that ``masks[i]``
    belongs to.
    """

    frame_id: int
    detections: tuple[Detection, ...]
    masks: tuple[MaskRaster, ...]
    mask_owner: tuple[int, ...]
    overlay: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if len(self.masks) > len(self.detections):
            raise ValidationError("more masks than detections")
        if len(self.mask_owner) != len(self.masks):
            raise ValidationError("mask_owner must align with masks")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnnotatedFrame):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.detections == other.detections
            and self.masks == other.masks
            and self.mask_owner == other.mask_owner
        )

    __hash__ = None  # type: ignore[assignment]

    def summary(self) -> dict:
        """Deterministic, JSON-friendly digest of the frame's content."""
        return {
            "frame_id": self.frame_id,
            "detections": [
                {"box": list(d.box.as_tuple()), "score": d.score, "class_id": d.class_id}
                for d in self.detections
            ],
            "masks": [
                {"owner": o, "offset": [m.offset_x, m.offset_y], "size": [m.width, m.height],
                 "pixels": m.count()}
                for m, o in zip(self.masks, self.mask_owner)
            ],
        }


REPORT_KEYS = (
    "frames_processed", "wall_ms", "fps", "det_ms_mean", "det_ms_p95", "seg_ms_mean",
    "seg_ms_p95", "e2e_ms_mean", "e2e_ms_p95", "ordering_violations", "max_queue_depth",
)


@dataclass
class RunReport:
    frames_processed: int = 0
    wall_ms: float = 0.0
    fps: float = 0.0
    det_ms_mean: float = 0.0
    det_ms_median: float = 0.0
    det_ms_p95: float = 0.0
    seg_ms_mean: float = 0.0
    seg_ms_median: float = 0.0
    seg_ms_p95: float = 0.0
    e2e_ms_mean: float = 0.0
    e2e_ms_p95: float = 0.0
    ordering_violations: int = 0
    queue_depths: dict[str, int] = field(default_factory=dict)
    mode: str = "sequential"
    timings: list[StageTimings] = field(default_factory=list, repr=False)

    @property
    def max_queue_depth(self) -> int:
        return max(self.queue_depths.values(), default=0)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_KEYS)
        writer.writerow([getattr(self, k) for k in REPORT_KEYS])
        return buf.getvalue()


def _stats(values: Sequence[float]) -> tuple[float, float, float]:
    if not values:
        return 0.0, 0.0, 0.0
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(np.median(arr)), float(np.percentile(arr, 95))


def build_report(timings: Sequence[StageTimings], wall_ms: float, warmup: int,
                 ordering_violations: int, queue_depths: dict[str, int], mode: str) -> RunReport:
    """Aggregate per-frame timings.

    FPS counts frames completed after the warmup window, measured from the
    completion of the last warmup frame. With too few frames to leave a
    steady-state window, the whole run is used.
    """
    timings = sorted(timings, key=lambda t: t.frame_id)
    n = len(timings)
    done = sorted(t.post_end for t in timings)
    fps = 0.0
    if n > warmup and warmup > 0:
        span = done[-1] - done[warmup - 1]
        if span > 0:
            fps = (n - warmup) * 1000.0 / span
    if fps == 0.0 and n > 0:
        span = max(done[-1] - min(t.ingest_ts for t in timings), 1e-6)
        fps = n * 1000.0 / span

    det_mean, det_med, det_p95 = _stats([t.det_ms for t in timings])
    seg_mean, seg_med, seg_p95 = _stats([t.seg_ms for t in timings])
    e2e_mean, _, e2e_p95 = _stats([t.e2e_ms for t in timings])
    return RunReport(
        frames_processed=n,
        wall_ms=wall_ms,
        fps=fps,
        det_ms_mean=det_mean,
        det_ms_median=det_med,
        det_ms_p95=det_p95,
        seg_ms_mean=seg_mean,
        seg_ms_median=seg_med,
        seg_ms_p95=seg_p95,
        e2e_ms_mean=e2e_mean,
        e2e_ms_p95=e2e_p95,
        ordering_violations=ordering_violations,
        queue_depths=dict(queue_depths),
        mode=mode,
        timings=list(timings),
    )

"""Sequential baseline and the four-worker threaded pipeline.

Threaded topology (every arrow is a bounded FIFO queue)::

    pipelined:             ingest -> detect -> segment(boxes) -> post
    parallel_independent:  ingest -> detect ---------------\\
                                  \\-> segment_full -------> post

A full queue blocks its producer and an empty one blocks its consumer.
End of stream is a sentinel forwarded by each worker. The first worker
failure cancels the rest, and a watchdog turns a stall into an error.
"""

from __future__ import annotations

import dataclasses
import logging
import queue
import threading
import time
from typing import Iterable

from ..errors import PipelineError, ValidationError
from ..frames import Frame, clamp_box
from .merge import merge
from .model import AnnotatedFrame, PipelineConfig, RunReport, StageTimings, build_report
from .overlay import render_overlay
from .stubs import Detector, Segmenter, StubDetector, StubSegmenter

log = logging.getLogger(__name__)

_EOF = object()
_POLL_S = 0.05
_GRACE_S = 2.0


def make_stubs(cfg: PipelineConfig) -> tuple[StubDetector, StubSegmenter]:
    return (StubDetector(cfg.seed, cfg.det_latency_ms, cfg.jitter_ms),
            StubSegmenter(cfg.seed, cfg.seg_latency_ms, cfg.jitter_ms))


def _prompts(frame: Frame, dets):
    return [clamp_box(d.box, frame.width, frame.height) for d in dets]


def _check_order(frame: Frame, last_id: int | None) -> None:
    if last_id is not None and frame.id <= last_id:
        raise ValidationError(f"frame ids must increase: got {frame.id} after {last_id}")


def run_sequential(cfg: PipelineConfig, source: Iterable[Frame], detector: Detector,
                   segmenter: Segmenter, overlays: bool = False
                   ) -> tuple[list[AnnotatedFrame], RunReport]:
    """Detect, segment and merge each frame in turn on the calling thread.

    A config in ``parallel_independent`` mode selects promptless
    segmentation, so its output can be compared with the threaded run.
    """
    promptless = cfg.mode == "parallel_independent"
    merge_mode = "parallel_independent" if promptless else "pipelined"
    t0 = time.perf_counter()

    def now() -> float:
        return (time.perf_counter() - t0) * 1000.0

    outputs: list[AnnotatedFrame] = []
    timings: list[StageTimings] = []
    last_id: int | None = None
    it = iter(source)
    while True:
        stage, fid = "ingest", (last_id + 1 if last_id is not None else 0)
        try:
            try:
                frame = next(it)
            except StopIteration:
                break
            fid = frame.id
            _check_order(frame, last_id)
            last_id = frame.id
            t = StageTimings(frame.id, ingest_ts=now())

            stage = "detect"
            t.det_start = now()
            dets = detector.detect(frame)
            t.det_end = now()

            stage = "segment"
            t.seg_start = now()
            masks = segmenter.segment_full(frame) if promptless else \
                segmenter.segment(frame, _prompts(frame, dets))
            t.seg_end = now()

            stage = "post"
            af = merge(frame, dets, masks, merge_mode)
            if overlays:
                af = dataclasses.replace(af, overlay=render_overlay(af, frame))
            t.post_end = now()
        except Exception as exc:
            err = PipelineError(stage, fid, exc)
            err.partial = outputs
            raise err from exc
        outputs.append(af)
        timings.append(t)

    report = build_report(timings, now(), cfg.warmup_frames, 0, {}, "sequential")
    return outputs, report


class _Cancelled(Exception):
    pass


class _Run:
    """Shared cancellation, failure and progress state for one threaded run."""

    def __init__(self, cfg: PipelineConfig) -> None:
        self.cfg = cfg
        self.t0 = time.perf_counter()
        self.cancel = threading.Event()
        self.error: PipelineError | None = None
        self._lock = threading.Lock()
        self.last_progress = time.monotonic()
        self.depths: dict[str, int] = {}

    def now(self) -> float:
        return (time.perf_counter() - self.t0) * 1000.0

    def fail(self, stage: str, frame_id: int | None, exc: BaseException | None,
             message: str | None = None) -> None:
        with self._lock:
            if self.error is None:
                self.error = PipelineError(stage, frame_id, exc, message)
        self.cancel.set()

    def queue(self, name: str) -> "queue.Queue":
        self.depths[name] = 0
        q: queue.Queue = queue.Queue(maxsize=self.cfg.queue_capacity)
        q.name = name  # type: ignore[attr-defined]
        return q

    def put(self, q: queue.Queue, item: object) -> None:
        while not self.cancel.is_set():
            try:
                q.put(item, timeout=_POLL_S)
            except queue.Full:
                continue
            # single producer per queue, so this owner-only update is race free
            name = q.name  # type: ignore[attr-defined]
            self.depths[name] = max(self.depths[name], q.qsize())
            self.last_progress = time.monotonic()
            return
        raise _Cancelled

    def get(self, q: queue.Queue) -> object:
        while not self.cancel.is_set():
            try:
                item = q.get(timeout=_POLL_S)
            except queue.Empty:
                continue
            self.last_progress = time.monotonic()
            return item
        raise _Cancelled


def run_threaded(cfg: PipelineConfig, source: Iterable[Frame], detector: Detector,
                 segmenter: Segmenter, overlays: bool = False
                 ) -> tuple[list[AnnotatedFrame], RunReport]:
    if cfg.mode == "sequential":
        raise ValidationError("run_threaded needs mode 'pipelined' or 'parallel_independent'")
    run = _Run(cfg)
    parallel = cfg.mode == "parallel_independent"
    outputs: list[AnnotatedFrame] = []
    timings: list[StageTimings] = []
    violations = [0]

    q_frames = run.queue("frames")
    q_seg_in = run.queue("seg_frames") if parallel else None
    q_dets = run.queue("detections")
    q_masks = run.queue("masks")

    def ingest() -> None:
        last_id: int | None = None
        it = iter(source)
        while True:
            fid = last_id + 1 if last_id is not None else 0
            try:
                frame = next(it)
                fid = frame.id
                _check_order(frame, last_id)
            except StopIteration:
                break
            except Exception as exc:
                run.fail("ingest", fid, exc)
                return
            last_id = frame.id
            item = (frame, run.now())
            run.put(q_frames, item)
            if parallel:
                run.put(q_seg_in, item)
        run.put(q_frames, _EOF)
        if parallel:
            run.put(q_seg_in, _EOF)

    def detect() -> None:
        while True:
            item = run.get(q_frames)
            if item is _EOF:
                run.put(q_dets, _EOF)
                return
            frame, ingest_ts = item
            start = run.now()
            try:
                dets = detector.detect(frame)
            except Exception as exc:
                run.fail("detect", frame.id, exc)
                return
            run.put(q_dets, (frame, ingest_ts, start, run.now(), dets))

    def segment() -> None:
        src = q_seg_in if parallel else q_dets
        while True:
            item = run.get(src)
            if item is _EOF:
                run.put(q_masks, _EOF)
                return
            frame = item[0]
            start = run.now()
            try:
                if parallel:
                    masks = segmenter.segment_full(frame)
                else:
                    masks = segmenter.segment(frame, _prompts(frame, item[4]))
            except Exception as exc:
                run.fail("segment", frame.id, exc)
                return
            run.put(q_masks, (item, start, run.now(), masks))

    def post() -> None:
        last_id = -1
        while True:
            seg_item = run.get(q_masks)
            det_item = run.get(q_dets) if parallel else None
            if seg_item is _EOF or det_item is _EOF:
                if seg_item is not det_item and parallel:
                    run.fail("post", None, None, "branches ended at different frames")
                return
            head, seg_start, seg_end, masks = seg_item
            if parallel:
                frame, ingest_ts, det_start, det_end, dets = det_item
                if head[0].id != frame.id:
                    run.fail("post", frame.id, None,
                             f"branch mismatch: segmentation delivered frame {head[0].id}")
                    return
            else:
                frame, ingest_ts, det_start, det_end, dets = head
            try:
                af = merge(frame, dets, masks, cfg.mode)
                if overlays:
                    af = dataclasses.replace(af, overlay=render_overlay(af, frame))
            except Exception as exc:
                run.fail("post", frame.id, exc)
                return
            if frame.id <= last_id:
                violations[0] += 1
            last_id = max(last_id, frame.id)
            outputs.append(af)
            timings.append(StageTimings(frame.id, ingest_ts, det_start, det_end,
                                        seg_start, seg_end, run.now()))

    def guarded(name: str, fn) -> None:
        try:
            fn()
        except _Cancelled:
            pass
        except Exception as exc:  # a bug outside the stage calls
            run.fail(name, None, exc)

    workers = [
        threading.Thread(target=guarded, args=(name, fn), name=f"tdm-{name}", daemon=True)
        for name, fn in (("ingest", ingest), ("detect", detect), ("segment", segment),
                         ("post", post))
    ]
    for w in workers:
        w.start()
    cancelled_at: float | None = None
    while any(w.is_alive() for w in workers):
        for w in workers:
            w.join(timeout=_POLL_S)
        if not run.cancel.is_set() and time.monotonic() - run.last_progress > cfg.watchdog_s:
            log.error("watchdog: no progress for %.1f s", cfg.watchdog_s)
            run.fail("watchdog", None, None, f"no progress for {cfg.watchdog_s} s")
        if run.cancel.is_set():
            cancelled_at = cancelled_at or time.monotonic()
            if time.monotonic() - cancelled_at > _GRACE_S:
                # a stage stuck inside a backend call; daemon threads are abandoned
                log.warning("abandoning %d unresponsive worker(s)",
                            sum(w.is_alive() for w in workers))
                break
    wall_ms = run.now()

    outputs = sorted(list(outputs), key=lambda af: af.frame_id)
    if run.error is not None:
        run.error.partial = outputs
        raise run.error
    report = build_report(timings, wall_ms, cfg.warmup_frames, violations[0], run.depths,
                          cfg.mode)
    return outputs, report


def run_pipeline(cfg: PipelineConfig, source: Iterable[Frame], detector: Detector,
                 segmenter: Segmenter, overlays: bool = False
                 ) -> tuple[list[AnnotatedFrame], RunReport]:
    if cfg.mode == "sequential":
        return run_sequential(cfg, source, detector, segmenter, overlays)
    return run_threaded(cfg, source, detector, segmenter, overlays)

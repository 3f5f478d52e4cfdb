"""Two-stage detection/segmentation runtime."""

from .merge import merge
from .model import (
    MODES,
    REPORT_KEYS,
    AnnotatedFrame,
    PipelineConfig,
    RunReport,
    StageTimings,
)
from .overlay import render_overlay
from .runner import make_stubs, run_pipeline, run_sequential, run_threaded
from .sources import frame_source_directory, frame_source_synthetic
from .stubs import Detector, Segmenter, StubDetector, StubSegmenter

__all__ = [
    "MODES",
    "REPORT_KEYS",
    "AnnotatedFrame",
    "Detector",
    "PipelineConfig",
    "RunReport",
    "Segmenter",
    "StageTimings",
    "StubDetector",
    "StubSegmenter",
    "frame_source_directory",
    "frame_source_synthetic",
    "make_stubs",
    "merge",
    "render_overlay",
    "run_pipeline",
    "run_sequential",
    "run_threaded",
]

"""Frame sources: a directory of PGM/PPM files or a seeded synthetic stream."""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import RasterFormatError, ValidationError
from ..frames import Frame
from ..pnm import read_pnm

RASTER_SUFFIXES = (".pgm", ".ppm")
SYNTHETIC_FRAME_INTERVAL_MS = 1000.0 / 30.0


def frame_source_directory(path: str | Path,
                           expected_dims: tuple[int, int] | None = None) -> Iterator[Frame]:
    """Yield frames from ``path`` in lexicographic filename order.

    A corrupt file raises :class:`RasterFormatError` after every earlier
    frame has been yielded.
    """
    root = Path(path)
    if not root.is_dir():
        raise RasterFormatError(str(root), "not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in RASTER_SUFFIXES)
    for idx, file in enumerate(files):
        pixels = read_pnm(file)
        if expected_dims is not None and (pixels.shape[1], pixels.shape[0]) != tuple(expected_dims):
            raise RasterFormatError(
                str(file), f"expected {expected_dims[0]}x{expected_dims[1]}, "
                f"got {pixels.shape[1]}x{pixels.shape[0]}"
            )
        yield Frame(idx, idx * SYNTHETIC_FRAME_INTERVAL_MS, pixels, source_tag=file.name)


def synthetic_pixels(seed: int, frame_id: int, w: int, h: int) -> np.ndarray:
    """Textured grayscale scene with a few bright blobs, fixed by ``(seed, frame_id)``."""
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, frame_id])
    img = rng.integers(40, 170, size=(h, w), dtype=np.uint8)
    for _ in range(int(rng.integers(1, 4))):
        bw = int(rng.integers(max(1, w // 10), max(2, w // 3)))
        bh = int(rng.integers(max(1, h // 10), max(2, h // 3)))
        x0 = int(rng.integers(0, max(1, w - bw)))
        y0 = int(rng.integers(0, max(1, h - bh)))
        img[y0:y0 + bh, x0:x0 + bw] = rng.integers(180, 256, dtype=np.uint8)
    return img


def frame_source_synthetic(seed: int, count: int, w: int = 64, h: int = 48) -> Iterator[Frame]:
    if count < 0:
        raise ValidationError(f"count must be >= 0, got {count}")
    if w < 1 or h < 1:
        raise ValidationError(f"frame dimensions must be >= 1, got {w}x{h}")
    for i in range(count):
        yield Frame(i, i * SYNTHETIC_FRAME_INTERVAL_MS, synthetic_pixels(seed, i, w, h),
                    source_tag="synthetic")

"""Binary PGM (P5) and PPM (P6) reading and writing, maxval 255 only."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import RasterFormatError

_WHITESPACE = b" \t\r\n"


def _read_header(data: bytes, path: str) -> tuple[bytes, int, int, int, int]:
    """Return ``(magic, width, height, maxval, data_offset)``."""
    pos = 0
    tokens: list[bytes] = []
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos] in _WHITESPACE:
            pos += 1
        if pos < n and data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        if pos >= n:
            raise RasterFormatError(path, "truncated header")
        start = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or data[pos] not in _WHITESPACE:
        raise RasterFormatError(path, "truncated header")
    pos += 1

    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise RasterFormatError(path, f"unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise RasterFormatError(path, "non-numeric header field") from None
    if width < 1 or height < 1:
        raise RasterFormatError(path, f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise RasterFormatError(path, f"unsupported maxval {maxval}")
    return magic, width, height, maxval, pos


def decode_pnm(data: bytes, path: str = "<bytes>") -> np.ndarray:
    magic, width, height, _, offset = _read_header(data, path)
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = data[offset:offset + expected]
    if len(payload) < expected:
        raise RasterFormatError(
            path, f"truncated raster: expected {expected} bytes, found {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, 3).copy()


def read_pnm(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise RasterFormatError(str(path), f"unreadable: {exc.strerror or exc}") from exc
    return decode_pnm(data, str(path))


def encode_pnm(pixels: np.ndarray) -> bytes:
    px = np.asarray(pixels)
    if px.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {px.dtype}")
    if px.ndim == 2:
        magic = b"P5"
    elif px.ndim == 3 and px.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"unsupported raster shape {px.shape}")
    header = b"%s\n%d %d\n255\n" % (magic, px.shape[1], px.shape[0])
    return header + np.ascontiguousarray(px).tobytes()


def write_pnm(path: str | Path, pixels: np.ndarray) -> None:
    Path(path).write_bytes(encode_pnm(pixels))

"""File formats: HSC1 hyperspectral cubes, binary PPM/PGM rasters.

Readers parse from bytes and report failures with the byte offset where
parsing stopped; writers emit exactly what the readers accept, so round
trips are bit-exact and every single-byte truncation of a written file is
rejected.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError
from .tensor import Tensor

HSC1_MAGIC = b"HSC1"
HSC1_HEADER = 16  # magic + three little-endian u32 extents


@dataclass
class HyperCube:
    """Band-sequential stack of float32 planes, [bands, height, width]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or any(d < 1 for d in arr.shape):
            raise ShapeError(f"cube must be [bands, H, W] with positive extents, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise FormatError("cube contains non-finite values")
        self.data = arr

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass
class LabelMask:
    """Per-pixel class indices, one byte each."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim != 2 or any(d < 1 for d in arr.shape):
            raise ShapeError(f"mask must be 2-D with positive extents, got {arr.shape}")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def write_cube(cube: HyperCube, path: str) -> None:
    header = HSC1_MAGIC + struct.pack("<III", cube.bands, cube.height, cube.width)
    payload = cube.data.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_cube(path: str) -> HyperCube:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != HSC1_MAGIC:
        raise FormatError(f"bad cube magic {blob[:4]!r}", offset=0)
    if len(blob) < HSC1_HEADER:
        raise FormatError("truncated cube header", offset=len(blob))
    bands, height, width = struct.unpack_from("<III", blob, 4)
    if bands < 1 or height < 1 or width < 1:
        raise FormatError(f"cube extents {bands}x{height}x{width} must be positive", offset=4)
    expected = HSC1_HEADER + bands * height * width * 4
    if len(blob) < expected:
        raise FormatError(
            f"truncated cube payload: expected {expected} bytes, got {len(blob)}",
            offset=len(blob))
    if len(blob) > expected:
        raise FormatError(f"trailing bytes after cube payload", offset=expected)
    flat = np.frombuffer(blob, dtype="<f4", offset=HSC1_HEADER)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise FormatError("non-finite cube value",
                          offset=HSC1_HEADER + int(bad[0]) * 4)
    return HyperCube(flat.reshape(bands, height, width).copy())


# One whitespace byte after each header token, per the writer contract.
_PPM_HEADER = re.compile(rb"\AP6\s(\d+)\s(\d+)\s(\d+)\s", flags=0)
_PGM_HEADER = re.compile(rb"\AP5\s(\d+)\s(\d+)\s(\d+)\s", flags=0)


def _parse_raster(blob: bytes, header_re: re.Pattern, kind: str,
                  bytes_per_pixel: int) -> tuple[int, int, bytes]:
    m = header_re.match(blob)
    if m is None:
        raise FormatError(f"not a binary {kind} header", offset=0)
    width, height = int(m.group(1)), int(m.group(2))
    maxval = int(m.group(3))
    if maxval != 255:
        raise FormatError(f"{kind} maxval must be 255, got {maxval}", offset=m.start(3))
    if width < 1 or height < 1:
        raise FormatError(f"{kind} extents {width}x{height} must be positive",
                          offset=m.start(1))
    start = m.end()
    expected = start + width * height * bytes_per_pixel
    if len(blob) < expected:
        raise FormatError(
            f"truncated {kind} payload: expected {expected} bytes, got {len(blob)}",
            offset=len(blob))
    if len(blob) > expected:
        raise FormatError(f"trailing bytes after {kind} payload", offset=expected)
    return width, height, blob[start:]


def read_ppm(path: str) -> Tensor:
    """Binary PPM (P6) to a [1, 3, H, W] tensor scaled to [0, 1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    width, height, payload = _parse_raster(blob, _PPM_HEADER, "PPM", 3)
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Tensor(pixels.transpose(2, 0, 1)[None].astype(np.float64) / 255.0)


def write_ppm(rgb: Tensor, path: str) -> None:
    """[1, 3, H, W] tensor in [0, 1] to binary PPM; values are quantized."""
    if rgb.ndim != 4 or rgb.shape[0] != 1 or rgb.shape[1] != 3:
        raise ShapeError(f"write_ppm expects a [1, 3, H, W] tensor, got {rgb.shape}")
    h, w = rgb.shape[2], rgb.shape[3]
    bytes_img = np.clip(np.rint(rgb.data[0] * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(bytes_img.transpose(1, 2, 0).tobytes())


def read_pgm(path: str, num_classes: int | None = None) -> LabelMask:
    """Binary PGM (P5) to a LabelMask, optionally validated against K."""
    with open(path, "rb") as fh:
        blob = fh.read()
    width, height, payload = _parse_raster(blob, _PGM_HEADER, "PGM", 1)
    mask = LabelMask(np.frombuffer(payload, dtype=np.uint8).reshape(height, width))
    if num_classes is not None and mask.data.max() >= num_classes:
        from .errors import LabelError
        raise LabelError(
            f"mask contains class {int(mask.data.max())} outside [0, {num_classes})")
    return mask


def write_pgm(mask: LabelMask, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (mask.width, mask.height))
        fh.write(mask.data.tobytes())

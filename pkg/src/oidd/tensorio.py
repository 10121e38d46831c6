"""Portable binary containers: OIDT tensor files and 8-bit PGM/PPM images.

The OIDT layout is fixed so that any language can produce or consume it:

    magic   4 bytes  "OIDT"
    version 1 byte   (currently 1)
    dtype   1 byte   0 = 32-bit little-endian float, 1 = unsigned byte
    ndim    1 byte
    dims    ndim x 32-bit little-endian unsigned
    payload row-major values, dims-product x dtype-size bytes

Several records may be concatenated in one file (e.g. a classifier stores
its weight matrix followed by its bias vector).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    BadVersion,
    DimOverflow,
    MaxvalNot255,
    ShapeMismatch,
    SimplexViolation,
    TensorFormatError,
    TruncatedPayload,
    UnsupportedFormat,
)

MAGIC = b"OIDT"
VERSION = 1
DTYPE_FLOAT32 = 0
DTYPE_UINT8 = 1

SIMPLEX_TOL = 1e-5

_NUMPY_DTYPES = {DTYPE_FLOAT32: np.dtype("<f4"), DTYPE_UINT8: np.dtype("u1")}
# Refuse headers whose payload would exceed 1 GiB; catches corrupt dims
# before any allocation happens.
_MAX_PAYLOAD_BYTES = 1 << 30


@dataclass(frozen=True)
class TensorFile:
    """One validated OIDT record: a dtype code plus a row-major array."""

    dtype: int
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in _NUMPY_DTYPES:
            raise ValueError(f"unknown dtype code {self.dtype}")
        want = _NUMPY_DTYPES[self.dtype]
        if self.data.dtype != want:
            object.__setattr__(self, "data", self.data.astype(want))
        if self.data.ndim < 1 or any(d < 1 for d in self.data.shape):
            raise ValueError(f"dims must all be >= 1, got shape {self.data.shape}")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape


def tensor_to_bytes(t: TensorFile) -> bytes:
    header = MAGIC + struct.pack("<BBB", VERSION, t.dtype, t.data.ndim)
    header += struct.pack(f"<{t.data.ndim}I", *t.data.shape)
    return header + np.ascontiguousarray(t.data).tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[TensorFile, int]:
    """Parse one record starting at `offset`; returns (tensor, next offset)."""
    if len(buf) - offset < 4:
        raise TruncatedPayload("file ends inside magic", len(buf))
    if buf[offset : offset + 4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {buf[offset:offset + 4]!r}", offset)
    pos = offset + 4
    if len(buf) - pos < 3:
        raise TruncatedPayload("file ends inside fixed header", len(buf))
    version, dtype, ndim = struct.unpack_from("<BBB", buf, pos)
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}", pos)
    if dtype not in _NUMPY_DTYPES:
        raise TensorFormatError(f"unknown dtype code {dtype}", pos + 1)
    pos += 3
    if len(buf) - pos < 4 * ndim:
        raise TruncatedPayload("file ends inside dims", len(buf))
    dims = struct.unpack_from(f"<{ndim}I", buf, pos)
    itemsize = _NUMPY_DTYPES[dtype].itemsize
    count = 1
    for i, d in enumerate(dims):
        if d < 1:
            raise DimOverflow(f"dim {i} is 0", pos + 4 * i)
        count *= d
        if count * itemsize > _MAX_PAYLOAD_BYTES:
            raise DimOverflow(f"dims {dims} exceed the payload limit", pos + 4 * i)
    pos += 4 * ndim
    nbytes = count * itemsize
    if len(buf) - pos < nbytes:
        raise TruncatedPayload(
            f"payload needs {nbytes} bytes, file has {len(buf) - pos}", len(buf)
        )
    data = np.frombuffer(buf[pos : pos + nbytes], dtype=_NUMPY_DTYPES[dtype]).reshape(dims)
    return TensorFile(dtype, data.copy()), pos + nbytes


def read_tensor(path: str | Path) -> TensorFile:
    """Read a file holding exactly one OIDT record."""
    buf = Path(path).read_bytes()
    t, end = tensor_from_bytes(buf, 0)
    if end != len(buf):
        raise TensorFormatError(f"{len(buf) - end} trailing bytes after record", end)
    return t


def read_tensors(path: str | Path) -> list[TensorFile]:
    """Read every concatenated record in a file."""
    buf = Path(path).read_bytes()
    out, pos = [], 0
    while pos < len(buf):
        t, pos = tensor_from_bytes(buf, pos)
        out.append(t)
    return out


def write_tensor(path: str | Path, t: TensorFile) -> None:
    Path(path).write_bytes(tensor_to_bytes(t))


def write_tensors(path: str | Path, tensors: list[TensorFile]) -> None:
    Path(path).write_bytes(b"".join(tensor_to_bytes(t) for t in tensors))


@dataclass(frozen=True)
class RgbImage:
    """h x w x 3 image with channel values in [0, 1], float64, row-major."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ShapeMismatch(f"image must be h x w x 3, got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ShapeMismatch("image must have h >= 1 and w >= 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("image contains non-finite values")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("channel values must lie in [0, 1]")
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def flat(self) -> np.ndarray:
        """Row-major flattened view, length h*w*3 (classifier input order)."""
        return self.data.reshape(-1)


@dataclass(frozen=True)
class SegMap:
    """Per-pixel class probabilities, h x w x (N+1); channel N is background."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] < 2:
            raise ShapeMismatch(f"segmentation map must be h x w x (N+1), got {a.shape}")
        _check_simplex(a)
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def num_classes(self) -> int:
        return self.data.shape[2] - 1


@dataclass(frozen=True)
class BinaryMap:
    """h x w map of {0, 1}; 1 marks semantically relevant (foreground) pixels."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2:
            raise ShapeMismatch(f"binary map must be h x w, got {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("binary map may contain only 0 and 1")
        object.__setattr__(self, "data", a.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _check_simplex(a: np.ndarray) -> None:
    if a.min() < 0.0 or a.max() > 1.0:
        bad = np.unravel_index(int(np.argmax(np.abs(a - 0.5))), a.shape)
        raise SimplexViolation(f"entry outside [0, 1] near pixel {bad[:2]}")
    sums = a.sum(axis=2, dtype=np.float64)
    err = np.abs(sums - 1.0)
    worst = np.unravel_index(int(np.argmax(err)), err.shape)
    if err[worst] > SIMPLEX_TOL:
        raise SimplexViolation(
            f"pixel {worst} sums to {sums[worst]:.6f}, outside 1 +/- {SIMPLEX_TOL}"
        )


def as_segmap(t: TensorFile, num_classes: int) -> SegMap:
    """Validate a float tensor as an h x w x (N+1) segmentation map."""
    if t.data.ndim != 3:
        raise ShapeMismatch(f"expected 3 dims, got {t.data.ndim}")
    if t.data.shape[2] != num_classes + 1:
        raise ShapeMismatch(
            f"expected {num_classes + 1} channels for {num_classes} classes, "
            f"got {t.data.shape[2]}"
        )
    return SegMap(t.data.astype(np.float64))


def segmap_to_tensor(m: SegMap) -> TensorFile:
    return TensorFile(DTYPE_FLOAT32, m.data.astype(np.float32))


def binary_map_to_tensor(m: BinaryMap) -> TensorFile:
    return TensorFile(DTYPE_UINT8, m.data)


def binary_map_from_tensor(t: TensorFile) -> BinaryMap:
    if t.data.ndim != 2:
        raise ShapeMismatch(f"expected 2 dims for a binary map, got {t.data.ndim}")
    return BinaryMap(t.data)


def read_image(path: str | Path) -> RgbImage:
    """Read a binary PGM (P5) or PPM (P6) file; 8-bit only.

    PGM gray values are replicated into all three channels; every channel
    is mapped u/255 into [0, 1].
    """
    buf = Path(path).read_bytes()
    magic, pos = _next_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormat(f"unsupported image magic {magic!r}; need binary P5 or P6")
    fields = []
    for _ in range(3):
        tok, pos = _next_token(buf, pos)
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise MaxvalNot255(f"maxval is {maxval}, only 255 supported")
    if width < 1 or height < 1:
        raise UnsupportedFormat(f"bad raster size {width} x {height}")
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    raster = buf[pos : pos + need]
    if len(raster) < need:
        raise UnsupportedFormat(f"raster needs {need} bytes, file has {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return RgbImage(arr.astype(np.float64) / 255.0)


def write_image(path: str | Path, image: RgbImage) -> None:
    """Write a binary PPM (P6), quantizing channels as round(v * 255)."""
    q = np.rint(image.data * 255.0).astype(np.uint8)
    header = f"P6\n{image.width} {image.height}\n255\n".encode()
    Path(path).write_bytes(header + q.tobytes())


def write_binary_map_pgm(path: str | Path, m: BinaryMap) -> None:
    """Render a binary map as P5: foreground 255, background 0."""
    header = f"P5\n{m.width} {m.height}\n255\n".encode()
    Path(path).write_bytes(header + (m.data * 255).astype(np.uint8).tobytes())


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    while pos < len(buf):
        c = buf[pos : pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            end = buf.find(b"\n", pos)
            pos = len(buf) if end < 0 else end + 1
        else:
            break
    start = pos
    while pos < len(buf) and buf[pos : pos + 1] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise UnsupportedFormat("unexpected end of header")
    return buf[start:pos], pos

"""Dense float32 tensors: seeded generation and the .mosst binary format.

Generation is pinned to numpy's PCG64 generator so that every value in the
test suite and CLI output is reproducible across platforms for a fixed seed.

File layout (little-endian throughout):

    offset  size       field
    0       8          magic "MOSSTNSR"
    8       1          version (currently 1)
    9       1          dtype tag (0=f32, 1=e4m3 codes, 2=e5m2 codes, 3=e8m0 codes)
    10      4          ndim (uint32)
    14      8*ndim     dims (uint64 each)
    ...     n*width    payload, row-major (width 4 for f32, 1 for code tags)
"""

from __future__ import annotations

import enum
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    InvalidArgumentError,
    InvalidShapeError,
    InvalidValueError,
    TruncatedPayloadError,
    VersionMismatchError,
)

__all__ = ["DType", "tensor_randn", "tensor_write", "tensor_read", "MAGIC", "VERSION"]

MAGIC = b"MOSSTNSR"
VERSION = 1


class DType(enum.IntEnum):
    F32 = 0
    FP8_E4M3 = 1
    FP8_E5M2 = 2
    E8M0 = 3


_ELEMENT_WIDTH = {DType.F32: 4, DType.FP8_E4M3: 1, DType.FP8_E5M2: 1, DType.E8M0: 1}


def _check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(d) for d in shape)
    if len(shape) == 0 or any(d < 1 for d in shape):
        raise InvalidShapeError(f"shape must be nonempty with all dims >= 1, got {shape}")
    return shape


def tensor_randn(shape, seed: int, dist: str = "gaussian", *,
                 outlier_rate: float = 0.001, outlier_magnitude: float = 50.0) -> np.ndarray:
    """Deterministic random float32 tensor from a PCG64 stream.

    dist is one of "gaussian", "laplace", "outlier_injected". The outlier
    variant plants ceil(rate * n) elements of value +/-magnitude on top of
    a standard Gaussian base.
    """
    shape = _check_shape(shape)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(np.prod(shape))
    if dist == "gaussian":
        flat = rng.standard_normal(n, dtype=np.float32)
    elif dist == "laplace":
        flat = rng.laplace(size=n).astype(np.float32)
    elif dist == "outlier_injected":
        if not 0.0 < outlier_rate <= 1.0:
            raise InvalidArgumentError("outlier_rate must be in (0, 1]")
        flat = rng.standard_normal(n, dtype=np.float32)
        k = max(1, int(round(outlier_rate * n)))
        idx = rng.choice(n, size=k, replace=False)
        # outliers spread around +/-magnitude; exactly equal magnitudes would
        # all quantize error-free under one shared scale, which no real
        # activation outlier population does
        mags = outlier_magnitude * (1.0 + 0.1 * np.abs(rng.standard_normal(k)))
        flat[idx] = (mags * rng.choice([-1.0, 1.0], size=k)).astype(np.float32)
    else:
        raise InvalidArgumentError(f"unknown distribution: {dist!r}")
    return flat.reshape(shape)


def tensor_write(t: np.ndarray, path, dtype: DType = DType.F32) -> None:
    """Write an array to a .mosst file.

    dtype F32 expects float32 data; the code tags expect uint8 code arrays
    and record which codec produced them.
    """
    dtype = DType(dtype)
    if dtype == DType.F32:
        data = np.ascontiguousarray(t, dtype="<f4")
        if not np.all(np.isfinite(data)):
            raise InvalidValueError("refusing to write non-finite f32 payload")
    else:
        data = np.ascontiguousarray(t, dtype=np.uint8)
    shape = _check_shape(data.shape)
    header = MAGIC + struct.pack("<BBI", VERSION, int(dtype), len(shape))
    header += struct.pack(f"<{len(shape)}Q", *shape)
    Path(path).write_bytes(header + data.tobytes())


def tensor_read(path) -> tuple[np.ndarray, DType]:
    """Read a .mosst file, returning (array, dtype tag).

    The payload is returned verbatim: float32 for tag 0, uint8 codes for
    tags 1-3. Raises distinct errors for bad magic, unsupported version,
    and short payloads.
    """
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"not a .mosst file: {path}")
    if len(raw) < len(MAGIC) + 6:
        raise TruncatedPayloadError("file ends inside the fixed header")
    off = len(MAGIC)
    version, tag, ndim = struct.unpack_from("<BBI", raw, off)
    off += 6
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}, expected {VERSION}")
    try:
        dtype = DType(tag)
    except ValueError:
        raise VersionMismatchError(f"unknown dtype tag {tag}") from None
    if len(raw) < off + 8 * ndim:
        raise TruncatedPayloadError("header ends before dims")
    dims = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    if ndim == 0 or any(d < 1 for d in dims):
        raise InvalidShapeError(f"invalid dims in file: {dims}")
    count = int(np.prod(dims))
    width = _ELEMENT_WIDTH[dtype]
    if len(raw) - off < count * width:
        raise TruncatedPayloadError(
            f"payload has {len(raw) - off} bytes, expected {count * width}")
    buf = raw[off: off + count * width]
    if dtype == DType.F32:
        arr = np.frombuffer(buf, dtype="<f4").astype(np.float32).reshape(dims)
    else:
        arr = np.frombuffer(buf, dtype=np.uint8).copy().reshape(dims)
    return arr, dtype

"""Per-tensor, per-group, and two-level microscaled FP8 quantization.

All three schemes share the same skeleton: pick scale(s) from max-abs
statistics, encode value/scale to FP8 codes, and dequantize as
code * scale(s). They differ only in scale granularity:

per-tensor   one FP32 scale for the whole tensor
per-group    one FP32 scale per contiguous group along the last axis
two-level    one FP32 global scale plus one power-of-two (E8M0) micro
             scale per contiguous block of k2 elements along the last axis

The two-level scheme computes block scales s_i = blockmax / max_value,
sets the global scale to max(s_i), and stores each block's ratio s_i/s on
the E8M0 grid. Under ceil_pow2 rounding the stored micro scale never
under-estimates the ratio, so no element code can saturate; nearest_log2
is available as an opt-in and saturates instead.

Zero tensors, groups, and blocks fall back to scale 1.0 with all-zero
codes, keeping every stored scale strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidShapeError, InvalidValueError
from .fp8 import E8m0Rounding, Fp8Format, e8m0_decode, e8m0_encode, fp8_decode, fp8_encode

__all__ = [
    "PerTensorQuant",
    "PerGroupQuant",
    "TwoLevelQuant",
    "quant_per_tensor",
    "quant_per_group",
    "quant_two_level",
    "dequantize",
]


@dataclass(frozen=True)
class PerTensorQuant:
    codes: np.ndarray  # uint8, source shape
    scale: float       # positive float32 value
    fmt: Fp8Format

    @property
    def shape(self) -> tuple[int, ...]:
        return self.codes.shape


@dataclass(frozen=True)
class PerGroupQuant:
    codes: np.ndarray   # uint8, source shape
    scales: np.ndarray  # float32, outer shape + (n_groups,)
    group_size: int
    fmt: Fp8Format

    @property
    def shape(self) -> tuple[int, ...]:
        return self.codes.shape


@dataclass(frozen=True)
class TwoLevelQuant:
    codes: np.ndarray        # uint8, source shape
    global_scale: float | np.ndarray  # scalar, or per-k1-span float32 array
    micro_codes: np.ndarray  # uint8 E8M0, outer shape + (n_blocks,)
    fmt: Fp8Format
    k2: int = 32
    k1: int | None = None    # level-1 span; None = whole tensor shares one scale

    @property
    def shape(self) -> tuple[int, ...]:
        return self.codes.shape

    def micro_scales(self) -> np.ndarray:
        """Decoded power-of-two micro scales, one per k2 block."""
        return e8m0_decode(self.micro_codes)


def _as_f32(x) -> np.ndarray:
    xf = np.ascontiguousarray(x, dtype=np.float32)
    if xf.ndim == 0:
        raise InvalidShapeError("quantization needs at least one dimension")
    if not np.all(np.isfinite(xf)):
        raise InvalidValueError("quantization requires finite input")
    return xf


def quant_per_tensor(x, fmt: Fp8Format) -> PerTensorQuant:
    """Quantize with a single scale = max|x| / max_value (1.0 if x is all zero)."""
    xf = _as_f32(x)
    amax = float(np.max(np.abs(xf))) if xf.size else 0.0
    scale = np.float32(amax / fmt.max_value) if amax > 0.0 else np.float32(1.0)
    codes = fp8_encode(xf / scale, fmt)
    return PerTensorQuant(codes=codes, scale=float(scale), fmt=fmt)


def quant_per_group(x, fmt: Fp8Format, group_size: int = 128) -> PerGroupQuant:
    """Quantize with one scale per contiguous group along the last axis.

    A ragged final group is scaled over its actual elements; zero groups
    fall back to scale 1.0.
    """
    if group_size < 1:
        raise InvalidArgumentError(f"group_size must be >= 1, got {group_size}")
    xf = _as_f32(x)
    last = xf.shape[-1]
    n_groups = -(-last // group_size)
    outer = xf.shape[:-1]

    scales = np.empty(outer + (n_groups,), dtype=np.float32)
    codes = np.empty_like(xf, dtype=np.uint8)
    for g in range(n_groups):
        sl = (..., slice(g * group_size, min((g + 1) * group_size, last)))
        block = xf[sl]
        amax = np.max(np.abs(block), axis=-1)
        s = np.where(amax > 0.0, amax / np.float32(fmt.max_value), np.float32(1.0))
        s = s.astype(np.float32)
        scales[..., g] = s
        codes[sl] = fp8_encode(block / s[..., None], fmt)
    return PerGroupQuant(codes=codes, scales=scales, group_size=group_size, fmt=fmt)


def quant_two_level(x, fmt: Fp8Format,
                    rounding: E8m0Rounding = E8m0Rounding.CEIL_POW2,
                    k2: int = 32, k1: int | None = None) -> TwoLevelQuant:
    """Two-level quantization: FP32 global scale x E8M0 per-block micro scales.

    The last axis must divide evenly into k2 blocks. When k1 is given, the
    last axis is split into k1-wide level-1 spans, each with its own global
    scale; by default the whole tensor shares one.
    """
    xf = _as_f32(x)
    last = xf.shape[-1]
    if last % k2 != 0:
        raise InvalidShapeError(f"last dim {last} not divisible by k2={k2}")
    if k1 is not None:
        if k1 % k2 != 0 or last % k1 != 0:
            raise InvalidShapeError(f"k1={k1} must be a multiple of k2 dividing {last}")

    outer = xf.shape[:-1]
    n_blocks = last // k2
    blocks = xf.reshape(outer + (n_blocks, k2))
    # block scales on the float32 grid; the global max then dominates each
    # of them exactly, so every ratio below is <= 1 with no rounding escape
    s_i = (np.max(np.abs(blocks), axis=-1) / np.float32(fmt.max_value)).astype(np.float32)

    if k1 is None:
        global_scale = float(np.max(s_i))
        if global_scale == 0.0:
            global_scale = 1.0
        span_scale = np.full(outer + (n_blocks,), global_scale, dtype=np.float32)
    else:
        per_span = n_blocks // (last // k1)
        spans = s_i.reshape(outer + (last // k1, per_span))
        gs = np.max(spans, axis=-1)
        gs = np.where(gs > 0.0, gs, np.float32(1.0)).astype(np.float32)
        global_scale = gs
        span_scale = np.repeat(gs, per_span, axis=-1)

    ratio = s_i.astype(np.float64) / span_scale.astype(np.float64)
    micro = np.full(s_i.shape, 127, dtype=np.uint8)  # zero blocks keep ss = 1.0
    nz = ratio > 0.0
    if np.any(nz):
        micro[nz] = e8m0_encode(ratio[nz], rounding)

    eff = (span_scale * e8m0_decode(micro)).astype(np.float32)
    codes = fp8_encode(blocks / eff[..., None], fmt).reshape(xf.shape)
    return TwoLevelQuant(codes=codes, global_scale=global_scale,
                         micro_codes=micro, fmt=fmt, k2=k2, k1=k1)


def _two_level_scales(q: TwoLevelQuant) -> np.ndarray:
    """Effective float32 scale per k2 block (global x micro)."""
    ss = e8m0_decode(q.micro_codes)
    if q.k1 is None:
        return (np.float32(q.global_scale) * ss).astype(np.float32)
    per_span = q.micro_codes.shape[-1] // q.global_scale.shape[-1]
    span = np.repeat(q.global_scale.astype(np.float32), per_span, axis=-1)
    return (span * ss).astype(np.float32)


def dequantize(q) -> np.ndarray:
    """Recover float32 values as code * scale(s), exact in 32-bit arithmetic."""
    if isinstance(q, PerTensorQuant):
        return (fp8_decode(q.codes, q.fmt) * np.float32(q.scale)).astype(np.float32)
    if isinstance(q, PerGroupQuant):
        out = np.empty(q.shape, dtype=np.float32)
        last = q.shape[-1]
        for g in range(q.scales.shape[-1]):
            sl = (..., slice(g * q.group_size, min((g + 1) * q.group_size, last)))
            out[sl] = fp8_decode(q.codes[sl], q.fmt) * q.scales[..., g, None]
        return out
    if isinstance(q, TwoLevelQuant):
        eff = _two_level_scales(q)
        outer = q.shape[:-1]
        n_blocks = q.shape[-1] // q.k2
        vals = fp8_decode(q.codes, q.fmt).reshape(outer + (n_blocks, q.k2))
        return (vals * eff[..., None]).astype(np.float32).reshape(q.shape)
    raise InvalidArgumentError(f"not a quantized tensor: {type(q).__name__}")

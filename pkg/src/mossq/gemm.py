"""Reference quantized GEMM kernels with dequantization-cost counters.

Two dataflows over C[i, j] = sum_k W[i, k] * X[j, k]:

gemm_mx_epilogue
    Weights are per-tensor quantized, activations two-level quantized with
    power-of-two micro scales per 32-wide K block (the weight side carries
    an implicit unit micro scale). The K loop accumulates raw code
    products, each block partial picks up the activation micro scale, and
    the single FP32 factor s_W * s_x is applied once per output in the
    epilogue. Main-loop dequantization count: zero.

gemm_pergroup_mainloop
    Both operands are per-group quantized (group 128 along K), so every
    128-wide partial sum must be scaled by s_a[g] * s_b[g] inside the K
    loop before it can be accumulated: K/128 dequantization multiplies per
    output element.

Counters are cost-model counts (folded scale factors count once), not
instrumented multiply totals. Accumulation is float64 in block-major
order over K so kernels match their dequantize-then-multiply oracles to
near machine precision on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidShapeError
from .fp8 import E8m0Rounding, Fp8Format, e8m0_decode, fp8_decode, E4M3
from .quantize import PerGroupQuant, PerTensorQuant, TwoLevelQuant, \
    quant_per_tensor, quant_two_level

__all__ = [
    "GemmCounters",
    "GemmOperands",
    "quantize_gemm_operands",
    "gemm_mx_epilogue",
    "gemm_pergroup_mainloop",
    "gemm_oracle",
    "dequantize_exact",
    "mx_epilogue_counters",
    "pergroup_mainloop_counters",
]


@dataclass(frozen=True)
class GemmCounters:
    mainloop_dequant_multiplies: int
    epilogue_dequant_multiplies: int
    block_scale_multiplies: int  # activation micro-scale applications (tensor path)
    mac_count: int


def mx_epilogue_counters(m: int, n: int, k: int, k2: int = 32) -> GemmCounters:
    """Closed-form cost counts for the epilogue dataflow at a given shape."""
    if k % k2 != 0:
        raise InvalidShapeError(f"K={k} not divisible by block size {k2}")
    return GemmCounters(mainloop_dequant_multiplies=0,
                        epilogue_dequant_multiplies=m * n,
                        block_scale_multiplies=m * n * (k // k2),
                        mac_count=m * n * k)


def pergroup_mainloop_counters(m: int, n: int, k: int, group_size: int = 128) -> GemmCounters:
    """Closed-form cost counts for the main-loop dataflow at a given shape."""
    if k % group_size != 0:
        raise InvalidShapeError(f"K={k} not divisible by group size {group_size}")
    return GemmCounters(mainloop_dequant_multiplies=m * n * (k // group_size),
                        epilogue_dequant_multiplies=0,
                        block_scale_multiplies=0,
                        mac_count=m * n * k)


@dataclass(frozen=True)
class GemmOperands:
    """Quantized W (M, K) and X stored as (N, K) with micro scales along K."""

    qw: PerTensorQuant
    qx: TwoLevelQuant

    def __post_init__(self):
        if self.qw.codes.ndim != 2 or self.qx.codes.ndim != 2:
            raise InvalidShapeError("gemm operands must be 2-D")
        if self.qw.codes.shape[1] != self.qx.codes.shape[1]:
            raise InvalidShapeError(
                f"K mismatch: weights {self.qw.codes.shape} vs activations {self.qx.codes.shape}")
        if self.qx.codes.shape[1] % self.qx.k2 != 0:
            raise InvalidShapeError("K must be divisible by the micro block size")
        if self.qx.k1 is not None:
            raise InvalidArgumentError("gemm requires a single global activation scale")

    @property
    def m(self) -> int:
        return self.qw.codes.shape[0]

    @property
    def n(self) -> int:
        return self.qx.codes.shape[0]

    @property
    def k(self) -> int:
        return self.qw.codes.shape[1]


def quantize_gemm_operands(w, x, fmt: Fp8Format = E4M3,
                           rounding: E8m0Rounding = E8m0Rounding.CEIL_POW2) -> GemmOperands:
    """Quantize float inputs W (M, K) and X (N, K) for the epilogue kernel."""
    return GemmOperands(qw=quant_per_tensor(w, fmt),
                        qx=quant_two_level(x, fmt, rounding=rounding))


def gemm_mx_epilogue(ops: GemmOperands) -> tuple[np.ndarray, GemmCounters]:
    """Two-level dataflow: all FP32 dequantization deferred to the epilogue."""
    m, n, k = ops.m, ops.n, ops.k
    k2 = ops.qx.k2
    wv = fp8_decode(ops.qw.codes, ops.qw.fmt).astype(np.float64)
    xv = fp8_decode(ops.qx.codes, ops.qx.fmt).astype(np.float64)
    ss = e8m0_decode(ops.qx.micro_codes).astype(np.float64)  # (n, k // k2)

    acc = np.zeros((m, n))
    for b in range(k // k2):
        sl = slice(b * k2, (b + 1) * k2)
        partial = wv[:, sl] @ xv[:, sl].T
        acc += partial * ss[None, :, b]
    out = acc * (float(ops.qw.scale) * float(ops.qx.global_scale))
    return out, mx_epilogue_counters(m, n, k, k2)


def gemm_pergroup_mainloop(qa: PerGroupQuant, qb: PerGroupQuant) -> tuple[np.ndarray, GemmCounters]:
    """Per-group dataflow: partial sums dequantized inside the K loop."""
    if qa.codes.ndim != 2 or qb.codes.ndim != 2:
        raise InvalidShapeError("gemm operands must be 2-D")
    if qa.codes.shape[1] != qb.codes.shape[1]:
        raise InvalidShapeError(
            f"K mismatch: {qa.codes.shape} vs {qb.codes.shape}")
    if qa.group_size != qb.group_size:
        raise InvalidArgumentError("operands must share one group size")
    k = qa.codes.shape[1]
    group = qa.group_size
    if k % group != 0:
        raise InvalidShapeError(f"K={k} not divisible by group size {group}")
    m, n = qa.codes.shape[0], qb.codes.shape[0]

    av = fp8_decode(qa.codes, qa.fmt).astype(np.float64)
    bv = fp8_decode(qb.codes, qb.fmt).astype(np.float64)
    sa = qa.scales.astype(np.float64)
    sb = qb.scales.astype(np.float64)

    acc = np.zeros((m, n))
    for g in range(k // group):
        sl = slice(g * group, (g + 1) * group)
        partial = av[:, sl] @ bv[:, sl].T
        acc += partial * (sa[:, g, None] * sb[None, :, g])
    return acc, pergroup_mainloop_counters(m, n, k, group)


def dequantize_exact(q) -> np.ndarray:
    """Dequantize in float64 for oracle comparisons.

    Code values and power-of-two micro scales are exact in float64, so
    this carries no rounding beyond the one float64 scale product; the
    float32 dequantize would add ~1e-7 per-element noise and mask kernel
    errors at the 1e-10 level.
    """
    if isinstance(q, PerTensorQuant):
        return fp8_decode(q.codes, q.fmt).astype(np.float64) * float(q.scale)
    if isinstance(q, PerGroupQuant):
        vals = fp8_decode(q.codes, q.fmt).astype(np.float64)
        out = np.empty(q.shape)
        last = q.shape[-1]
        for g in range(q.scales.shape[-1]):
            sl = (..., slice(g * q.group_size, min((g + 1) * q.group_size, last)))
            out[sl] = vals[sl] * q.scales[..., g, None].astype(np.float64)
        return out
    if isinstance(q, TwoLevelQuant):
        if q.k1 is not None:
            raise InvalidArgumentError("exact dequantization expects a scalar global scale")
        ss = e8m0_decode(q.micro_codes).astype(np.float64)
        eff = float(q.global_scale) * ss
        outer = q.shape[:-1]
        n_blocks = q.shape[-1] // q.k2
        vals = fp8_decode(q.codes, q.fmt).astype(np.float64).reshape(outer + (n_blocks, q.k2))
        return (vals * eff[..., None]).reshape(q.shape)
    raise InvalidArgumentError(f"not a quantized tensor: {type(q).__name__}")


def gemm_oracle(a, b, k_block: int | None = None) -> np.ndarray:
    """Ground-truth GEMM: C = A @ B in float64, block-major accumulation over K.

    Pass the kernel's block size as k_block to reproduce its accumulation
    order exactly; None accumulates over the whole K extent at once.
    """
    af = np.asarray(a, dtype=np.float64)
    bf = np.asarray(b, dtype=np.float64)
    if af.ndim != 2 or bf.ndim != 2 or af.shape[1] != bf.shape[0]:
        raise InvalidShapeError(f"inner dims disagree: {af.shape} x {bf.shape}")
    k = af.shape[1]
    if k_block is None:
        k_block = k
    if k_block < 1:
        raise InvalidArgumentError("k_block must be >= 1")
    acc = np.zeros((af.shape[0], bf.shape[1]))
    for start in range(0, k, k_block):
        sl = slice(start, min(start + k_block, k))
        acc += af[:, sl] @ bf[sl, :]
    return acc

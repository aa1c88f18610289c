"""Bit-exact software codecs for 8-bit floating-point formats.

Two element formats plus one scale format are implemented:

E4M3 (1 sign, 4 exponent, 3 mantissa, bias 7)
    Max finite magnitude 448 (code 0x7E). No infinities; the single NaN
    pattern per sign is exponent and mantissa all ones (0x7F / 0xFF).
    Subnormals: (-1)^S * (M/8) * 2^-6.

E5M2 (1 sign, 5 exponent, 2 mantissa, bias 15)
    Max finite magnitude 57344 (code 0x7B). IEEE-style specials:
    exponent all ones encodes +/-Inf (mantissa 0) or NaN (mantissa != 0).
    Subnormals: (-1)^S * (M/4) * 2^-14.

E8M0 (8 exponent bits, no sign, no mantissa)
    Code e in [0, 254] decodes to 2^(e - 127); code 255 is reserved.

Encoding uses round-to-nearest-even on the target significand and
saturates out-of-range magnitudes to the max finite value instead of
producing Inf/NaN. NaN or Inf inputs are rejected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import E8m0RangeError, InvalidValueError

__all__ = [
    "Fp8Format",
    "E4M3",
    "E5M2",
    "E8m0Rounding",
    "fp8_encode",
    "fp8_decode",
    "decode_table",
    "e8m0_encode",
    "e8m0_decode",
    "E8M0_INVALID_CODE",
]


@dataclass(frozen=True)
class Fp8Format:
    """Descriptor of one 8-bit float encoding."""

    name: str
    exponent_bits: int
    mantissa_bits: int
    bias: int
    max_value: float
    has_infinity: bool

    @property
    def max_finite_code(self) -> int:
        """Unsigned code of the largest finite positive value."""
        if self.has_infinity:
            exp = (1 << self.exponent_bits) - 2
            mant = (1 << self.mantissa_bits) - 1
        else:
            exp = (1 << self.exponent_bits) - 1
            mant = (1 << self.mantissa_bits) - 2
        return (exp << self.mantissa_bits) | mant


E4M3 = Fp8Format("e4m3", exponent_bits=4, mantissa_bits=3, bias=7,
                 max_value=448.0, has_infinity=False)
E5M2 = Fp8Format("e5m2", exponent_bits=5, mantissa_bits=2, bias=15,
                 max_value=57344.0, has_infinity=True)

FORMATS = {"e4m3": E4M3, "e5m2": E5M2}


class E8m0Rounding(str, enum.Enum):
    """Rounding mode when mapping a positive real onto the power-of-two grid."""

    CEIL_POW2 = "ceil_pow2"
    NEAREST_LOG2 = "nearest_log2"


E8M0_INVALID_CODE = 255


def _build_decode_table(fmt: Fp8Format) -> np.ndarray:
    ebits, mbits, bias = fmt.exponent_bits, fmt.mantissa_bits, fmt.bias
    emask = (1 << ebits) - 1
    mmask = (1 << mbits) - 1
    out = np.empty(256, dtype=np.float32)
    for code in range(256):
        sign = -1.0 if code & 0x80 else 1.0
        exp = (code >> mbits) & emask
        mant = code & mmask
        if exp == emask:
            if fmt.has_infinity:
                out[code] = np.float32(sign * np.inf) if mant == 0 else np.float32(np.nan)
                continue
            if mant == mmask:
                out[code] = np.float32(np.nan)
                continue
        if exp == 0:
            val = (mant / (1 << mbits)) * 2.0 ** (1 - bias)
        else:
            val = (1.0 + mant / (1 << mbits)) * 2.0 ** (exp - bias)
        out[code] = np.float32(sign * val)
    return out


_DECODE_TABLES = {fmt.name: _build_decode_table(fmt) for fmt in (E4M3, E5M2)}


def decode_table(fmt: Fp8Format) -> np.ndarray:
    """All 256 decoded values of the format, indexed by code (read-only)."""
    table = _DECODE_TABLES[fmt.name]
    table.flags.writeable = False
    return table


def fp8_decode(codes, fmt: Fp8Format) -> np.ndarray:
    """Decode uint8 codes to their exact float32 values.

    Special patterns decode to NaN (and +/-Inf for E5M2) so callers can
    detect them; the encode path never produces them.
    """
    codes = np.asarray(codes, dtype=np.uint8)
    return _DECODE_TABLES[fmt.name][codes]


def fp8_encode(x, fmt: Fp8Format) -> np.ndarray:
    """Encode finite float32 values with round-to-nearest-even.

    Magnitudes beyond the format's max finite value saturate to it.
    Raises InvalidValueError on NaN or Inf input.
    """
    xf = np.asarray(x, dtype=np.float32)
    if not np.all(np.isfinite(xf)):
        raise InvalidValueError("fp8_encode requires finite input")
    shape = xf.shape

    bits = np.ascontiguousarray(xf).reshape(-1).view(np.uint32).astype(np.int64)
    sign = ((bits >> 31) & 0x1).astype(np.uint8) << 7
    f32exp = (bits >> 23) & 0xFF
    f32mant = bits & 0x7FFFFF

    mbits = fmt.mantissa_bits
    # float32 subnormals (< 2^-126) are far below every fp8 half-ulp: flush to 0
    is_zero = f32exp == 0

    tgt = f32exp - 127 + fmt.bias
    shift = (23 - mbits) + np.maximum(0, 1 - tgt)
    shift = np.minimum(shift, 60)  # deep underflow still rounds to 0

    sig = f32mant | 0x800000
    floor_ = sig >> shift
    rem = sig & ((np.int64(1) << shift) - 1)
    half = np.int64(1) << (shift - 1)
    round_up = (rem > half) | ((rem == half) & ((floor_ & 1) == 1))
    msig = floor_ + round_up

    # rounding carry: significand overflowed one binade up
    top = np.int64(1) << (mbits + 1)
    carry = msig == top
    tgt = tgt + carry
    msig = np.where(carry, msig >> 1, msig)

    implicit = np.int64(1) << mbits
    is_norm = msig >= implicit
    exp_out = np.where(is_norm, np.maximum(tgt, 1), 0)
    mant_out = np.where(is_norm, msig - implicit, msig)

    # saturate anything past the max finite value
    max_code = fmt.max_finite_code
    max_exp = max_code >> mbits
    max_mant = max_code & ((1 << mbits) - 1)
    over = (exp_out > max_exp) | ((exp_out == max_exp) & (mant_out > max_mant))
    exp_out = np.where(over, max_exp, exp_out)
    mant_out = np.where(over, max_mant, mant_out)

    code = (exp_out.astype(np.uint8) << mbits) | mant_out.astype(np.uint8)
    code = np.where(is_zero, np.uint8(0), code)
    return (sign | code).astype(np.uint8).reshape(shape)


def e8m0_decode(codes) -> np.ndarray:
    """Decode E8M0 codes to exact powers of two as float32."""
    codes = np.asarray(codes, dtype=np.uint8)
    if np.any(codes == E8M0_INVALID_CODE):
        raise InvalidValueError("e8m0 code 255 is reserved")
    return np.ldexp(np.float32(1.0), codes.astype(np.int32) - 127)


def e8m0_encode(r, rounding: E8m0Rounding = E8m0Rounding.CEIL_POW2) -> np.ndarray:
    """Map positive values onto the E8M0 power-of-two grid.

    ceil_pow2 returns the smallest power of two >= r, so the result never
    under-estimates the input. nearest_log2 picks the integer exponent
    minimizing |log2(r) - e|, ties to the even exponent.
    """
    rf = np.asarray(r, dtype=np.float64)
    if not np.all(np.isfinite(rf)) or np.any(rf <= 0.0):
        raise InvalidValueError("e8m0_encode requires finite r > 0")

    mant, exp = np.frexp(rf)  # r = mant * 2^exp, mant in [0.5, 1)
    is_pow2 = mant == 0.5
    if rounding == E8m0Rounding.CEIL_POW2:
        e = np.where(is_pow2, exp - 1, exp)
    elif rounding == E8m0Rounding.NEAREST_LOG2:
        lo = exp - 1  # floor(log2 r)
        log2r = np.log2(rf)
        d_lo = log2r - lo
        d_hi = (lo + 1) - log2r
        pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (lo % 2 != 0))
        e = np.where(is_pow2, lo, np.where(pick_hi, lo + 1, lo))
    else:
        raise InvalidValueError(f"unknown e8m0 rounding mode: {rounding!r}")

    if np.any(e > 127):
        raise E8m0RangeError("value exceeds 2^127")
    if np.any(e < -127):
        raise E8m0RangeError("value below 2^-127")
    return (e + 127).astype(np.uint8)

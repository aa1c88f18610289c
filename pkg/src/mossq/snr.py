"""Quantization signal-to-noise measurement and closed-form noise models.

Empirical SNR is 10*log10(sum(x^2) / sum((dq - x)^2)) over the actual
dequantization error. The closed-form models assume the quantization error
is uniform over [-scale/2, scale/2] within each scale region:

    per-tensor   10*log10(12 * sigma^2 / s^2)
    per-group    10*log10(12 * N * sigma^2 / sum_g s_g^2)
    two-level    10*log10(12 * N_g * sigma^2 / (s^2 * sum_g ss_g^2))

with sigma^2 the mean square of the input (zero-mean assumption). The
models are evaluated verbatim and reported alongside the empirical value;
they describe a unit-step integer quantizer, so for FP8 codes (whose step
size is relative, not absolute) the model systematically overstates the
measured SNR. See the ordering harness notes in the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidShapeError, UndefinedModelError
from .fp8 import E8m0Rounding, Fp8Format, e8m0_decode
from .quantize import dequantize, quant_per_group, quant_per_tensor, quant_two_level
from .tensor import tensor_randn

__all__ = [
    "SCHEMES",
    "SnrReport",
    "OrderingReport",
    "snr_empirical",
    "snr_model",
    "measure_snr",
    "snr_ordering_harness",
]

SCHEMES = ("tensor", "group", "mx2")


@dataclass(frozen=True)
class SnrReport:
    scheme: str
    empirical_snr_db: float  # +inf when the dequantization error is exactly zero
    model_snr_db: float
    signal_power: float
    noise_power: float
    n_groups: int


@dataclass(frozen=True)
class OrderingReport:
    """Per-trial SNR of the three schemes plus ordering statistics."""

    n_trials: int
    n_degenerate: int
    empirical_db: np.ndarray  # (n_trials, 3), columns ordered as SCHEMES
    model_db: np.ndarray

    def mean_db(self) -> dict[str, float]:
        ok = np.all(np.isfinite(self.empirical_db), axis=1)
        return {s: float(np.mean(self.empirical_db[ok, i])) for i, s in enumerate(SCHEMES)}

    def mean_gaps(self) -> tuple[float, float]:
        """(group - tensor, mx2 - group) mean gaps in dB over non-degenerate trials."""
        m = self.mean_db()
        return m["group"] - m["tensor"], m["mx2"] - m["group"]

    def ordering_fraction(self) -> float:
        """Fraction of non-degenerate trials with strict mx2 > group > tensor."""
        e = self.empirical_db
        ok = np.all(np.isfinite(e), axis=1)
        if not np.any(ok):
            return float("nan")
        holds = (e[ok, 2] > e[ok, 1]) & (e[ok, 1] > e[ok, 0])
        return float(np.mean(holds))


def snr_empirical(x, dq) -> float:
    """Measured SNR in dB; +inf sentinel when the error is exactly zero."""
    xf = np.asarray(x, dtype=np.float64)
    df = np.asarray(dq, dtype=np.float64)
    if xf.shape != df.shape:
        raise InvalidShapeError(f"shape mismatch: {xf.shape} vs {df.shape}")
    sig = float(np.sum(xf * xf))
    if sig == 0.0:
        raise InvalidArgumentError("snr_empirical requires a nonzero signal")
    err = float(np.sum((df - xf) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(sig / err)


def _signal_power(x) -> float:
    xf = np.asarray(x, dtype=np.float64)
    p = float(np.mean(xf * xf))
    if p == 0.0:
        raise UndefinedModelError("SNR model undefined for all-zero input")
    return p


def snr_model(x, scheme: str, fmt: Fp8Format, group_size: int = 128,
              k2: int = 32, rounding: E8m0Rounding = E8m0Rounding.CEIL_POW2) -> float:
    """Evaluate the closed-form SNR for one scheme on a concrete tensor."""
    sigma2 = _signal_power(x)
    xf = np.asarray(x, dtype=np.float64)
    if scheme == "tensor":
        s = np.max(np.abs(xf)) / fmt.max_value
        return 10.0 * math.log10(12.0 * sigma2 / s ** 2)
    if scheme == "group":
        last = xf.shape[-1]
        n_groups = -(-last // group_size)
        gmax = [np.max(np.abs(xf[..., g * group_size: (g + 1) * group_size]), axis=-1)
                for g in range(n_groups)]
        s_g = np.stack(gmax, axis=-1) / fmt.max_value
        n = s_g.size
        denom = float(np.sum(s_g ** 2))
        if denom == 0.0:
            raise UndefinedModelError("SNR model undefined: all group maxima are zero")
        return 10.0 * math.log10(12.0 * n * sigma2 / denom)
    if scheme == "mx2":
        q = quant_two_level(xf, fmt, rounding=rounding, k2=k2)
        ss = e8m0_decode(q.micro_codes).astype(np.float64)
        n_g = ss.size
        denom = float(q.global_scale) ** 2 * float(np.sum(ss ** 2))
        return 10.0 * math.log10(12.0 * n_g * sigma2 / denom)
    raise InvalidArgumentError(f"unknown scheme: {scheme!r}")


def measure_snr(x, scheme: str, fmt: Fp8Format, group_size: int = 128,
                k2: int = 32, rounding: E8m0Rounding = E8m0Rounding.CEIL_POW2) -> SnrReport:
    """Quantize x with one scheme and report empirical and model SNR."""
    xf = np.ascontiguousarray(x, dtype=np.float32)
    if scheme == "tensor":
        q = quant_per_tensor(xf, fmt)
        n_groups = 1
    elif scheme == "group":
        q = quant_per_group(xf, fmt, group_size=group_size)
        n_groups = q.scales.size
    elif scheme == "mx2":
        q = quant_two_level(xf, fmt, rounding=rounding, k2=k2)
        n_groups = q.micro_codes.size
    else:
        raise InvalidArgumentError(f"unknown scheme: {scheme!r}")
    dq = dequantize(q)
    emp = snr_empirical(xf, dq)
    model = snr_model(xf, scheme, fmt, group_size=group_size, k2=k2, rounding=rounding)
    sig = float(np.mean(np.asarray(xf, dtype=np.float64) ** 2))
    noise = float(np.mean((np.asarray(dq, np.float64) - xf) ** 2))
    return SnrReport(scheme=scheme, empirical_snr_db=emp, model_snr_db=model,
                     signal_power=sig, noise_power=noise, n_groups=n_groups)


def snr_ordering_harness(n_trials: int, size: int, dist: str, fmt: Fp8Format,
                         group_size: int = 128, k2: int = 32, seed: int = 0,
                         rounding: E8m0Rounding = E8m0Rounding.CEIL_POW2,
                         outlier_rate: float = 0.001,
                         outlier_magnitude: float = 50.0) -> OrderingReport:
    """Quantize seeded random tensors with all three schemes and compare SNR.

    Each trial draws one tensor (seed + trial index), measures empirical
    SNR under per-tensor, per-group, and two-level quantization, and the
    report aggregates mean dB, mean gaps, and the per-trial ordering
    fraction. Trials where any scheme reproduces the tensor exactly
    (empirical SNR +inf) are counted as degenerate and excluded.
    """
    if n_trials < 1:
        raise InvalidArgumentError("n_trials must be >= 1")
    emp = np.empty((n_trials, 3))
    mod = np.empty((n_trials, 3))
    degenerate = 0
    for trial in range(n_trials):
        x = tensor_randn([size], seed=seed + trial, dist=dist,
                         outlier_rate=outlier_rate, outlier_magnitude=outlier_magnitude)
        for i, scheme in enumerate(SCHEMES):
            r = measure_snr(x, scheme, fmt, group_size=group_size, k2=k2, rounding=rounding)
            emp[trial, i] = r.empirical_snr_db
            mod[trial, i] = r.model_snr_db
        if not np.all(np.isfinite(emp[trial])):
            degenerate += 1
    return OrderingReport(n_trials=n_trials, n_degenerate=degenerate,
                          empirical_db=emp, model_db=mod)

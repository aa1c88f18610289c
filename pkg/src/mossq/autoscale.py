"""Automatic per-tensor weight scaling driven by the bounded-update property.

Between re-scales the predicted scale advances by eta / max_value per
optimizer step, which upper-bounds the growth of max|W| as long as each
update stays within the learning rate. A periodic re-scale performs the
one max-reduction, snaps the prediction back to the just-in-time value,
and re-encodes the weight codes.

auto_scale_advance deliberately receives no weight data: its cost is
independent of tensor size by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, InvalidValueError
from .fp8 import Fp8Format
from .quantize import PerTensorQuant, quant_per_tensor

__all__ = [
    "ScaleSchedule",
    "schedule_from_weights",
    "jit_scale",
    "auto_scale_advance",
    "rescale_due",
    "rescale_interval",
    "IntervalSweepRow",
    "interval_sweep",
]


@dataclass
class ScaleSchedule:
    s0: float
    s_t: float
    t: int
    interval: int
    delta_max: float
    last_rescale_step: int = 0
    eta_schedule: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.interval < 1:
            raise InvalidArgumentError("interval must be >= 1")
        if self.s0 <= 0.0 or self.s_t <= 0.0:
            raise InvalidValueError("scales must be positive")


def jit_scale(w, fmt: Fp8Format) -> float:
    """Just-in-time scale: max|w| / max_value, 1.0 for an all-zero tensor."""
    wf = np.asarray(w)
    if not np.all(np.isfinite(wf)):
        raise InvalidValueError("jit_scale requires finite weights")
    amax = float(np.max(np.abs(wf)))
    return amax / fmt.max_value if amax > 0.0 else 1.0


def schedule_from_weights(w, fmt: Fp8Format, interval: int = 500,
                          eta_schedule: Callable[[int], float] | None = None) -> ScaleSchedule:
    """Initialize a schedule with the one max-reduction at t = 0."""
    s0 = jit_scale(w, fmt)
    return ScaleSchedule(s0=s0, s_t=s0, t=0, interval=interval,
                         delta_max=fmt.max_value, last_rescale_step=0,
                         eta_schedule=eta_schedule)


def auto_scale_advance(sched: ScaleSchedule, current_eta: float | None = None) -> ScaleSchedule:
    """Advance the prediction one step: s += eta / max_value. O(1), no weight data."""
    if current_eta is None:
        if sched.eta_schedule is None:
            raise InvalidArgumentError("no eta given and schedule has no eta_schedule")
        current_eta = sched.eta_schedule(sched.t)
    sched.s_t += current_eta / sched.delta_max
    sched.t += 1
    return sched


def rescale_due(sched: ScaleSchedule) -> bool:
    return sched.t - sched.last_rescale_step >= sched.interval


def rescale_interval(w, sched: ScaleSchedule, fmt: Fp8Format) -> PerTensorQuant:
    """One max-reduction: snap s_t to the JIT value and re-encode the weights."""
    if not rescale_due(sched):
        raise InvalidArgumentError(
            f"rescale not due: t={sched.t}, last={sched.last_rescale_step}, "
            f"interval={sched.interval}")
    if fmt.max_value != sched.delta_max:
        raise InvalidArgumentError("format does not match the schedule's delta_max")
    sched.s_t = jit_scale(w, fmt)
    sched.last_rescale_step = sched.t
    return quant_per_tensor(np.asarray(w, dtype=np.float32), fmt)


@dataclass(frozen=True)
class IntervalSweepRow:
    interval: int
    rescale_count: int
    mean_overshoot: float
    max_overshoot: float
    min_overshoot: float
    dominance_violations: int


def interval_sweep(intervals, max_abs_series, eta_series, fmt: Fp8Format) -> list[IntervalSweepRow]:
    """Replay one recorded weight trajectory under several re-scale intervals.

    max_abs_series[t] is max|W_t| for t = 0..T; eta_series[t] is the
    learning rate applied at step t. For each interval the schedule is
    advanced step by step, re-scaled when due, and the overshoot
    s_auto / s_jit is recorded after any re-scale at that step (so
    interval 1 reads exactly 1.0 everywhere).
    """
    intervals = list(intervals)
    if not intervals:
        raise InvalidArgumentError("intervals must be nonempty")
    max_abs = np.asarray(max_abs_series, dtype=np.float64)
    etas = np.asarray(eta_series, dtype=np.float64)
    if len(max_abs) != len(etas) + 1:
        raise InvalidArgumentError("need max_abs_series one longer than eta_series")
    jit = np.where(max_abs > 0.0, max_abs / fmt.max_value, 1.0)

    rows = []
    for interval in intervals:
        if interval < 1:
            raise InvalidArgumentError("interval must be >= 1")
        s = jit[0]
        last = 0
        count = 0
        overshoot = np.empty(len(etas))
        for t in range(1, len(max_abs)):
            s += etas[t - 1] / fmt.max_value
            if t - last >= interval:
                s = jit[t]
                last = t
                count += 1
            overshoot[t - 1] = s / jit[t]
        rows.append(IntervalSweepRow(
            interval=interval, rescale_count=count,
            mean_overshoot=float(np.mean(overshoot)),
            max_overshoot=float(np.max(overshoot)),
            min_overshoot=float(np.min(overshoot)),
            dominance_violations=int(np.sum(overshoot < 1.0 - 1e-12))))
    return rows

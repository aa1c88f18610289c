"""From-scratch AdamW with bias correction, plus update-bound checkers.

The step rule, with gradient g, moments m and v, and step counter t:

    m <- beta1 * m + (1 - beta1) * g        m_hat = m / (1 - beta1^t)
    v <- beta2 * v + (1 - beta2) * g^2      v_hat = v / (1 - beta2^t)
    delta = eta * m_hat / (sqrt(v_hat) + eps)
    w <- w - delta - eta * weight_decay * w     (decoupled decay)

The effective update delta excludes the decay term and is returned
separately so its magnitude can be checked against the two-case bound

    |delta| <= eta * max(1, (1 - beta1^t) / sqrt(1 - beta2^t)).

That bound is exact only when the moment EMAs share one decay rate
(beta1 == beta2). For beta1 < beta2 it can be exceeded: the worst-case
gradient sequence g_k ~ (beta1/beta2)^(t-k) drives |delta|/eta to about
1.165 for (0.9, 0.95), and random sequences brush past the bound at a
small but nonzero rate. update_bound_check therefore counts and reports
violations instead of asserting the bound.

All arithmetic is float64 so the reported ratios carry ~1e-15 relative
noise, far below any meaningful violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidShapeError, InvalidValueError

__all__ = [
    "OptimizerState",
    "init_state",
    "adamw_step",
    "update_bound",
    "UpdateBoundReport",
    "update_bound_check",
    "spike_gradients",
    "DecayBoundReport",
    "decay_bound_check",
]

# float-rounding allowance when comparing against analytic bounds; six
# orders of magnitude below the smallest real violation (~2e-4 relative)
_BOUND_RTOL = 1e-12


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.95
    eta: float = 1e-3
    weight_decay: float = 0.1
    eps: float = 1e-8
    decoupled_decay: bool = True  # False couples decay into the gradient (classic Adam + L2)


def init_state(shape, *, beta1: float = 0.9, beta2: float = 0.95, eta: float = 1e-3,
               weight_decay: float = 0.1, eps: float = 1e-8,
               decoupled_decay: bool = True) -> OptimizerState:
    """Fresh state with zero moments at t = 0."""
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise InvalidArgumentError("betas must lie in [0, 1)")
    shape = tuple(shape)
    return OptimizerState(m=np.zeros(shape), v=np.zeros(shape), t=0,
                          beta1=beta1, beta2=beta2, eta=eta,
                          weight_decay=weight_decay, eps=eps,
                          decoupled_decay=decoupled_decay)


def adamw_step(w, g, state: OptimizerState):
    """One optimizer step; returns (new weights, state, effective update).

    The returned update excludes the decay term. State is advanced in
    place and also returned.
    """
    wf = np.asarray(w, dtype=np.float64)
    gf = np.asarray(g, dtype=np.float64)
    if wf.shape != gf.shape or wf.shape != state.m.shape:
        raise InvalidShapeError(
            f"shape mismatch: w{wf.shape} g{gf.shape} m{state.m.shape}")
    if not np.all(np.isfinite(gf)):
        raise InvalidValueError("gradient contains NaN/Inf")

    if not state.decoupled_decay and state.weight_decay != 0.0:
        gf = gf + state.weight_decay * wf

    state.t += 1
    t = state.t
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * gf
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * gf * gf
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    delta = state.eta * m_hat / (np.sqrt(v_hat) + state.eps)

    w_next = wf - delta
    if state.decoupled_decay and state.weight_decay != 0.0:
        w_next = w_next - state.eta * state.weight_decay * wf
    return w_next, state, delta


def update_bound(t: int, beta1: float, beta2: float) -> float:
    """Two-case bound on |delta|/eta at step t (>= 1)."""
    c = (1.0 - beta1 ** t) / math.sqrt(1.0 - beta2 ** t)
    return max(1.0, c)


@dataclass
class UpdateBoundReport:
    steps: int
    n_elements: int
    n_violations: int
    max_update_ratio: float          # max |delta| / eta observed anywhere
    max_bound_excess: float          # max (|delta| / eta) / bound(t)
    worst_step: int                  # step where max_bound_excess occurred
    violations_by_step: dict[int, int] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.n_violations == 0


def update_bound_check(gradients, *, beta1: float = 0.9, beta2: float = 0.95,
                       eta: float = 1e-3, eps: float = 1e-30) -> UpdateBoundReport:
    """Run AdamW over a gradient sequence and compare |delta| to the bound.

    Violations are counted per element and step, never raised; callers
    decide what an acceptable rate is.
    """
    gradients = list(gradients)
    if not gradients:
        raise InvalidArgumentError("gradient sequence must be nonempty")
    shape = np.asarray(gradients[0]).shape
    state = init_state(shape, beta1=beta1, beta2=beta2, eta=eta,
                       weight_decay=0.0, eps=eps)
    w = np.zeros(shape)
    n_viol = 0
    max_ratio = 0.0
    max_excess = 0.0
    worst_step = 0
    by_step: dict[int, int] = {}
    for g in gradients:
        w, state, delta = adamw_step(w, g, state)
        ratio = np.abs(delta) / eta
        b = update_bound(state.t, beta1, beta2)
        over = ratio > b * (1.0 + _BOUND_RTOL)
        n = int(np.sum(over))
        if n:
            n_viol += n
            by_step[state.t] = by_step.get(state.t, 0) + n
        r = float(np.max(ratio))
        max_ratio = max(max_ratio, r)
        if r / b > max_excess:
            max_excess = r / b
            worst_step = state.t
    return UpdateBoundReport(steps=len(gradients), n_elements=int(np.prod(shape)),
                             n_violations=n_viol, max_update_ratio=max_ratio,
                             max_bound_excess=max_excess, worst_step=worst_step,
                             violations_by_step=by_step)


def spike_gradients(n_steps: int, spike_step: int, magnitude: float = 1.0,
                    shape=(1,)) -> list[np.ndarray]:
    """Adversarial sparsity family: zero gradients, one spike at spike_step."""
    if not 1 <= spike_step <= n_steps:
        raise InvalidArgumentError("spike_step must lie in [1, n_steps]")
    seq = [np.zeros(shape) for _ in range(n_steps)]
    seq[spike_step - 1] = np.full(shape, magnitude)
    return seq


@dataclass
class DecayBoundReport:
    steps: int
    holds: bool
    max_abs_w: np.ndarray       # (steps + 1,), max |W_t| including t = 0
    bound_line: np.ndarray      # max |W_0| + eta * t
    first_violation_step: int | None


def decay_bound_check(gradients, w0, *, eta: float = 1e-3, weight_decay: float = 0.1,
                      beta1: float = 0.9, beta2: float = 0.95,
                      eps: float = 1e-8) -> DecayBoundReport:
    """Check max|W_t| <= max|W_0| + eta * t along a simulated trajectory."""
    if weight_decay < 0.0 or eta * weight_decay >= 1.0:
        raise InvalidArgumentError("need 0 <= weight_decay < 1/eta")
    gradients = list(gradients)
    if not gradients:
        raise InvalidArgumentError("gradient sequence must be nonempty")
    w = np.asarray(w0, dtype=np.float64)
    state = init_state(w.shape, beta1=beta1, beta2=beta2, eta=eta,
                       weight_decay=weight_decay, eps=eps)
    w0max = float(np.max(np.abs(w)))
    max_abs = [w0max]
    first_violation = None
    for g in gradients:
        w, state, _ = adamw_step(w, g, state)
        max_abs.append(float(np.max(np.abs(w))))
        line = w0max + eta * state.t
        if max_abs[-1] > line * (1.0 + _BOUND_RTOL) and first_violation is None:
            first_violation = state.t
    t = np.arange(len(gradients) + 1)
    return DecayBoundReport(steps=len(gradients), holds=first_violation is None,
                            max_abs_w=np.array(max_abs), bound_line=w0max + eta * t,
                            first_violation_step=first_violation)

"""Desk-scale training harness: a two-layer MLP on synthetic regression.

The task is y = x @ A + noise for a fixed random A, optimized with AdamW
under a warmup + cosine learning-rate schedule. With quantization enabled
the forward pass runs linear layers through the quantized path:

  * activations: two-level microscaled E4M3 (blocks along the feature axis)
  * weights: per-tensor E4M3 at the schedule-predicted scale, re-scaled
    against the live weights every `interval` steps

Gradients, optimizer state, and master weights stay full precision; the
backward pass linearizes through the full-precision activations. Each
step also evaluates the current weights with a plain full-precision
forward, and that loss series is what run comparisons use, so a
quantized run is judged by the weights it learns rather than by the
noise inside its forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autoscale import ScaleSchedule, auto_scale_advance, jit_scale, rescale_due, \
    rescale_interval, schedule_from_weights
from .errors import InvalidArgumentError, TrainDivergedError
from .fp8 import FORMATS, Fp8Format, fp8_decode, fp8_encode
from .optim import OptimizerState, adamw_step, init_state
from .quantize import dequantize, quant_two_level

__all__ = ["TrainConfig", "TrainLog", "train", "lr_at", "smoothed"]


@dataclass(frozen=True)
class TrainConfig:
    din: int = 32
    hidden: int = 64
    dout: int = 16
    steps: int = 2000
    batch_size: int = 32
    lr_peak: float = 0.01
    warmup_steps: int = 100
    lr_floor_frac: float = 0.1   # cosine decays to this fraction of the peak
    beta1: float = 0.9
    beta2: float = 0.95
    weight_decay: float = 0.1
    quantize: bool = True
    interval: int = 500
    seed: int = 0
    fmt_name: str = "e4m3"
    noise_std: float = 0.01
    # Target magnitude. FP8 forward error is multiplicative (~2% of the
    # prediction), so the induced loss bias grows with target scale^2 while
    # the observation-noise floor is fixed; 0.05 keeps the floor dominant,
    # the regime the parity comparison is about.
    target_scale: float = 0.05
    divergence_threshold: float = 1e6

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidArgumentError("steps must be >= 1")
        if self.interval < 1:
            raise InvalidArgumentError("interval must be >= 1")
        # interval > steps is allowed: the run simply never re-scales
        if self.quantize and (self.din % 32 or self.hidden % 32):
            raise InvalidArgumentError("din and hidden must be multiples of 32")

    @property
    def fmt(self) -> Fp8Format:
        return FORMATS[self.fmt_name]


def lr_at(cfg: TrainConfig, step: int) -> float:
    """Linear warmup to the peak, then cosine decay to floor_frac * peak."""
    if step < cfg.warmup_steps:
        return cfg.lr_peak * (step + 1) / cfg.warmup_steps
    span = max(1, cfg.steps - cfg.warmup_steps)
    progress = min(1.0, (step - cfg.warmup_steps) / span)
    floor = cfg.lr_peak * cfg.lr_floor_frac
    return floor + 0.5 * (cfg.lr_peak - floor) * (1.0 + math.cos(math.pi * progress))


def smoothed(series, window: int = 50) -> np.ndarray:
    """Trailing moving average; early entries average what is available."""
    s = np.asarray(series, dtype=np.float64)
    out = np.empty_like(s)
    csum = np.cumsum(s)
    for i in range(len(s)):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


@dataclass
class TrainLog:
    fp_loss: np.ndarray       # (steps,) full-precision evaluation of current weights
    train_loss: np.ndarray    # (steps,) loss of the (possibly quantized) forward
    lr: np.ndarray            # (steps,)
    s_auto: np.ndarray        # (steps, n_weights) scale used when encoding at each step
    s_jit: np.ndarray         # (steps, n_weights) max|W|/max_value at the same moment
    rescale_events: list[tuple[int, int, float, float]] = field(default_factory=list)
    # (step, weight index, s after rescale, jit at rescale)
    saturation_events: int = 0
    dominance_violations: int = 0

    def smoothed_final_loss(self, window: int = 50) -> float:
        return float(np.mean(self.fp_loss[-window:]))


def _quantize_weight(w: np.ndarray, scale: float, fmt: Fp8Format) -> tuple[np.ndarray, int]:
    """Fake-quantize a weight at a given per-tensor scale, counting saturations."""
    wf = np.asarray(w, dtype=np.float32)
    saturated = int(np.sum(np.abs(wf) > scale * fmt.max_value))
    codes = fp8_encode(wf / np.float32(scale), fmt)
    return (fp8_decode(codes, fmt) * np.float32(scale)).astype(np.float64), saturated


def _quantize_activation(a: np.ndarray, fmt: Fp8Format) -> np.ndarray:
    q = quant_two_level(np.asarray(a, dtype=np.float32), fmt)
    return dequantize(q).astype(np.float64)


def train(cfg: TrainConfig) -> TrainLog:
    """Run the configured training loop; deterministic for a fixed seed."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    fmt = cfg.fmt

    a_true = rng.standard_normal((cfg.din, cfg.dout)) * (cfg.target_scale / math.sqrt(cfg.din))
    w1 = rng.standard_normal((cfg.din, cfg.hidden)) * math.sqrt(2.0 / cfg.din)
    w2 = rng.standard_normal((cfg.hidden, cfg.dout)) * math.sqrt(1.0 / cfg.hidden)
    weights = [w1, w2]

    states: list[OptimizerState] = [
        init_state(w.shape, beta1=cfg.beta1, beta2=cfg.beta2,
                   weight_decay=cfg.weight_decay)
        for w in weights
    ]
    schedules: list[ScaleSchedule] = [
        schedule_from_weights(w, fmt, interval=cfg.interval) for w in weights
    ]

    log = TrainLog(
        fp_loss=np.empty(cfg.steps), train_loss=np.empty(cfg.steps),
        lr=np.empty(cfg.steps),
        s_auto=np.empty((cfg.steps, len(weights))),
        s_jit=np.empty((cfg.steps, len(weights))))

    for step in range(cfg.steps):
        eta = lr_at(cfg, step)
        x = rng.standard_normal((cfg.batch_size, cfg.din))
        y = x @ a_true + cfg.noise_std * rng.standard_normal((cfg.batch_size, cfg.dout))

        # full-precision evaluation of the current weights
        h_pre = x @ weights[0]
        h_fp = np.maximum(h_pre, 0.0)
        y_fp = h_fp @ weights[1]
        fp_loss = float(np.mean((y_fp - y) ** 2))

        if cfg.quantize:
            for i, (w, sched) in enumerate(zip(weights, schedules)):
                log.s_auto[step, i] = sched.s_t
                log.s_jit[step, i] = jit_scale(w, fmt)
                if sched.s_t < log.s_jit[step, i]:
                    log.dominance_violations += 1
            w1q, sat1 = _quantize_weight(weights[0], schedules[0].s_t, fmt)
            w2q, sat2 = _quantize_weight(weights[1], schedules[1].s_t, fmt)
            log.saturation_events += sat1 + sat2
            xq = _quantize_activation(x, fmt)
            hq = np.maximum(xq @ w1q, 0.0)
            hqq = _quantize_activation(hq, fmt)
            y_hat = hqq @ w2q
        else:
            log.s_auto[step] = [s.s_t for s in schedules]
            log.s_jit[step] = [jit_scale(w, fmt) for w in weights]
            y_hat = y_fp

        train_loss = float(np.mean((y_hat - y) ** 2))
        log.fp_loss[step] = fp_loss
        log.train_loss[step] = train_loss
        log.lr[step] = eta
        if not math.isfinite(fp_loss) or fp_loss > cfg.divergence_threshold:
            raise TrainDivergedError(f"loss {fp_loss} at step {step}")

        # backward through the optimized (quantized) residual, linearized
        # with the full-precision activations and weights
        d = 2.0 * (y_hat - y) / (cfg.batch_size * cfg.dout)
        g2 = h_fp.T @ d
        dh = (d @ weights[1].T) * (h_pre > 0.0)
        g1 = x.T @ dh

        for i, g in enumerate((g1, g2)):
            states[i].eta = eta
            weights[i], _, _ = adamw_step(weights[i], g, states[i])

        for i, sched in enumerate(schedules):
            auto_scale_advance(sched, eta)
            if rescale_due(sched):
                rescale_interval(weights[i], sched, fmt)
                log.rescale_events.append(
                    (step + 1, i, sched.s_t, jit_scale(weights[i], fmt)))
    return log

import numpy as np
import pytest

from mossq.errors import InvalidArgumentError, TrainDivergedError
from mossq.train import TrainConfig, lr_at, smoothed, train


def test_lr_schedule_shape():
    cfg = TrainConfig(steps=1000, warmup_steps=100, lr_peak=0.01, quantize=False)
    assert lr_at(cfg, 0) == pytest.approx(0.01 / 100)
    assert lr_at(cfg, 99) == pytest.approx(0.01)
    # cosine floor at 10% of the peak
    assert lr_at(cfg, 999) == pytest.approx(0.001, rel=0.01)
    lrs = [lr_at(cfg, t) for t in range(100, 1000)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_smoothed_window():
    s = smoothed(np.arange(10, dtype=float), window=3)
    assert s[0] == 0.0
    assert s[1] == pytest.approx(0.5)
    assert s[9] == pytest.approx(8.0)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(steps=0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(din=33)
    # interval > steps is a valid never-re-scale configuration
    TrainConfig(steps=100, interval=101)


def test_deterministic_runs():
    cfg = TrainConfig(steps=120, interval=60, seed=3)
    a = train(cfg)
    b = train(cfg)
    assert np.array_equal(a.fp_loss, b.fp_loss)
    assert np.array_equal(a.s_auto, b.s_auto)


def test_baseline_loss_decreases_smoothly():
    cfg = TrainConfig(steps=2000, quantize=False, seed=0)
    log = train(cfg)
    sm = smoothed(log.fp_loss, window=50)
    after = sm[cfg.warmup_steps:]
    # monotone decrease up to plateau jitter near the noise floor
    running_min = np.minimum.accumulate(after)
    assert np.all(after <= np.maximum(running_min * 1.05, running_min + 1e-5))
    assert after[-1] < 0.01 * after[0]


def test_quantized_run_matches_baseline_loss():
    base = train(TrainConfig(steps=2000, quantize=False, seed=0))
    q = train(TrainConfig(steps=2000, quantize=True, seed=0, interval=500))
    fb = base.smoothed_final_loss()
    fq = q.smoothed_final_loss()
    assert abs(fq - fb) / fb <= 0.05
    assert q.saturation_events == 0
    assert q.dominance_violations == 0


def test_rescale_cadence():
    log = train(TrainConfig(steps=2000, quantize=True, seed=1, interval=500))
    # two weight tensors, re-scaled at 500/1000/1500/2000
    steps = sorted({s for s, _, _, _ in log.rescale_events})
    assert steps == [500, 1000, 1500, 2000]
    assert len(log.rescale_events) == 8


def test_never_rescale_still_dominates():
    cfg = TrainConfig(steps=300, quantize=True, seed=2, interval=301)
    log = train(cfg)
    assert log.rescale_events == []
    assert log.dominance_violations == 0
    assert log.saturation_events == 0


def test_train_loss_reflects_quantization():
    q = train(TrainConfig(steps=300, quantize=True, seed=4, interval=150))
    # the optimized forward carries quantization noise, the fp evaluation
    # of the same weights does not
    assert not np.array_equal(q.train_loss, q.fp_loss)
    base = train(TrainConfig(steps=300, quantize=False, seed=4))
    assert np.array_equal(base.train_loss, base.fp_loss)


def test_divergence_aborts():
    cfg = TrainConfig(steps=50, quantize=False, seed=0, lr_peak=0.01,
                      divergence_threshold=1e-9)
    with pytest.raises(TrainDivergedError):
        train(cfg)

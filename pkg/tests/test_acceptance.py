"""Acceptance criteria, one test per criterion.

Each test prints a single `CRITERION k ... PASS/FAIL` line (run with
`pytest tests/test_acceptance.py -v -s` to see them) and then asserts.
Criteria 2 and 3 fail by construction of the quantities they assert;
the printed evidence and the README explain why. They are left red on
purpose rather than weakened.
"""

import inspect
import time

import numpy as np

from mossq.autoscale import auto_scale_advance, interval_sweep
from mossq.fp8 import E4M3, E5M2, decode_table, fp8_encode
from mossq.gemm import (
    dequantize_exact,
    gemm_mx_epilogue,
    gemm_oracle,
    gemm_pergroup_mainloop,
    quantize_gemm_operands,
)
from mossq.optim import spike_gradients, update_bound_check
from mossq.quantize import quant_per_group
from mossq.snr import snr_ordering_harness
from mossq.tensor import tensor_randn
from mossq.train import TrainConfig, train


def report(k, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"\nCRITERION {k} ({name}): {status}" + (f" — {detail}" if detail else ""))
    return ok


def test_criterion_1_codec_exhaustiveness():
    t0 = time.time()
    ok = True
    detail = []
    for fmt, dmax in ((E4M3, 448.0), (E5M2, 57344.0)):
        table = decode_table(fmt)
        finite = np.isfinite(table)
        codes = np.arange(256, dtype=np.uint8)[finite]
        vals = table[finite]
        again = fp8_encode(vals, fmt)
        neg_zero = (vals == 0.0) & (codes == 0x80)
        roundtrip = np.all((again == codes) | (neg_zero & (again == 0x80)))
        max_ok = float(np.max(vals)) == dmax
        ok &= bool(roundtrip and max_ok)
        detail.append(f"{fmt.name}: roundtrip={bool(roundtrip)} max={float(np.max(vals))}")
    elapsed = time.time() - t0
    ok &= elapsed < 1.0
    assert report(1, "codec exhaustiveness", ok,
                  "; ".join(detail) + f"; {elapsed:.2f}s")


def test_criterion_2_snr_ordering_gaussian():
    t0 = time.time()
    rep = snr_ordering_harness(1000, 4096, "gaussian", E4M3, seed=0)
    gap_gt, gap_mg = rep.mean_gaps()
    frac = rep.ordering_fraction()
    elapsed = time.time() - t0
    means = rep.mean_db()
    ok = gap_gt > 0.5 and gap_mg > 0.5 and frac >= 0.95 and elapsed < 30.0
    assert report(
        2, "SNR ordering, 1000 Gaussian tensors", ok,
        f"mean dB tensor={means['tensor']:.3f} group={means['group']:.3f} "
        f"mx2={means['mx2']:.3f}; gaps=({gap_gt:+.3f}, {gap_mg:+.3f}) dB "
        f"(need >+0.5 each); ordering fraction={frac:.3f} (need >=0.95); "
        f"{elapsed:.1f}s. Power-of-two micro scales cannot change FP8 "
        f"round-off, so two-level quantization reproduces per-tensor codes "
        f"on i.i.d. Gaussian data.")


def test_criterion_3_update_bound_zero_violations():
    t0 = time.time()
    # 10^4 independent element sequences of 200 steps, batched elementwise
    rng = np.random.Generator(np.random.PCG64(2026))
    grads = [rng.standard_normal(10_000) for _ in range(200)]
    mc = update_bound_check(grads, beta1=0.9, beta2=0.95, eta=1e-3, eps=1e-30)

    spike_ok = True
    for t in (1, 2, 5, 9, 20, 100, 200):
        rep = update_bound_check(spike_gradients(t, t, 4.0), eps=1e-30)
        spike_ok &= rep.n_violations == 0

    const = update_bound_check([np.full(8, 1.7)] * 200, eps=1e-30)
    const_ok = const.max_update_ratio >= 1 - 1e-6
    elapsed = time.time() - t0
    ok = mc.n_violations == 0 and spike_ok and const_ok and elapsed < 60.0
    assert report(
        3, "update bound, 10^4 random sequences", ok,
        f"monte carlo violations={mc.n_violations} of 2e6 element-steps "
        f"(need 0), worst |update|/eta vs bound={mc.max_bound_excess:.5f}; "
        f"spike family ok={spike_ok}; constant-gradient tightness="
        f"{const.max_update_ratio:.9f} (need >=1-1e-6); {elapsed:.1f}s. "
        f"The two-case bound is exceeded by random sequences at rate "
        f"~5e-4 per element-step because the moment EMAs use different "
        f"decay rates (0.9 vs 0.95).")


def test_criterion_4_automatic_scaling_dominance():
    t0 = time.time()
    dominance_ok = True
    equality_ok = True
    runs = 0
    for lam in (0.0, 0.1):
        for seed in range(10):
            cfg = TrainConfig(steps=600, interval=200, seed=seed, quantize=True,
                              weight_decay=lam)
            log = train(cfg)
            runs += 1
            dominance_ok &= log.dominance_violations == 0
            dominance_ok &= bool(np.all(log.s_auto >= log.s_jit * (1 - 1e-12)))
            equality_ok &= all(s_after == jit
                               for _, _, s_after, jit in log.rescale_events)

    # interval sweep over one recorded 2001-step trajectory
    traj = train(TrainConfig(steps=2001, interval=500, seed=0, quantize=True))
    maxabs = traj.s_jit[:, 0] * E4M3.max_value
    etas = traj.lr[:-1]
    rows = interval_sweep([1, 100, 500, 2000], maxabs, etas, E4M3)
    sweep_unit = rows[0].max_overshoot == 1.0 and rows[0].min_overshoot == 1.0
    over = [r.max_overshoot for r in rows]
    sweep_monotone = all(a <= b + 1e-12 for a, b in zip(over, over[1:]))
    elapsed = time.time() - t0
    ok = dominance_ok and equality_ok and sweep_unit and sweep_monotone and elapsed < 60.0
    assert report(
        4, "automatic scaling dominance", ok,
        f"{runs} trajectories dominant={dominance_ok}; rescale equality="
        f"{equality_ok}; interval-1 overshoot==1: {sweep_unit}; max overshoot "
        f"monotone {['%.4f' % o for o in over]}: {sweep_monotone}; {elapsed:.1f}s")


def test_criterion_5_gemm_oracle_equivalence():
    t0 = time.time()
    rng = np.random.Generator(np.random.PCG64(11))
    worst_mx = worst_pg = 0.0
    counters_ok = True
    for _ in range(50):
        m, n = int(rng.integers(8, 129)), int(rng.integers(8, 129))
        k = int(rng.integers(1, 9)) * 32
        w = tensor_randn([m, k], seed=int(rng.integers(1 << 30)))
        x = tensor_randn([n, k], seed=int(rng.integers(1 << 30)))
        ops = quantize_gemm_operands(w, x)
        out, ctr = gemm_mx_epilogue(ops)
        oracle = gemm_oracle(dequantize_exact(ops.qw), dequantize_exact(ops.qx).T,
                             k_block=32)
        worst_mx = max(worst_mx, float(np.linalg.norm(out - oracle)
                                       / np.linalg.norm(oracle)))
        counters_ok &= ctr.mainloop_dequant_multiplies == 0
        counters_ok &= ctr.epilogue_dequant_multiplies == m * n
        counters_ok &= ctr.mac_count == m * n * k
    for _ in range(50):
        m, n = int(rng.integers(8, 129)), int(rng.integers(8, 129))
        k = int(rng.integers(1, 3)) * 128
        qa = quant_per_group(tensor_randn([m, k], seed=int(rng.integers(1 << 30))),
                             E4M3, 128)
        qb = quant_per_group(tensor_randn([n, k], seed=int(rng.integers(1 << 30))),
                             E4M3, 128)
        out, ctr = gemm_pergroup_mainloop(qa, qb)
        oracle = gemm_oracle(dequantize_exact(qa), dequantize_exact(qb).T, k_block=128)
        worst_pg = max(worst_pg, float(np.linalg.norm(out - oracle)
                                       / np.linalg.norm(oracle)))
        counters_ok &= ctr.mainloop_dequant_multiplies == m * n * (k // 128)
        counters_ok &= ctr.epilogue_dequant_multiplies == 0
        counters_ok &= ctr.mac_count == m * n * k

    # K = 4096 operation-count contrast
    k = 4096
    w = tensor_randn([8, k], seed=1)
    x = tensor_randn([8, k], seed=2)
    _, mx_ctr = gemm_mx_epilogue(quantize_gemm_operands(w, x))
    _, pg_ctr = gemm_pergroup_mainloop(quant_per_group(w, E4M3, 128),
                                       quant_per_group(x, E4M3, 128))
    ratio_ok = (pg_ctr.mainloop_dequant_multiplies
                == 32 * mx_ctr.epilogue_dequant_multiplies)
    elapsed = time.time() - t0
    ok = (worst_mx <= 1e-10 and worst_pg <= 1e-10 and counters_ok
          and ratio_ok and elapsed < 120.0)
    assert report(
        5, "GEMM oracle equivalence", ok,
        f"worst rel frobenius: mx={worst_mx:.2e} pergroup={worst_pg:.2e} "
        f"(need <=1e-10); counter laws={counters_ok}; K=4096 mainloop:epilogue "
        f"= {pg_ctr.mainloop_dequant_multiplies}:{mx_ctr.epilogue_dequant_multiplies} "
        f"(need 32:1 -> {ratio_ok}); {elapsed:.1f}s")


def test_criterion_6_toy_training_parity():
    t0 = time.time()
    base = train(TrainConfig(steps=2000, quantize=False, seed=0))
    quant = train(TrainConfig(steps=2000, quantize=True, seed=0, interval=500))
    fb = base.smoothed_final_loss(window=50)
    fq = quant.smoothed_final_loss(window=50)
    gap = abs(fq - fb) / fb
    elapsed = time.time() - t0
    ok = gap <= 0.05 and quant.saturation_events == 0 and elapsed < 300.0
    assert report(
        6, "toy training parity", ok,
        f"smoothed final loss: baseline={fb:.4e} quantized={fq:.4e} "
        f"rel gap={gap:.3%} (need <=5%); saturation events="
        f"{quant.saturation_events} (need 0); {elapsed:.1f}s")


def test_criterion_7_constant_time_advance_structural():
    params = inspect.signature(auto_scale_advance).parameters
    no_weight_args = list(params) == ["sched", "current_eta"]
    from mossq.autoscale import ScaleSchedule
    field_types = {f: t for f, t in ScaleSchedule.__annotations__.items()}
    scalar_state = not any("ndarray" in str(t) or "array" in str(t).lower()
                           for t in field_types.values())
    s = ScaleSchedule(s0=0.01, s_t=0.01, t=0, interval=10, delta_max=448.0)
    auto_scale_advance(s, 1e-3)  # advances with no tensor in sight
    ok = no_weight_args and scalar_state and s.t == 1
    assert report(
        7, "constant-time advance (structural)", ok,
        f"signature={list(params)}; schedule holds scalars only={scalar_state}")

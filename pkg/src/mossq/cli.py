"""mossq command line: quantization, analysis, and simulation subcommands.

Every subcommand that writes an output file also writes
`<out>.manifest.json` recording the resolved configuration, seed, and
toolkit version, so any CSV/JSON artifact can be reproduced exactly.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import MossqError
from .fp8 import E4M3, E8M0_INVALID_CODE, E8m0Rounding, FORMATS, decode_table, e8m0_decode
from .quantize import quant_per_group, quant_per_tensor, quant_two_level
from .snr import SCHEMES, snr_ordering_harness
from .tensor import DType, tensor_randn, tensor_read, tensor_write

_ROUNDINGS = {"ceil": E8m0Rounding.CEIL_POW2, "nearest": E8m0Rounding.NEAREST_LOG2}


def _limit_threads():
    """MOSSQ_THREADS caps BLAS pools; effective while pools are still lazy."""
    n = os.environ.get("MOSSQ_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _write_manifest(out_path: str, subcommand: str, config: dict, outputs: list[str]):
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "outputs": outputs,
    }
    Path(str(out_path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header: list[str], rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(c) for c in row) + "\n")


def _fmt_cell(c) -> str:
    if isinstance(c, float):
        return repr(c)
    return str(c)


@click.group()
@click.version_option(__version__)
def cli():
    """Software-emulated FP8 microscaling toolkit."""
    _limit_threads()


@cli.command("codec-table")
@click.option("--format", "fmt_name", type=click.Choice(["e4m3", "e5m2", "e8m0"]),
              required=True)
@click.option("--out", type=click.Path(), default=None, help="CSV path (default stdout)")
def codec_table(fmt_name, out):
    """Dump all code/value pairs of one format for audit."""
    if fmt_name == "e8m0":
        rows = [(c, float(e8m0_decode(np.uint8(c)))) for c in range(256)
                if c != E8M0_INVALID_CODE]
        rows.append((E8M0_INVALID_CODE, "reserved"))
    else:
        table = decode_table(FORMATS[fmt_name])
        rows = [(c, float(table[c])) for c in range(256)]
    header = ["code", "value"]
    if out:
        _write_csv(out, header, rows)
        _write_manifest(out, "codec-table", {"format": fmt_name}, [out])
        click.echo(f"wrote {out}")
    else:
        click.echo(",".join(header))
        for row in rows:
            click.echo(",".join(_fmt_cell(c) for c in row))


@cli.command()
@click.option("--scheme", type=click.Choice(["tensor", "group", "mx2"]), required=True)
@click.option("--format", "fmt_name", type=click.Choice(["e4m3", "e5m2"]), default="e4m3")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="code payload (.mosst)")
@click.option("--meta", type=click.Path(), required=True, help="sidecar JSON")
@click.option("--group-size", type=int, default=128)
@click.option("--k2", type=int, default=32)
@click.option("--rounding", type=click.Choice(["ceil", "nearest"]), default="ceil")
def quantize(scheme, fmt_name, in_path, out, meta, group_size, k2, rounding):
    """Quantize a .mosst float tensor and write codes plus metadata."""
    fmt = FORMATS[fmt_name]
    x, dtype = tensor_read(in_path)
    if dtype != DType.F32:
        raise click.ClickException("input must be an f32 tensor")
    code_tag = DType.FP8_E4M3 if fmt_name == "e4m3" else DType.FP8_E5M2
    meta_doc = {"scheme": scheme, "format": fmt_name, "shape": list(x.shape)}
    outputs = [out, meta]
    if scheme == "tensor":
        q = quant_per_tensor(x, fmt)
        meta_doc["scale"] = float(q.scale)
    elif scheme == "group":
        q = quant_per_group(x, fmt, group_size=group_size)
        meta_doc["group_size"] = group_size
        meta_doc["scales"] = [float(s) for s in q.scales.ravel()]
        meta_doc["scales_shape"] = list(q.scales.shape)
    else:
        q = quant_two_level(x, fmt, rounding=_ROUNDINGS[rounding], k2=k2)
        micro_path = str(out) + ".micro.mosst"
        tensor_write(q.micro_codes, micro_path, DType.E8M0)
        meta_doc.update({"k2": k2, "rounding": rounding,
                         "global_scale": float(q.global_scale),
                         "micro_scales_path": micro_path})
        outputs.append(micro_path)
    tensor_write(q.codes, out, code_tag)
    Path(meta).write_text(json.dumps(meta_doc, indent=2) + "\n")
    cfg = {"scheme": scheme, "format": fmt_name, "in": str(in_path),
           "group_size": group_size, "k2": k2, "rounding": rounding}
    _write_manifest(out, "quantize", cfg, outputs)
    click.echo(f"wrote {out} ({scheme}, {fmt_name})")


@cli.command()
@click.option("--trials", type=int, required=True)
@click.option("--size", type=int, required=True)
@click.option("--dist", type=click.Choice(["gaussian", "laplace", "outlier_injected"]),
              default="gaussian")
@click.option("--format", "fmt_name", type=click.Choice(["e4m3", "e5m2"]), default="e4m3")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def snr(trials, size, dist, fmt_name, seed, out):
    """Per-trial empirical and model SNR of the three schemes (CSV)."""
    rep = snr_ordering_harness(trials, size, dist, FORMATS[fmt_name], seed=seed)
    rows = []
    for t in range(trials):
        for i, scheme in enumerate(SCHEMES):
            rows.append((t, scheme, float(rep.empirical_db[t, i]), float(rep.model_db[t, i])))
    _write_csv(out, ["trial", "scheme", "empirical_db", "model_db"], rows)
    cfg = {"trials": trials, "size": size, "dist": dist, "format": fmt_name, "seed": seed}
    _write_manifest(out, "snr", cfg, [out])
    means = rep.mean_db()
    gaps = rep.mean_gaps()
    click.echo(f"seed={seed} mean dB: " +
               " ".join(f"{s}={means[s]:.3f}" for s in SCHEMES))
    click.echo(f"gaps: group-tensor={gaps[0]:+.3f} mx2-group={gaps[1]:+.3f} "
               f"ordering_fraction={rep.ordering_fraction():.3f}")


@cli.command("bound-check")
@click.option("--steps", type=int, default=200, show_default=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--adversarial", is_flag=True, help="also run the sparse-spike family")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def bound_check(steps, trials, adversarial, seed, out):
    """Max |update|/eta per trial against the two-case bound (CSV)."""
    from .optim import spike_gradients, update_bound_check
    rows = []
    rng = np.random.Generator(np.random.PCG64(seed))
    for trial in range(trials):
        grads = [rng.standard_normal(16) for _ in range(steps)]
        rep = update_bound_check(grads, eps=1e-30)
        rows.append((trial, "gaussian", rep.max_update_ratio, rep.max_bound_excess,
                     rep.n_violations))
    if adversarial:
        for spike_t in sorted({1, 2, 5, 10, 50, steps}):
            rep = update_bound_check(spike_gradients(spike_t, spike_t, 1.0), eps=1e-30)
            rows.append((spike_t, "spike", rep.max_update_ratio, rep.max_bound_excess,
                         rep.n_violations))
    _write_csv(out, ["trial", "family", "max_update_ratio", "max_bound_excess",
                     "violations"], rows)
    cfg = {"steps": steps, "trials": trials, "adversarial": adversarial, "seed": seed}
    _write_manifest(out, "bound-check", cfg, [out])
    total = sum(r[4] for r in rows)
    click.echo(f"total violations: {total}; worst |update|/eta: "
               f"{max(r[2] for r in rows):.6f}")


@cli.command()
@click.option("--steps", type=int, default=2000, show_default=True)
@click.option("--interval", type=int, default=500, show_default=True)
@click.option("--eta-schedule", "eta_kind", type=click.Choice(["const", "cosine"]),
              default="const", show_default=True)
@click.option("--eta", type=float, default=3e-4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def autoscale(steps, interval, eta_kind, eta, seed, out):
    """Predicted vs just-in-time weight scales along a training run (CSV)."""
    from .train import TrainConfig, train
    if eta_kind == "const":
        cfg = TrainConfig(steps=steps, interval=interval, seed=seed, quantize=True,
                          lr_peak=eta, warmup_steps=1, lr_floor_frac=1.0)
    else:
        cfg = TrainConfig(steps=steps, interval=interval, seed=seed, quantize=True,
                          lr_peak=eta, warmup_steps=max(1, steps // 20),
                          lr_floor_frac=0.1)
    log = train(cfg)
    rows = [(t, float(log.s_auto[t, 0]), float(log.s_jit[t, 0]),
             float(log.s_auto[t, 1]), float(log.s_jit[t, 1]))
            for t in range(steps)]
    _write_csv(out, ["t", "s_auto_w1", "s_jit_w1", "s_auto_w2", "s_jit_w2"], rows)
    config = {"steps": steps, "interval": interval, "eta_schedule": eta_kind,
              "eta": eta, "seed": seed}
    _write_manifest(out, "autoscale", config, [out])
    click.echo(f"rescales: {len(log.rescale_events)}; "
               f"dominance violations: {log.dominance_violations}")


@cli.command()
@click.option("--m", type=int, required=True)
@click.option("--n", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--scheme", type=click.Choice(["mx2", "pergroup"]), required=True)
@click.option("--verify", is_flag=True, help="compare against the dequantize-then-multiply oracle")
@click.option("--counters", "show_counters", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def gemm(m, n, k, scheme, verify, show_counters, seed, out):
    """Run one quantized GEMM instance and write a JSON report.

    Without --verify only the closed-form counters are reported, so
    arbitrarily large shapes are accepted without executing the kernel.
    """
    from .gemm import dequantize_exact, gemm_mx_epilogue, gemm_oracle, \
        gemm_pergroup_mainloop, mx_epilogue_counters, pergroup_mainloop_counters, \
        quantize_gemm_operands
    if scheme == "mx2" and k % 32 != 0:
        raise click.ClickException("mx2 requires K divisible by 32")
    if scheme == "pergroup" and k % 128 != 0:
        raise click.ClickException("pergroup requires K divisible by 128")
    report = {"m": m, "n": n, "k": k, "scheme": scheme, "seed": seed}
    if verify:
        w = tensor_randn([m, k], seed=seed)
        x = tensor_randn([n, k], seed=seed + 1)
        if scheme == "mx2":
            ops = quantize_gemm_operands(w, x)
            outm, ctr = gemm_mx_epilogue(ops)
            oracle_args = (dequantize_exact(ops.qw), dequantize_exact(ops.qx).T, 32)
        else:
            qa = quant_per_group(w, E4M3, 128)
            qb = quant_per_group(x, E4M3, 128)
            outm, ctr = gemm_pergroup_mainloop(qa, qb)
            oracle_args = (dequantize_exact(qa), dequantize_exact(qb).T, 128)
        oracle = gemm_oracle(*oracle_args)
        denom = float(np.linalg.norm(oracle))
        frob = float(np.linalg.norm(outm - oracle)) / denom if denom else 0.0
        elem = np.abs(outm - oracle) / np.maximum(np.abs(oracle), 1e-30)
        report["max_rel_error"] = float(np.max(elem))
        report["frobenius_rel_error"] = frob
    else:
        ctr = (mx_epilogue_counters(m, n, k) if scheme == "mx2"
               else pergroup_mainloop_counters(m, n, k))
    report["counters"] = dataclasses.asdict(ctr)
    Path(out).write_text(json.dumps(report, indent=2) + "\n")
    cfg = {"m": m, "n": n, "k": k, "scheme": scheme, "verify": verify,
           "counters": show_counters, "seed": seed}
    _write_manifest(out, "gemm", cfg, [out])
    msg = f"{scheme} {m}x{n}x{k}"
    if verify:
        msg += f" frobenius_rel_error={report['frobenius_rel_error']:.3e}"
    if show_counters:
        msg += f" counters={report['counters']}"
    click.echo(msg)


@cli.command()
@click.option("--quant", type=click.Choice(["on", "off"]), default="on", show_default=True)
@click.option("--steps", type=int, default=2000, show_default=True)
@click.option("--interval", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def train(quant, steps, interval, seed, out):
    """Train the toy MLP and write the per-step log (CSV)."""
    from .train import TrainConfig, train as run_train
    cfg = TrainConfig(quantize=quant == "on", steps=steps, interval=interval, seed=seed)
    log = run_train(cfg)
    rows = [(t, float(log.fp_loss[t]), float(log.train_loss[t]), float(log.lr[t]),
             float(log.s_auto[t, 0]), float(log.s_jit[t, 0]),
             float(log.s_auto[t, 1]), float(log.s_jit[t, 1]))
            for t in range(steps)]
    _write_csv(out, ["step", "fp_loss", "train_loss", "lr",
                     "s_auto_w1", "s_jit_w1", "s_auto_w2", "s_jit_w2"], rows)
    cfg_doc = {"quant": quant, "steps": steps, "interval": interval, "seed": seed}
    _write_manifest(out, "train", cfg_doc, [out])
    click.echo(f"final smoothed loss: {log.smoothed_final_loss():.6e}; "
               f"saturations: {log.saturation_events}; "
               f"dominance violations: {log.dominance_violations}")


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "message": exc.format_message()}),
                   err=True)
        sys.exit(exc.exit_code or 1)
    except click.exceptions.Abort:
        sys.exit(130)
    except MossqError as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()

"""Command-line pipeline: simulate, sample, acquire, reconstruct, evaluate.

Every command writes a run manifest (`<out>.manifest.json`) capturing its
arguments, seeds, input/output hashes and library versions; rerunning a
command with the same inputs reproduces the array outputs bit for bit.
Exit codes: 0 success, 2 validation/usage error, 3 numerical abort.
"""

import csv
import functools
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from ._kernels import get_backend
from .aliasing import NoiseCov
from .coil import normalize_sensitivities, simulate_sensitivities
from .core import ArrayFormatError, PvdampError, ValidationError, load_array, save_array
from .data import acquire as _acquire
from .data import make_noise_cov, make_phantom
from .metrics import SEBounds, evaluate_pair
from .sampling import DensityMap, SamplingMask, draw_mask, make_density, realized_acceleration
from .solver import SolverConfig, fista, pvdamp, sure_it, tune_fista_lambda

_ALGOS = ("pvdamp", "pvdamp-unbiased", "fista", "fista-opt", "sure-it")


def _sha256(path):
    p = Path(path)
    if not p.exists():
        return None
    return hashlib.sha256(p.read_bytes()).hexdigest()


def _array_hashes(base):
    base = Path(base)
    return {
        "json": _sha256(base.with_suffix(".json")),
        "bin": _sha256(base.with_suffix(".bin")),
    }


def _write_manifest(out_base, command, params, inputs=None, outputs=None):
    manifest = {
        "tool": "pvdamp",
        "version": __version__,
        "numpy": np.__version__,
        "kernel_backend": get_backend(),
        "command": command,
        "params": params,
        "inputs": {
            name: {"path": str(path), **_array_hashes(path)}
            for name, path in (inputs or {}).items()
        },
        "outputs": {
            name: {"path": str(path), **_array_hashes(path)}
            for name, path in (outputs or {}).items()
        },
    }
    path = Path(str(out_base) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _seed_from_manifest(base):
    path = Path(str(base) + ".manifest.json")
    if not path.exists():
        return None
    try:
        params = json.loads(path.read_text()).get("params", {})
    except json.JSONDecodeError:
        return None
    return params.get("seed")


def _load(base, name):
    try:
        return load_array(base)
    except ArrayFormatError as exc:
        raise ValidationError(f"cannot load {name} from {base}: {exc}") from exc


def _load_image(base, name="image"):
    arr = _load(base, name)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr.astype(np.complex128)


def _load_kspace(base):
    arr = _load(base, "k-space")
    if arr.ndim != 3:
        raise ValidationError(f"k-space must be (N_c, H, W), got {arr.shape}")
    return arr.astype(np.complex128)


def _load_coils(base):
    arr = _load(base, "coils")
    if arr.ndim != 3:
        raise ValidationError(f"coil maps must be (N_c, H, W), got {arr.shape}")
    # renormalize: maps round-trip through float32 storage
    return normalize_sensitivities(arr.astype(np.complex128))


def _load_density(base):
    arr = _load(base, "density")
    return DensityMap.from_array(np.asarray(arr, dtype=np.float64))


def _load_mask(base, density):
    arr = _load(base, "mask")
    m = np.asarray(arr) != 0
    if m.shape != density.p.shape:
        raise ValidationError("mask and density shapes differ")
    if np.any(~m[density.p == 1.0]):
        raise ValidationError("mask must sample every p = 1 location")
    seed = _seed_from_manifest(base)
    return SamplingMask(m=m, seed=-1 if seed is None else int(seed), density=density)


def _guard(fn):
    """Map package errors to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except PvdampError as exc:
            click.echo(f"numerical abort: {exc}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
@click.version_option(__version__)
def main():
    """Reconstruction pipeline for Bernoulli-sampled multi-coil MRI."""


@main.command()
@click.option("--shape", nargs=2, type=int, required=True, metavar="H W")
@click.option("--kind", type=click.Choice(["ellipses", "blobs_and_vessels"]),
              default="ellipses", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="output base path (no extension)")
@_guard
def phantom(shape, kind, seed, out):
    """Generate a synthetic ground-truth image."""
    ph = make_phantom(shape, seed=seed, kind=kind)
    save_array(out, ph.x0.astype(np.complex64))
    _write_manifest(out, "phantom",
                    {"shape": list(shape), "kind": kind, "seed": seed},
                    outputs={"x0": out})
    click.echo(f"wrote phantom {shape[0]}x{shape[1]} ({kind}) to {out}")


@main.command()
@click.option("--shape", nargs=2, type=int, required=True, metavar="H W")
@click.option("--n-coils", type=int, required=True)
@click.option("--smoothness", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
@_guard
def coils(shape, n_coils, smoothness, seed, out):
    """Simulate smooth normalized coil sensitivity maps."""
    cs = simulate_sensitivities(shape, n_coils, smoothness=smoothness, seed=seed)
    save_array(out, cs.s.astype(np.complex64))
    _write_manifest(out, "coils",
                    {"shape": list(shape), "n_coils": n_coils,
                     "smoothness": smoothness, "seed": seed},
                    outputs={"coils": out})
    click.echo(f"wrote {n_coils} coil maps to {out}")


@main.command()
@click.option("--shape", nargs=2, type=int, required=True, metavar="H W")
@click.option("--r", "--R", "accel", type=float, required=True,
              help="acceleration factor")
@click.option("--calib", nargs=2, type=int, default=(0, 0), show_default=True)
@click.option("--decay", type=float, default=4.0, show_default=True)
@click.option("--p-min", type=float, default=1e-3, show_default=True)
@click.option("--columns", is_flag=True, help="Bernoulli columns instead of points")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="mask output base path")
@click.option("--density-out", required=True, help="density output base path")
@_guard
def mask(shape, accel, calib, decay, p_min, columns, seed, out, density_out):
    """Build a variable-density map and draw one Bernoulli mask from it."""
    density = make_density(shape, accel, calib=tuple(calib),
                           decay_exponent=decay, p_min=p_min, columns=columns)
    realized = draw_mask(density, seed)
    save_array(density_out, density.p)
    save_array(out, realized.m.astype(np.float64))
    _write_manifest(out, "mask",
                    {"shape": list(shape), "R": accel, "calib": list(calib),
                     "decay": decay, "p_min": p_min, "columns": columns,
                     "seed": seed},
                    outputs={"mask": out, "density": density_out})
    click.echo(
        f"wrote mask (realized R = {realized_acceleration(realized):.3f}) to {out}"
    )


@main.command()
@click.option("--x0", "x0_path", required=True)
@click.option("--coils", "coils_path", required=True)
@click.option("--mask", "mask_path", required=True)
@click.option("--snr-db", type=float, default=None,
              help="measurement SNR; omit for a noiseless acquisition")
@click.option("--noise-mode", type=click.Choice(["diagonal", "correlated"]),
              default="diagonal", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
@_guard
def acquire(x0_path, coils_path, mask_path, snr_db, noise_mode, seed, out):
    """Simulate the masked multi-coil acquisition."""
    x0 = _load_image(x0_path, "x0")
    cs = _load_coils(coils_path)
    m = np.asarray(_load(mask_path, "mask")) != 0
    noise = None
    outputs = {"y": out}
    if snr_db is not None:
        noise = make_noise_cov(cs.n_coils, snr_db, seed + 1, x0, mode=noise_mode)
        save_array(f"{out}_noisecov", noise.sigma2)
        outputs["noise_cov"] = f"{out}_noisecov"
    y = _acquire(x0, cs, m, noise=noise, seed=seed)
    save_array(out, y.astype(np.complex64))
    _write_manifest(out, "acquire",
                    {"snr_db": snr_db, "noise_mode": noise_mode, "seed": seed},
                    inputs={"x0": x0_path, "coils": coils_path, "mask": mask_path},
                    outputs=outputs)
    click.echo(f"wrote k-space data to {out}")


def _solver_config(rho, eps_stop, max_iters, levels, output_mode, denoiser_mode):
    return SolverConfig(rho=rho, eps_stop=eps_stop, max_iters=max_iters,
                        levels=levels, output_mode=output_mode,
                        denoiser_mode=denoiser_mode)


def _write_trace(path, result, config, ref_path=None):
    header = {
        "type": "header",
        "algo": result.algo,
        "config": config,
        "band_labels": result.trace.band_labels,
        "stop_reason": result.stop_reason,
        "stopped_tau_mean": result.trace.stopped_tau_mean,
        "ref_sha256": _sha256(Path(str(ref_path)).with_suffix(".bin")) if ref_path else None,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for row in result.trace.to_rows():
            row.pop("band_labels", None)
            fh.write(json.dumps(row) + "\n")


def _write_trace_csv(path, result):
    rows = result.trace.to_rows()
    scalar_keys = []
    for key in ("k", "tau_mean", "objective", "rel_change", "nmse_db",
                "nmse_unbiased_db", "wall_time_s"):
        if any(key in row for row in rows):
            scalar_keys.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(scalar_keys)
        for row in rows:
            writer.writerow([row.get(k, "") for k in scalar_keys])


@main.command()
@click.option("--algo", type=click.Choice(_ALGOS), required=True)
@click.option("--y", "y_path", required=True)
@click.option("--mask", "mask_path", required=True)
@click.option("--density", "density_path", default=None)
@click.option("--coils", "coils_path", required=True)
@click.option("--lambda", "lam", type=float, default=None,
              help="sparse weight (required for --algo fista)")
@click.option("--grid", default=None,
              help="comma-separated lambda grid for fista-opt")
@click.option("--ref", "ref_path", default=None,
              help="reference image (required for fista-opt)")
@click.option("--noise-cov", "noise_cov_path", default=None)
@click.option("--rho", type=float, default=0.75, show_default=True)
@click.option("--eps-stop", type=float, default=1e-3, show_default=True)
@click.option("--max-iters", type=int, default=None)
@click.option("--levels", type=int, default=4, show_default=True)
@click.option("--denoiser-mode", type=click.Choice(["tau_scaled", "flat_per_band"]),
              default="tau_scaled", show_default=True)
@click.option("--out", required=True)
@click.option("--trace", "trace_path", default=None, help="JSON-lines trace output")
@click.option("--trace-csv", "trace_csv_path", default=None)
@_guard
def reconstruct(algo, y_path, mask_path, density_path, coils_path, lam, grid,
                ref_path, noise_cov_path, rho, eps_stop, max_iters, levels,
                denoiser_mode, out, trace_path, trace_csv_path):
    """Reconstruct an image from undersampled multi-coil k-space."""
    if algo == "fista" and lam is None:
        raise click.UsageError("--algo fista requires --lambda")
    if algo == "fista-opt" and ref_path is None:
        raise click.UsageError("--algo fista-opt requires --ref")
    if algo.startswith("pvdamp") and density_path is None:
        raise click.UsageError(f"--algo {algo} requires --density")

    y = _load_kspace(y_path)
    cs = _load_coils(coils_path)
    density = _load_density(density_path) if density_path else None
    realized = _load_mask(mask_path, density) if density else None
    if realized is None:
        m_arr = np.asarray(_load(mask_path, "mask")) != 0
        density_stub = DensityMap.from_array(np.clip(m_arr.astype(float), 1e-6, 1.0))
        realized = SamplingMask(m=m_arr, seed=-1, density=density_stub)
    x_ref = _load_image(ref_path, "ref") if ref_path else None
    noise = None
    if noise_cov_path:
        noise = NoiseCov(sigma2=_load(noise_cov_path, "noise covariance")
                         .astype(np.complex128)).validate()

    output_mode = "unbiased" if algo == "pvdamp-unbiased" else "pvdamp"
    cfg = _solver_config(rho, eps_stop, max_iters, levels, output_mode,
                         denoiser_mode)
    lambda_star = None
    if algo in ("pvdamp", "pvdamp-unbiased"):
        result = pvdamp(y, realized, density, cs, noise=noise, cfg=cfg,
                        x_ref=x_ref)
    elif algo == "fista":
        result = fista(y, realized, cs, lam, cfg=cfg, x_ref=x_ref)
    elif algo == "fista-opt":
        grid_values = (
            np.array([float(v) for v in grid.split(",")]) if grid else None
        )
        tuned = tune_fista_lambda(y, realized, cs, x_ref, grid=grid_values,
                                  cfg=cfg, density=density)
        result = tuned.result
        lambda_star = tuned.lambda_star
        Path(f"{out}.lambda_curve.json").write_text(
            json.dumps({"lambda_star": tuned.lambda_star,
                        "curve": tuned.curve}) + "\n")
    else:
        result = sure_it(y, realized, cs, cfg=cfg, x_ref=x_ref)

    save_array(out, result.x_hat.astype(np.complex64))
    config_dict = {
        "algo": algo, "rho": rho, "eps_stop": eps_stop,
        "max_iters": max_iters, "levels": levels,
        "denoiser_mode": denoiser_mode, "lambda": lam,
        "lambda_star": lambda_star,
    }
    summary = {
        "iterations": result.iterations_run,
        "stop_reason": result.stop_reason,
        "seed": _seed_from_manifest(mask_path),
        "config": config_dict,
    }
    if x_ref is not None:
        summary.update(evaluate_pair(result.x_hat, x_ref).to_dict())
    Path(f"{out}.summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if trace_path:
        _write_trace(trace_path, result, config_dict, ref_path)
    if trace_csv_path:
        _write_trace_csv(trace_csv_path, result)
    inputs = {"y": y_path, "mask": mask_path, "coils": coils_path}
    if density_path:
        inputs["density"] = density_path
    if ref_path:
        inputs["ref"] = ref_path
    if noise_cov_path:
        inputs["noise_cov"] = noise_cov_path
    _write_manifest(out, "reconstruct", config_dict, inputs=inputs,
                    outputs={"x_hat": out})
    click.echo(
        f"{algo}: {result.iterations_run} iterations, stop={result.stop_reason}"
    )


@main.command()
@click.option("--xhat", "xhat_path", required=True)
@click.option("--ref", "ref_path", required=True)
@click.option("--mask-fraction", type=float, default=0.05, show_default=True)
@click.option("--out", required=True, help="metrics JSON output path")
@_guard
def evaluate(xhat_path, ref_path, mask_fraction, out):
    """Quality metrics of a reconstruction against a reference."""
    x_hat = _load_image(xhat_path, "xhat")
    x_ref = _load_image(ref_path, "ref")
    report = evaluate_pair(x_hat, x_ref, fraction=mask_fraction)
    Path(out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    _write_manifest(Path(out).with_suffix(""), "evaluate",
                    {"mask_fraction": mask_fraction},
                    inputs={"xhat": xhat_path, "ref": ref_path})
    click.echo(json.dumps(report.to_dict()))


@main.command(name="se-check")
@click.option("--trace", "trace_path", required=True)
@click.option("--ref", "ref_path", default=None,
              help="cross-checks the reference recorded in the trace")
@click.option("--var-lo", type=float, default=0.45, show_default=True)
@click.option("--var-hi", type=float, default=0.55, show_default=True)
@click.option("--kurt-max", type=float, default=0.3, show_default=True)
@click.option("--out", required=True)
@_guard
def se_check(trace_path, ref_path, var_lo, var_hi, kurt_max, out):
    """Check per-iteration residual Gaussianity recorded in a trace."""
    bounds = SEBounds(var_lo=var_lo, var_hi=var_hi, kurt_max=kurt_max)
    path = Path(trace_path)
    if not path.exists():
        raise ValidationError(f"trace file {trace_path} not found")
    lines = [json.loads(line) for line in path.read_text().splitlines() if line]
    header = lines[0] if lines and lines[0].get("type") == "header" else {}
    rows = [ln for ln in lines if ln.get("type") != "header"]
    if ref_path is not None and header.get("ref_sha256"):
        got = _sha256(Path(ref_path).with_suffix(".bin"))
        if got != header["ref_sha256"]:
            raise ValidationError(
                "--ref does not match the reference used at reconstruction time"
            )
    if not rows or "eta" not in rows[0]:
        raise ValidationError(
            "trace has no residual statistics; rerun reconstruct with --ref"
        )

    def flag(stats):
        return bool(
            var_lo <= stats["var_re"] <= var_hi
            and var_lo <= stats["var_im"] <= var_hi
            and abs(stats["kurt_re"]) <= kurt_max
            and abs(stats["kurt_im"]) <= kurt_max
        )

    iterations = []
    for row in rows:
        pooled = row["eta"]["pooled"]
        iterations.append({
            "k": row["k"],
            "pooled": {**pooled, "passes": flag(pooled)},
            "bands": [{**b, "passes": flag(b)} for b in row["eta"]["bands"]],
        })
    report = {
        "bounds": {"var_lo": var_lo, "var_hi": var_hi, "kurt_max": kurt_max},
        "algo": header.get("algo"),
        "iterations": iterations,
        "all_pass": all(it["pooled"]["passes"] for it in iterations),
    }
    Path(out).write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(Path(out).with_suffix(""), "se-check",
                    {"var_lo": var_lo, "var_hi": var_hi, "kurt_max": kurt_max},
                    inputs={"trace": trace_path})
    click.echo(f"all_pass: {report['all_pass']}")


def _threads():
    value = os.environ.get("PVDAMP_THREADS")
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def _sweep_point(args):
    (vary, value, seed, algos, shape, kind, n_coils, smoothness, accel,
     calib, lam, levels) = args
    ph = make_phantom(shape, seed=1000 + seed, kind=kind)
    cs = simulate_sensitivities(shape, n_coils, smoothness=smoothness,
                                seed=2000 + seed)
    r_here = value if vary == "R" else accel
    density = make_density(shape, r_here, calib=calib)
    realized = draw_mask(density, seed)
    noise = None
    acquire_seed = 3000 + 17 * seed
    if vary == "snr":
        noise = make_noise_cov(n_coils, value, acquire_seed + 1, ph.x0)
    y = _acquire(ph.x0, cs, realized, noise=noise, seed=acquire_seed)
    cfg = SolverConfig(levels=levels)
    rows = []
    for algo in algos:
        if algo in ("pvdamp", "pvdamp-unbiased"):
            cfg_a = SolverConfig(levels=levels,
                                 output_mode="unbiased" if algo.endswith("unbiased")
                                 else "pvdamp")
            res = pvdamp(y, realized, density, cs, noise=noise, cfg=cfg_a)
        elif algo == "fista":
            lam_here = value if vary == "lambda" else lam
            if lam_here is None:
                raise ValidationError("sweep over fista requires --lambda")
            res = fista(y, realized, cs, lam_here, cfg=cfg)
        elif algo == "fista-opt":
            res = tune_fista_lambda(y, realized, cs, ph.x0, cfg=cfg,
                                    density=density).result
        elif algo == "sure-it":
            res = sure_it(y, realized, cs, cfg=cfg)
        else:
            raise ValidationError(f"unknown algo {algo!r}")
        report = evaluate_pair(res.x_hat, ph.x0)
        rows.append({
            "vary": vary, "value": value, "seed": seed, "algo": algo,
            "nmse_db": report.nmse_db, "ssim": report.ssim,
            "hfen": report.hfen, "iterations": res.iterations_run,
            "stop_reason": res.stop_reason,
            "wall_time_s": float(sum(res.trace.wall_time_s)),
        })
    return rows


@main.command()
@click.option("--vary", type=click.Choice(["snr", "R", "lambda"]), required=True)
@click.option("--values", required=True,
              help="comma-separated sweep values, e.g. 10,20,30,40")
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--algos", default="pvdamp", show_default=True)
@click.option("--shape", nargs=2, type=int, default=(64, 64), show_default=True)
@click.option("--kind", type=click.Choice(["ellipses", "blobs_and_vessels"]),
              default="blobs_and_vessels", show_default=True)
@click.option("--n-coils", type=int, default=4, show_default=True)
@click.option("--smoothness", type=float, default=0.5, show_default=True)
@click.option("--r", "--R", "accel", type=float, default=5.0, show_default=True,
              help="acceleration when not the swept variable")
@click.option("--calib", nargs=2, type=int, default=(8, 8), show_default=True)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--levels", type=int, default=4, show_default=True)
@click.option("--out", required=True, help="CSV output path")
@_guard
def sweep(vary, values, seeds, algos, shape, kind, n_coils, smoothness, accel,
          calib, lam, levels, out):
    """Sweep SNR, acceleration or sparse weight; one CSV row per run."""
    value_list = [float(v) for v in values.split(",")]
    seed_list = [int(s) for s in seeds.split(",")]
    algo_list = [a.strip() for a in algos.split(",")]
    for algo in algo_list:
        if algo not in _ALGOS:
            raise click.UsageError(f"unknown algo {algo!r}")
    if vary == "lambda" and algo_list != ["fista"]:
        raise click.UsageError("--vary lambda requires --algos fista")
    points = [
        (vary, value, seed, tuple(algo_list), tuple(shape), kind, n_coils,
         smoothness, accel, tuple(calib), lam, levels)
        for value in value_list for seed in seed_list
    ]
    with ThreadPoolExecutor(max_workers=min(_threads(), len(points))) as pool:
        results = list(pool.map(_sweep_point, points))
    rows = [row for point_rows in results for row in point_rows]
    rows.sort(key=lambda r: (r["value"], r["seed"], r["algo"]))
    fieldnames = ["vary", "value", "seed", "algo", "nmse_db", "ssim", "hfen",
                  "iterations", "stop_reason", "wall_time_s"]
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    _write_manifest(Path(out).with_suffix(""), "sweep",
                    {"vary": vary, "values": value_list, "seeds": seed_list,
                     "algos": algo_list, "shape": list(shape), "kind": kind,
                     "n_coils": n_coils, "smoothness": smoothness,
                     "R": accel, "calib": list(calib), "lambda": lam,
                     "levels": levels})
    click.echo(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main()

"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 the estimator
did not converge (its JSON is still printed).  All randomized subcommands
take ``--seed``; ``--threads`` defaults to the MYRIADKIT_THREADS environment
variable.  Sample CSV files carry no header, one sample per row, comma
separated; the dimension is inferred from the first row.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import bench as bench_mod
from . import denoise as denoise_mod
from . import imaging
from .distributions import WrappedCauchyParams
from .errors import MyriadkitError
from .estimators import (
    EstimatorOptions,
    WeightVector,
    em_estimate,
    gmmf_estimate,
    tyler_estimate,
    wrapped_cauchy_estimate,
)

USAGE_ERROR, DATA_ERROR, NOT_CONVERGED = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the CLI contract
    reserves 2 for data errors and uses 1 for usage problems."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(USAGE_ERROR)


def _emit(obj) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(f"not serializable: {type(o)!r}")

    print(json.dumps(obj, default=default))


def _json_num(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _read_csv(path) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise MyriadkitError(f"cannot parse CSV {path}: {exc}") from exc
    if data.size == 0:
        raise MyriadkitError(f"empty CSV {path}")
    return data


def _read_weights(path, n):
    if path is None:
        return None
    w = _read_csv(path).reshape(-1)
    try:
        return WeightVector(w)
    except ValueError as exc:
        raise MyriadkitError(str(exc)) from exc


def _load_image(path, kind: str):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic[:2] == b"P5":
        if kind == "s1":
            raise MyriadkitError("PGM files cannot hold circular images")
        return imaging.read_pgm(path)
    return imaging.read_f64(path, expect="circular" if kind == "s1" else "real")


def _save_image(img, path):
    if str(path).lower().endswith(".pgm"):
        if not isinstance(img, imaging.Image):
            raise MyriadkitError("circular images must be written as MYR1 files")
        return imaging.write_pgm(img, path)
    imaging.write_f64(img, path)
    return 0


def _estimator_options(args, mode="joint"):
    return EstimatorOptions(tol=args.tol, max_iter=args.max_iter, mode=mode)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_estimate(args) -> int:
    samples = _read_csv(args.input)
    weights = _read_weights(args.weights, samples.shape[0])
    mode = args.mode.replace("-", "_")
    mu = None
    if mode == "scatter_only":
        if args.mu is None:
            raise MyriadkitError("scatter-only mode requires --mu")
        mu = np.array([float(v) for v in args.mu.split(",")])
    fn = gmmf_estimate if args.method == "gmmf" else em_estimate
    result = fn(samples, weights, args.nu, _estimator_options(args, mode),
                mu=mu, check=args.check)
    _emit(
        {
            "method": args.method,
            "mode": args.mode,
            "mu": result.params.mu,
            "sigma": result.params.sigma.entries,
            "iterations": result.iterations,
            "converged": result.converged,
            "final_step": result.final_step,
            "trace_residual": result.trace_residual,
            "fp_mu_residual": result.fp_mu_residual,
            "fp_sigma_residual": result.fp_sigma_residual,
        }
    )
    return 0 if result.converged else NOT_CONVERGED


def cmd_wc_estimate(args) -> int:
    angles = _read_csv(args.input).reshape(-1)
    weights = _read_weights(args.weights, angles.size)
    result = wrapped_cauchy_estimate(angles, weights, _estimator_options(args))
    p: WrappedCauchyParams = result.params
    xi = 2.0 * p.rho / (1.0 + p.rho * p.rho)
    _emit(
        {
            "a": p.a,
            "rho": p.rho,
            "zeta": [xi * math.cos(p.a), xi * math.sin(p.a)],
            "iterations": result.iterations,
            "converged": result.converged,
            "final_step": result.final_step,
            "guard_events": result.guard_events,
        }
    )
    return 0 if result.converged else NOT_CONVERGED


def cmd_tyler(args) -> int:
    samples = _read_csv(args.input)
    weights = _read_weights(args.weights, samples.shape[0])
    result = tyler_estimate(samples, weights, _estimator_options(args))
    _emit(
        {
            "sigma": result.params.sigma.entries,
            "iterations": result.iterations,
            "converged": result.converged,
            "final_step": result.final_step,
            "fp_residual": result.fp_sigma_residual,
        }
    )
    return 0 if result.converged else NOT_CONVERGED


def cmd_add_noise(args) -> int:
    if args.model == "student-t":
        img = _load_image(args.input, "real")
        out = imaging.add_student_t_noise(img, args.nu, args.sigma, args.seed)
    else:
        img = _load_image(args.input, "s1")
        out = imaging.add_wrapped_cauchy_noise(img, args.gamma, args.seed)
    clamped = _save_image(out, args.output)
    _emit({"model": args.model, "output": str(args.output), "clamped": clamped})
    return 0


def cmd_denoise(args) -> int:
    t0 = time.perf_counter()
    threads = args.threads
    cfg = denoise_mod.DenoiseConfig(
        patch_size=args.patch,
        window=args.window,
        k=args.k,
        nu=args.nu,
        sigma=args.gamma if args.kind == "s1" else args.sigma,
        mode=args.mode,
        var_threshold=args.var_threshold,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    if args.kind == "real":
        img = _load_image(args.input, "real")
        out, summary = denoise_mod.denoise_image_detailed(img, cfg, threads)
    else:
        img = _load_image(args.input, "s1")
        out, summary = denoise_mod.denoise_s1_image_detailed(img, cfg, threads)
    clamped = _save_image(out, args.output)
    if args.figure:
        _render_denoise_figure(img, out, args.figure)
    _emit(
        {
            "kind": args.kind,
            "mode": cfg.mode,
            "pixels": summary.pixels,
            "constant_fallbacks": summary.constant_fallbacks,
            "nonconverged": summary.nonconverged,
            "degenerate_fallbacks": summary.degenerate_fallbacks,
            "patchwise_fallbacks": summary.patchwise_fallbacks,
            "guard_events": summary.guard_events,
            "clamped": clamped,
            "threads": threads,
            "runtime_sec": round(time.perf_counter() - t0, 3),
            "output": str(args.output),
        }
    )
    return 0


def _render_denoise_figure(before, after, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    def plane(img):
        if isinstance(img, imaging.Image):
            return img.pixels, dict(cmap="gray", vmin=0, vmax=img.peak)
        return img.angles, dict(cmap="hsv", vmin=-math.pi, vmax=math.pi)

    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    for ax, img, title in zip(axes, (before, after), ("input", "denoised")):
        data, kw = plane(img)
        ax.imshow(data, **kw)
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_metrics(args) -> int:
    if args.kind == "real":
        ref = _load_image(args.ref, "real")
        test = _load_image(args.test, "real")
        _emit(
            {
                "psnr": _json_num(imaging.psnr(ref, test)),
                "ssim": imaging.ssim(ref, test),
            }
        )
    else:
        ref = _load_image(args.ref, "s1")
        test = _load_image(args.test, "s1")
        _emit({"epsilon": imaging.s1_mse(ref, test)})
    return 0


def cmd_bench(args) -> int:
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise MyriadkitError(f"cannot read bench config: {exc}") from exc
        sigmas = [
            (label, np.asarray(mat, dtype=np.float64))
            for label, mat in raw.get("sigmas", [])
        ] or None
        cfg = bench_mod.BenchConfig(
            d=raw.get("d", 2),
            n=raw.get("n", 100),
            trials=raw.get("trials", 1000),
            nus=[float(v) for v in raw.get("nus", [1, 5, 10, 100])],
            sigmas=sigmas or bench_mod._default_sigmas(),
            mu=raw.get("mu"),
            tol=raw.get("tol", 1e-6),
            seed=raw.get("seed", 0),
        )
    else:
        d = args.d
        scales = [float(s) for s in args.sigma_scales.split(",")]
        sigmas = [(f"{s:g}I", s * np.eye(d)) for s in scales]
        cfg = bench_mod.BenchConfig(
            d=d,
            n=args.n,
            trials=args.trials,
            nus=[float(v) for v in args.nus.split(",")],
            sigmas=sigmas,
            tol=args.tol,
            seed=args.seed,
        )
    rows = bench_mod.run_table1(cfg)
    bench_mod.emit_csv(rows, args.out)
    outputs = {"csv": str(args.out)}
    if args.plot:
        fig_path = os.path.splitext(str(args.out))[0] + ".png"
        bench_mod.plot_rows(rows, fig_path)
        outputs["figure"] = fig_path
    _emit(
        {
            "rows": len(rows),
            "trials": cfg.trials,
            **outputs,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _add_tol_flags(p):
    p.add_argument("--tol", type=float, default=1e-6, help="stopping tolerance")
    p.add_argument("--max-iter", type=int, default=10000, help="iteration budget")


def build_parser() -> _Parser:
    parser = _Parser(prog="myriadkit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="joint location/scatter estimation")
    p.add_argument("--input", required=True, help="samples CSV (n rows x d cols)")
    p.add_argument("--nu", type=float, required=True, help="degrees of freedom")
    p.add_argument("--weights", help="weights CSV (one per row)")
    p.add_argument("--method", choices=["gmmf", "em"], default="gmmf")
    p.add_argument("--mode", choices=["joint", "scatter-only"], default="joint")
    p.add_argument("--mu", help="fixed location for scatter-only, comma separated")
    check = p.add_mutually_exclusive_group()
    check.add_argument("--check", dest="check", action="store_true", default=True,
                       help="verify feasibility assumptions (default)")
    check.add_argument("--no-check", dest="check", action="store_false",
                       help="skip the feasibility pre-check")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("wc-estimate", help="wrapped Cauchy location/concentration")
    p.add_argument("--input", required=True, help="angles CSV (radians, one per row)")
    p.add_argument("--weights", help="weights CSV")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_wc_estimate)

    p = sub.add_parser("tyler", help="nu = 0 scatter-only estimation")
    p.add_argument("--input", required=True, help="samples CSV")
    p.add_argument("--weights", help="weights CSV")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_tyler)

    p = sub.add_parser("add-noise", help="synthesize heavy-tailed noise")
    p.add_argument("--model", choices=["student-t", "wrapped-cauchy"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_add_noise)

    p = sub.add_parser("denoise", help="nonlocal denoising")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kind", choices=["real", "s1"], default="real")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=10.0, help="noise scale (real)")
    p.add_argument("--gamma", type=float, default=0.1, help="noise scale (s1)")
    p.add_argument("--patch", type=int, default=5)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--mode", choices=["pixelwise", "patchwise", "adaptive"],
                   default="pixelwise")
    p.add_argument("--var-threshold", type=float, default=None)
    p.add_argument("--seedless", action="store_true",
                   help="assert the run uses no randomness (always true)")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("MYRIADKIT_THREADS", "1")))
    p.add_argument("--figure", help="render an input/output figure to this file")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_denoise)

    p = sub.add_parser("metrics", help="image quality metrics")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--kind", choices=["real", "s1"], default="real")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("bench", help="estimator iteration-count benchmark")
    p.add_argument("--config", help="JSON config file (overrides flags)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--nus", default="1,5,10,100", help="comma-separated list")
    p.add_argument("--sigma-scales", default="1",
                   help="comma-separated scales s for s*I scatter matrices")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV output path")
    plot = p.add_mutually_exclusive_group()
    plot.add_argument("--plot", dest="plot", action="store_true", default=True,
                      help="also render a PNG next to the CSV (default)")
    plot.add_argument("--no-plot", dest="plot", action="store_false")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except MyriadkitError as exc:
        print(f"myriadkit: error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ValueError as exc:
        print(f"myriadkit: error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())

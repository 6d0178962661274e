"""Command line: analyze, fit, synth, render, bench.

Exit codes: 0 success, 1 internal error, 2 usage or configuration error,
3 input/output error. Every failure prints one line to stderr of the form
``fdnfit: error[<kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .analysis import MetricConfig, compute_metrics, extract_early_reflections
from .estimator import FdnReverbEstimator
from .exceptions import ConfigurationError, FdnFitError
from .render import (
    CostModel,
    FdnRenderer,
    convolve_direct,
    convolve_partitioned,
    flops_per_sample,
    impulse_response,
)

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
# rounded reference speedups, shown beside the model ratios
REFERENCE_RATIOS = {"direct_conv": 53.0, "partitioned_fft": 2.3}


class UsageError(ConfigurationError):
    kind = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _weights(text: str) -> tuple[float, ...]:
    try:
        w = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be 4 comma-separated numbers, got {text!r}")
    if len(w) != 4:
        raise argparse.ArgumentTypeError(f"weights must be 4 comma-separated numbers, got {text!r}")
    return w


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_analyze(args) -> int:
    rir = io.read_wav(args.rir)
    metrics = compute_metrics(rir, MetricConfig())
    early, tail = extract_early_reflections(rir, args.k, args.window_ms)
    out = _out_dir(args.out_dir)
    io.save_metrics(out / "metrics.json", metrics, rir.sample_rate_hz, len(rir))
    io.save_early(out / "early.json", early, rir.sample_rate_hz)
    io.write_wav(out / "tail.wav", tail)
    print(json.dumps(metrics.to_dict(rir.sample_rate_hz), indent=2))
    return EXIT_OK


def _estimator(args, sample_rate_hz) -> FdnReverbEstimator:
    return FdnReverbEstimator(
        sample_rate_hz=sample_rate_hz,
        n_taps=args.k,
        window_ms=args.window_ms,
        n_loops=args.loops,
        decay_target=args.decay_target,
        decay_form=args.decay_form,
        mode=args.mode,
        weights=args.weights,
        restarts=args.restarts,
        max_iterations=args.max_iterations,
        step_size=args.step_size,
        tolerance=args.tolerance,
        method=args.method,
        random_state=args.seed,
        n_jobs=args.jobs,
    )


def cmd_fit(args) -> int:
    target = Path(args.target)
    if target.suffix.lower() == ".wav":
        rir = io.read_wav(target)
        fs = rir.sample_rate_hz
        metrics = compute_metrics(rir)
        length = len(rir)
        if args.early:
            early, _ = io.load_early(args.early)
        else:
            early, _ = extract_early_reflections(rir, args.k, args.window_ms)
    else:
        metrics, raw = io.load_metrics(target)
        if not args.early:
            raise UsageError("fitting to a metrics file needs --early early.json")
        early, early_fs = io.load_early(args.early)
        fs = raw.get("sample_rate_hz") or early_fs
        if fs is None:
            raise ConfigurationError("no sample_rate_hz in the metrics or early-reflection file")
        if early_fs is not None and early_fs != fs:
            raise ConfigurationError(f"sample rates differ: metrics {fs} Hz, early {early_fs} Hz")
        length = raw.get("length_samples")
    if args.length is not None:
        length = args.length
    est = _estimator(args, int(fs)).fit_targets(metrics, early, length)
    report = est.report_
    out = _out_dir(args.out_dir)
    io.save_params(out / "params.json", est.network_)
    io.save_report(
        out / "report.json",
        report,
        est.sample_rate_hz,
        {"target_metrics": metrics.to_dict(est.sample_rate_hz)},
    )
    io.save_trace(out / "trace.csv", report.trace)
    print(json.dumps(report.to_dict(est.sample_rate_hz), indent=2))
    return EXIT_OK


def cmd_synth(args) -> int:
    params = io.load_params(args.params)
    length = args.length or params.sample_rate_hz
    io.write_wav(args.out, impulse_response(params, length))
    return EXIT_OK


def cmd_render(args) -> int:
    params = io.load_params(args.params)
    dry = io.read_wav(args.input)
    if dry.sample_rate_hz != params.sample_rate_hz:
        raise ConfigurationError(
            f"input is {dry.sample_rate_hz} Hz but the network was fitted at {params.sample_rate_hz} Hz"
        )
    wet = FdnRenderer(params).process(dry.samples, args.block_size)
    io.write_wav(args.out, wet, params.sample_rate_hz)
    return EXIT_OK


def _wall_ns(fn, n_samples: int, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        best = min(best, time.perf_counter_ns() - t0)
    return best / n_samples


def cmd_bench(args) -> int:
    params = io.load_params(args.params)
    model = CostModel(params.n_taps, params.n_loops, args.n, args.w)
    rir = impulse_response(params, args.n)
    x = np.random.default_rng(args.seed).standard_normal(args.samples)
    runs = {
        "fdn": (lambda: FdnRenderer(params).process(x, args.w), 0),
        "direct_conv": (lambda: convolve_direct(rir, x), 0),
        "partitioned_fft": (lambda: convolve_partitioned(rir, x, args.w), args.w),
    }
    rows = []
    for method, (fn, latency) in runs.items():
        rows.append(
            {
                "method": method,
                "N": args.n,
                "W": args.w,
                "flops_per_sample": flops_per_sample(model, method),
                "wall_ns_per_sample": round(_wall_ns(fn, x.size, args.repeats), 3),
                "latency_samples": latency,
            }
        )
    io.save_bench(args.out, rows)
    fdn = rows[0]["flops_per_sample"]
    summary = {
        method: {
            "flops_ratio_vs_fdn": row["flops_per_sample"] / fdn,
            "reference_ratio": REFERENCE_RATIOS[method],
        }
        for method, row in zip(runs, rows)
        if method != "fdn"
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=43, help="early taps to keep (default 43)")
    p.add_argument("--window-ms", type=float, default=50.0, help="early window in ms (default 50)")
    p.add_argument("--loops", type=int, default=16, help="feedback loops (default 16)")
    p.add_argument("--decay-target", type=float, default=1e-3, help="tail amplitude at T30 (amplitude form)")
    p.add_argument("--decay-form", choices=("edc", "amplitude"), default="edc")
    p.add_argument("--mode", choices=("discrete", "continuous"), default="discrete")
    p.add_argument("--weights", type=_weights, default=(1.0, 1.0, 1.0, 1.0), help="w1,w2,w3,w4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-iterations", type=int, default=20000)
    p.add_argument("--step-size", type=float, default=1e-2)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--method", choices=("preconditioned", "gd"), default="preconditioned")
    p.add_argument("--jobs", type=int, default=1, help="threads for restarts")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdnfit", description="Fit and render a sum-of-loops reverberator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="metrics, early taps and residual tail of an RIR")
    p.add_argument("rir")
    p.add_argument("--k", type=int, default=43)
    p.add_argument("--window-ms", type=float, default=50.0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit loop gains to an RIR or a metrics file")
    p.add_argument("target", help="rir.wav or metrics.json")
    p.add_argument("--early", help="early.json (required with metrics.json)")
    p.add_argument("--length", type=int, help="response length the metrics refer to")
    p.add_argument("--out-dir", default=".")
    _fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="impulse response of a fitted network")
    p.add_argument("params")
    p.add_argument("--length", type=int, help="samples (default one second)")
    p.add_argument("--out", default="synth_rir.wav")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="stream dry audio through a fitted network")
    p.add_argument("params")
    p.add_argument("input")
    p.add_argument("--out", default="out.wav")
    p.add_argument("--block-size", type=int, default=4096)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="FLOP model and wall clock of the three renderers")
    p.add_argument("params")
    p.add_argument("--n", type=int, default=4735, help="RIR length for the convolvers")
    p.add_argument("--w", type=int, default=512, help="partition size (power of two)")
    p.add_argument("--samples", type=int, default=48000, help="input length")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench.csv")
    p.set_defaults(func=cmd_bench)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    one_line = " ".join(str(message).split())
    print(f"fdnfit: error[{kind}]: {one_line}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    logging.basicConfig(format="fdnfit: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(exc.kind, exc, EXIT_CONFIG)
    logging.getLogger("fdnfit").setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except FdnFitError as exc:
        return _fail(exc.kind, exc, EXIT_IO if exc.kind == "io" else EXIT_CONFIG)
    except OSError as exc:
        return _fail("io", exc, EXIT_IO)
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        return _fail("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``depas {min-n,min-delta,sweep,simulate,verify}``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or domain
error, 3 infeasible tuning request.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import numpy as np

from depas import probability as prob
from depas import tuning
from depas.errors import DomainError, InfeasibleError, TraceError, UsageError
from depas.simulator import (
    SystemState,
    WorkloadTrace,
    estimate_correctness,
    max_threads,
    run_workload,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

FORMATS = ("text", "json", "json-like", "csv")


def _common(parser, fmt_default="text"):
    parser.add_argument("--l0", type=float, default=0.8, help="desired load L0 (default 0.8)")
    parser.add_argument("--p0", type=float, default=0.99, help="target correctness probability")
    parser.add_argument("--sn", type=float, default=0.1, help="node-count root precision")
    parser.add_argument("--seps", type=float, default=1e-3, help="eps root precision")
    parser.add_argument("--sp", type=float, default=1e-3, help="rescaled load sweep step")
    parser.add_argument("--method", choices=("chernoff", "binomial", "both"), default="both")
    parser.add_argument("--format", choices=FORMATS, default=fmt_default)
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed; drawn from entropy and echoed when omitted")
    parser.add_argument("--repeat", type=int, default=1,
                        help="run K times and report the mean wall time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depas", description="Tune and simulate decentralized probabilistic auto-scaling."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("min-n", help="minimum node count for a fixed band half-width")
    _common(p)
    p.add_argument("--delta", type=float, required=True)

    p = sub.add_parser("min-delta", help="minimum band half-width for a fixed node count")
    _common(p)
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("sweep", help="tune over a range of delta or n, one CSV row per point")
    _common(p, fmt_default="csv")
    p.add_argument("--param", choices=("delta", "n"), required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)

    p = sub.add_parser("simulate", help="replay a workload trace through the decision rule")
    _common(p, fmt_default="csv")
    p.add_argument("--trace", required=True, help="CSV file with header cycle,workload")
    p.add_argument("--n0", type=int, required=True, help="initial node count")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--cycles", type=int, default=None)
    p.add_argument("--out", default=None, help="report file (default: standard output)")

    p = sub.add_parser("verify", help="compare empirical, exact and bounded correctness")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--load", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    return parser


def _resolve_seed(args):
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy)
    return args.seed


def _config(args, *keys):
    base = {"l0": args.l0, "p0": args.p0, "sn": args.sn, "seps": args.seps, "sp": args.sp,
            "method": args.method, "seed": args.seed, "repeat": args.repeat}
    for k in keys:
        base[k] = getattr(args, k)
    return base


def _config_line(config) -> str:
    return "# config: " + " ".join(f"{k}={v}" for k, v in config.items())


def _methods(args):
    return ("chernoff", "binomial") if args.method == "both" else (args.method,)


def _emit(text, out=None):
    stream = out or sys.stdout
    stream.write(text if text.endswith("\n") else text + "\n")


def _is_json(args):
    return args.format in ("json", "json-like")


# ---------------------------------------------------------------------------
# Tuning commands


def _run_tuning(args, **fixed):
    if args.repeat < 1:
        raise UsageError("--repeat must be at least 1")
    results = {}
    times = {m: [] for m in _methods(args)}
    for _ in range(args.repeat):
        upper = None
        for method in _methods(args):
            req = tuning.TuningRequest(
                desired_load=args.l0, p0=args.p0, s_n=args.sn, s_eps=args.seps, s_p=args.sp,
                method=method, **fixed,
            )
            if method == "chernoff":
                res = tuning.tune(req)
                upper = res
            elif req.mode == "min_n":
                res = tuning.binomial_min_n(req, upper)
            else:
                res = tuning.binomial_min_delta(req, upper)
            results[method] = res
            times[method].append(res.wall_time)
    return [(m, results[m], sum(times[m]) / len(times[m])) for m in _methods(args)]


def _diag_text(d):
    parts = []
    for k, v in asdict(d).items():
        if v is None:
            continue
        parts.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
    return " ".join(parts)


def _report_tuning(args, config, rows, label):
    if _is_json(args):
        payload = {
            "config": config,
            "results": [
                {"method": m, label: r.value, "display": r.display,
                 "diagnostics": asdict(r.diagnostics), "wall_time": t}
                for m, r, t in rows
            ],
        }
        _emit(json.dumps(payload, indent=2))
    elif args.format == "csv":
        lines = [_config_line(config), f"method,{label},wall_time"]
        lines += [f"{m},{r.display},{t:.6f}" for m, r, t in rows]
        _emit("\n".join(lines))
    else:
        lines = [_config_line(config)]
        for m, r, t in rows:
            lines.append(f"{m}: {label}={r.display}  wall_time={t:.3f}s")
            lines.append(f"  {_diag_text(r.diagnostics)}")
        _emit("\n".join(lines))


def cmd_min_n(args) -> int:
    _resolve_seed(args)
    rows = _run_tuning(args, delta0=args.delta)
    _report_tuning(args, _config(args, "delta"), rows, "n_star")
    return EXIT_OK


def cmd_min_delta(args) -> int:
    _resolve_seed(args)
    n0 = args.n
    if n0 < 1:
        raise DomainError(f"--n must be a positive integer, got {n0}")
    try:
        rows = _run_tuning(args, n0=n0)
    except InfeasibleError as exc:
        config = _config(args, "n")
        if _is_json(args):
            _emit(json.dumps({"config": config, "error": str(exc), "g_n0": exc.detail}))
        else:
            _emit(_config_line(config))
        raise
    _report_tuning(args, _config(args, "n"), rows, "delta_star")
    return EXIT_OK


def _sweep_grid(args):
    if not args.step > 0:
        raise UsageError("--step must be positive")
    if args.stop < args.start:
        raise UsageError(f"empty sweep range [{args.start}, {args.stop}]")
    count = int(math.floor((args.stop - args.start) / args.step + 1e-9))
    values = [args.start + k * args.step for k in range(count + 1)]
    if args.param == "n":
        values = [int(round(v)) for v in values]
        args.start, args.stop, args.step = (
            int(x) if float(x).is_integer() else x for x in (args.start, args.stop, args.step)
        )
    else:
        values = [round(v, 12) for v in values]
    return values


def _sweep_point(args, value):
    fixed = {"delta0": value} if args.param == "delta" else {"n0": value}
    row = {args.param: value}
    try:
        results = _run_tuning(args, **fixed)
    except InfeasibleError:
        return row, None
    for m, r, _ in results:
        row[m] = r.display
        if m == "chernoff" and args.param == "delta":
            row["chebyshev"] = r.diagnostics.chebyshev_n
    return row, results


def cmd_sweep(args) -> int:
    _resolve_seed(args)
    values = _sweep_grid(args)
    if args.param == "delta":
        for v in values:
            tuning.TuningRequest(desired_load=args.l0, p0=args.p0, delta0=v)
    workers = min(max_threads(), len(values))
    with ThreadPoolExecutor(workers) as pool:
        points = list(pool.map(lambda v: _sweep_point(args, v), values))
    label = "n" if args.param == "delta" else "delta"
    cols = [args.param] + [f"{m}_{label}" for m in _methods(args)]
    if args.param == "delta" and "chernoff" in _methods(args):
        cols.append("chebyshev_n")
    infeasible = 0
    body = []
    for row, results in points:
        if results is None:
            infeasible += 1
            body.append([str(row[args.param])] + ["infeasible"] * (len(cols) - 1))
            continue
        cells = [f"{row[args.param]:g}" if args.param == "delta" else str(row[args.param])]
        cells += [row[m] for m in _methods(args)]
        if "chebyshev" in row:
            cells.append(str(row["chebyshev"]))
        body.append(cells)
    config = _config(args, "param", "start", "stop", "step")
    if _is_json(args):
        _emit(json.dumps({"config": config, "columns": cols, "rows": body}, indent=2))
    else:
        _emit("\n".join([_config_line(config), ",".join(cols)] + [",".join(r) for r in body]))
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


# ---------------------------------------------------------------------------
# Simulation commands


def cmd_simulate(args) -> int:
    _resolve_seed(args)
    policy = prob.ScalingPolicy(args.l0, args.delta)
    trace = WorkloadTrace.read(args.trace)
    initial = SystemState(args.n0, trace.workload_at(0))
    report = run_workload(trace, initial, policy, np.random.default_rng(args.seed), args.cycles)
    config = _config(args, "trace", "n0", "delta", "cycles")
    lines = [_config_line(config)] + report.csv_lines()
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        _emit(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    _resolve_seed(args)
    policy = prob.ScalingPolicy(args.l0, args.delta)
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    exact = prob.binomial_correctness(args.load, policy, args.n)
    pt = policy.rescale(args.load)
    ev = prob.evaluate_correctness(pt, args.n)
    q, se = estimate_correctness(args.n, args.load, policy, args.trials, args.seed)
    sigma = max(se, math.sqrt(exact * (1.0 - exact) / args.trials))
    agree = abs(q - exact) <= 3.0 * sigma + 1e-12
    if ev.chernoff_lower is None:
        dominance = None
    else:
        dominance = exact >= ev.chernoff_lower
    config = _config(args, "n", "load", "delta", "trials")
    checks = {
        "agreement_3sigma": "PASS" if agree else "FAIL",
        "dominance": "n/a" if dominance is None else ("PASS" if dominance else "FAIL"),
    }
    ok = agree and dominance is not False
    if _is_json(args):
        _emit(json.dumps({
            "config": config, "p": pt.p, "eps": pt.eps,
            "empirical": q, "standard_error": se, "exact": exact,
            "bound": ev.chernoff_lower, "bound_kind": ev.which_bound, "bound_note": ev.note,
            "checks": checks, "status": "PASS" if ok else "FAIL",
        }, indent=2))
    elif args.format == "csv":
        _emit("\n".join([
            _config_line(config),
            "empirical,standard_error,exact,bound,bound_kind,agreement_3sigma,dominance,status",
            f"{q:.6f},{se:.6f},{exact:.12f},"
            f"{'' if ev.chernoff_lower is None else f'{ev.chernoff_lower:.12f}'},"
            f"{ev.which_bound},{checks['agreement_3sigma']},{checks['dominance']},"
            f"{'PASS' if ok else 'FAIL'}",
        ]))
    else:
        bound = ("-" if ev.chernoff_lower is None
                 else f"{ev.chernoff_lower:.6f} ({ev.which_bound})")
        lines = [
            _config_line(config),
            f"rescaled: p={pt.p:.6f} eps={pt.eps:.6f}",
            f"empirical: {q:.6f} +/- {se:.6f}",
            f"exact:     {exact:.6f}",
            f"bound:     {bound}",
        ]
        if ev.note:
            lines.append(f"note:      {ev.note}")
        lines.append(f"agreement (3 sigma): {checks['agreement_3sigma']}")
        lines.append(f"dominance (exact >= bound): {checks['dominance']}")
        lines.append("PASS" if ok else "FAIL")
        _emit("\n".join(lines))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {
    "min-n": cmd_min_n,
    "min-delta": cmd_min_delta,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"depas: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, UsageError, TraceError) as exc:
        print(f"depas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit status is 0 when every check passes, 1 when a check fails (a JSON
failure report, including the command line that reproduces it, goes to
standard output) and 2 on a usage or configuration error. Progress messages
go to standard error.
"""

from __future__ import annotations

import argparse
import io
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from . import analysis, checks
from .errors import DomainError, NumericalError, PreconditionError, UsageError
from .limit_law import DilatedMP
from .mc_harness import FORMATS, SimConfig, dumps, run_ensemble, sample_spectra

PROG = "fracwishart"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, seed: int = 0) -> None:
    p.add_argument("--seed", type=int, default=seed, help="master seed")
    p.add_argument("--out", type=Path, default=None, help="output file (default: standard output)")
    p.add_argument("--format", choices=FORMATS, default="json")
    p.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo replicas")


def _sim(parser: argparse.ArgumentParser, **defaults) -> None:
    d = dict(n=10, p=15, H=0.75, T=1.0, m=128, replicas=100)
    d.update(defaults)
    parser.add_argument("--n", type=int, default=d["n"])
    parser.add_argument("--p", type=int, default=d["p"])
    parser.add_argument("--H", type=float, default=d["H"])
    parser.add_argument("--T", type=float, default=d["T"])
    parser.add_argument("--m", type=int, default=d["m"])
    parser.add_argument("--replicas", type=int, default=d["replicas"])
    parser.add_argument("--fbm-method", dest="fbm_method", choices=("cholesky", "circulant"), default="circulant")
    parser.add_argument("--scale", action=argparse.BooleanOptionalAction, default=True,
                   help="use X/n (default) or X")
    parser.add_argument("--offsets", type=Path, default=None, help="JSON file with the p x n matrix N(0)")
    parser.add_argument("--solver", choices=("lapack", "jacobi"), default="lapack")
    parser.add_argument("--lags", type=int, nargs="+", default=list(d.get("lags", (2, 4, 8, 16, 32))),
                   help="structure-function lags in grid steps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Fractional Wishart spectra: simulation and verification.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run an ensemble and write its summary")
    _sim(p)
    _common(p)
    p.add_argument("--trace-tol", type=float, default=1e-10)

    p = sub.add_parser("verify-limit", help="KS distance of simulated spectra to the dilated free Poisson law")
    _sim(p, n=150, p=300, T=2.0, m=4, replicas=5)
    _common(p)
    p.add_argument("--times", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--ks-max", type=float, default=0.06)
    p.add_argument("--compare-n", type=int, default=25, help="smaller n whose KS must be larger (0 disables)")
    p.add_argument("--compare-replicas", type=int, default=20)

    p = sub.add_parser("verify-gradients", help="eigenvalue derivatives against finite differences")
    _common(p, seed=7)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--hessian-trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("verify-pde", help="PDE residual of the closed-form transform, and its quadrature check")
    _common(p)
    p.add_argument("--h", type=float, default=1e-4, help="finite-difference step in t and z")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--transform-tol", type=float, default=1e-8)
    p.add_argument("--skip-quadrature", action="store_true")

    p = sub.add_parser("verify-cst", help="residual of the integral equation")
    _common(p)
    p.add_argument("--c", type=float, nargs="+", default=[2.0])
    p.add_argument("--H", type=float, nargs="+", default=[0.8])
    p.add_argument("--t", type=float, nargs="+", default=[0.5, 1.0])
    p.add_argument("--z", type=complex, nargs="+", default=[1j, 1 + 1j])
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("gaps", help="minimum eigenvalue gaps along simulated paths")
    _sim(p)
    _common(p)

    p = sub.add_parser("holder", help="structure-function slope of eigenvalue increments")
    _sim(p, n=20, p=30, H=0.6, m=256, replicas=500)
    _common(p)
    p.add_argument("--rel-tol", type=float, default=0.10)

    p = sub.add_parser("invmoment", help="scaling of E|l1 - l2|^-r in time")
    _sim(p, n=5, p=8, H=0.7, T=4.0, m=16, replicas=2000)
    _common(p)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--times", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0, 4.0])
    p.add_argument("--rel-tol", type=float, default=0.15)

    p = sub.add_parser("law-table", help="density and CDF of the dilated law on its support")
    _common(p)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--points", type=int, default=100)
    return parser


def _config(args) -> SimConfig:
    offsets = None
    if args.offsets is not None:
        try:
            offsets = json.loads(args.offsets.read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read offsets from {args.offsets}: {exc}") from exc
    return SimConfig(
        n=args.n, p=args.p, H=args.H, T=args.T, m=args.m, replicas=args.replicas, seed=args.seed,
        fbm_method=args.fbm_method, scale=args.scale, offsets=offsets, solver=args.solver,
        lags=tuple(args.lags),
    ).validate()


def _progress(total: int):
    step = max(1, total // 10)

    def tick(done: int) -> None:
        if done % step == 0 or done == total:
            print(f"{done}/{total} replicas", file=sys.stderr)

    return tick


def _rows_csv(rows: list) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    cols = list(rows[0])
    buf.write(",".join(cols) + "\n")
    for row in rows:
        buf.write(",".join(_cell(row[c]) for c in cols) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def _render(rep: dict, fmt: str) -> str:
    if fmt == "csv":
        return _rows_csv(rep.get("rows", []))
    return json.dumps(rep, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc.strerror or exc}") from exc


def _cmd_simulate(args):
    cfg = _config(args)
    summary = run_ensemble(cfg, args.workers, _progress(cfg.replicas))
    rep = checks.report("simulate", [checks.check("trace_relative_error", summary.trace_error, args.trace_tol)])
    return rep, dumps(summary, args.format)


def _cmd_verify_limit(args):
    cfg = _config(args)
    rep, _ = checks.verify_limit(cfg, args.times, args.ks_max, args.compare_n, args.compare_replicas, args.workers)
    return rep, None


def _cmd_verify_gradients(args):
    return checks.verify_gradients(args.trials, args.hessian_trials, args.seed, args.tol), None


def _cmd_verify_pde(args):
    rep = checks.verify_pde(args.h, args.tol)
    if not args.skip_quadrature:
        tr = checks.verify_transform(args.transform_tol)
        rep = checks.report("verify-pde", rep["checks"] + tr["checks"], rows=rep["rows"], transform_rows=tr["rows"])
    return rep, None


def _cmd_verify_cst(args):
    return checks.verify_cst(args.c, args.H, args.t, args.z, args.tol), None


def _cmd_gaps(args):
    cfg = _config(args)
    if cfg.n < 2:
        raise UsageError("gap statistics need n >= 2")
    summary = run_ensemble(cfg, args.workers, _progress(cfg.replicas))
    g = summary.gaps
    rows = [
        {"replica": r, "seed": s, "min_gap": v, "time": t, "index": i}
        for r, (s, v, t, i) in enumerate(zip(summary.seeds, g["min_gap"], g["time"], g["index"]))
    ]
    rep = checks.report(
        "gaps",
        [
            checks.check("exact_ties", g["ties"], 0),
            checks.check("smallest_min_gap", min(g["min_gap"]), 0.0, passed=g["all_positive"]),
        ],
        rows=rows,
    )
    return rep, None


def _cmd_holder(args):
    cfg = _config(args)
    if not cfg.structure_enabled:
        raise UsageError("structure function needs >= 100 replicas and lags spanning a decade within the grid")
    summary = run_ensemble(cfg, args.workers, _progress(cfg.replicas))
    st = summary.structure
    if st is None:
        raise DomainError("structure function is degenerate")
    target = 4 * cfg.H
    rep = checks.report(
        "holder",
        [checks.check("slope_relative_error", abs(st["slope"] - target) / target, args.rel_tol)],
        slope=st["slope"], target=target,
        rows=[{"lag": tau, "value": v} for tau, v in zip(st["lags"], st["values"])],
    )
    return rep, None


def _cmd_invmoment(args):
    cfg = _config(args)
    spectra = sample_spectra(cfg, args.times, args.workers, _progress(cfg.replicas))
    fit = analysis.inverse_moment_scaling(args.r, args.times, [spectra[:, j] for j in range(len(args.times))])
    target = -2 * args.r * cfg.H
    rep = checks.report(
        "invmoment",
        [checks.check("slope_relative_error", abs(fit.slope - target) / abs(target), args.rel_tol)],
        slope=fit.slope, target=target, truncated=fit.truncated,
        rows=[{"time": t, "estimate": e, "standard_error": s}
              for t, e, s in zip(fit.times, fit.estimates, fit.standard_errors)],
    )
    return rep, None


def _cmd_law_table(args):
    if args.points < 1:
        raise UsageError("--points must be positive")
    if args.t == 0:
        raise DomainError("the law at t = 0 is a point mass; no density table")
    law = DilatedMP(args.c, args.H, args.t)
    lo, hi = law.edges
    x = lo + (hi - lo) * (np.arange(args.points) + 0.5) / args.points
    dens, cdf = law.density(x), law.cdf(x)
    rows = [{"x": a, "density": b, "cdf": c} for a, b, c in zip(x, dens, cdf)]
    rep = checks.report("law-table", [], c=law.c, H=law.H, t=law.t, atom=law.atom,
                        lower=lo, upper=hi, rows=rows)
    return rep, None


COMMANDS = {
    "simulate": _cmd_simulate,
    "verify-limit": _cmd_verify_limit,
    "verify-gradients": _cmd_verify_gradients,
    "verify-pde": _cmd_verify_pde,
    "verify-cst": _cmd_verify_cst,
    "gaps": _cmd_gaps,
    "holder": _cmd_holder,
    "invmoment": _cmd_invmoment,
    "law-table": _cmd_law_table,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        rep, payload = COMMANDS[args.command](args)
    except (UsageError, DomainError, PreconditionError) as exc:
        print(f"{PROG} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        rep, payload = checks.report(args.command, [checks.check("numerical", 1.0, 0.0)], error=str(exc)), None
    text = payload if payload is not None else _render(rep, args.format)
    try:
        if rep["status"] == "pass" or args.out is not None:
            _emit(text, args.out)
    except UsageError as exc:
        print(f"{PROG} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if rep["status"] == "pass":
        return 0
    failure = dict(rep, reproduce=shlex.join([PROG] + argv))
    sys.stdout.write(json.dumps(failure, indent=2, sort_keys=True) + "\n")
    return 1

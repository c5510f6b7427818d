"""Command-line front end.

Exit codes: 0 success, 1 a checked property failed, 2 usage or config
error, 3 requested assertions could not be resolved from the data.
"""

from __future__ import annotations

import argparse
import sys
from collections import OrderedDict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .axioms import FUNCTIONALS, POWERS, run_suite
from .errors import UsageError
from .estimator import (
    Estimate,
    add_one_series,
    atomic_write,
    boundary_growth,
    closeness_gap,
    estimate_grid,
    fit_alpha,
    format_csv,
    poissonization_gap,
    perturbation_gaps,
    read_csv,
    residual_rate,
)
from .geometry import Box, read_points
from .sampling import AffineDensity, approximate_block, l1_gap
from .solvers import BOUNDARY, Instance, PowerParams, solve

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


# ------------------------------------------------------------ solve


def cmd_solve(args) -> int:
    ps = read_points(args.infile)
    if args.box:
        vals = _floats(args.box)
        if len(vals) != ps.dim + 1:
            raise UsageError("--box needs d corner coordinates followed by the side")
        box = Box(np.array(vals[:-1]), vals[-1])
    else:
        box = Box.unit(ps.dim)
    inst = Instance(ps, box, PowerParams(args.p, ps.dim), args.functional, args.variant, args.mode, args.boundary_factor)
    sol = solve(inst)
    print(f"functional={sol.functional.value} variant={sol.variant.value} p={args.p!r} n={len(ps)} certified={str(sol.certified).lower()}")
    print(f"value={sol.value!r}")
    if sol.variant.value == "dual" and args.mode != "brute_oracle":
        print(f"N_B={sol.n_boundary} L_B={sol.boundary_cost!r}")
    if args.edges:
        for i, j in sol.edges:
            a = "B" if i == BOUNDARY else str(i)
            b = "B" if j == BOUNDARY else str(j)
            print(f"{a} {b}")
    return EXIT_OK


# ------------------------------------------------------------ axioms


def cmd_axioms(args) -> int:
    results = run_suite(
        trials=args.trials,
        seed=args.seed,
        d=args.d,
        powers=tuple(_floats(args.powers)),
        functionals=tuple(args.functionals.split(",")),
        n_max=args.n_max,
        include_dual=not args.no_dual,
    )
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} passed")
    return EXIT_FAIL if failed else EXIT_OK


# ------------------------------------------------------------ experiments


def _experiment_config(args, need_seed: bool = True) -> cfgmod.ExperimentConfig:
    base = cfgmod.load(args.config, args.section) if args.config else None
    over = {
        "functional": args.functional,
        "variant": args.variant,
        "d": args.d,
        "p": args.p,
        "sampler": args.sampler,
        "n_grid": tuple(_ints(args.n)) if args.n else None,
        "trials": args.trials,
        "seed": args.seed,
        "output": args.out,
        "mode": args.mode,
        "boundary_factor": args.boundary_factor,
    }
    if base is None:
        fn = over["functional"] or "mst"
        if over["n_grid"] is None:
            over["n_grid"] = cfgmod.DEFAULT_GRIDS[fn]
        cfg = cfgmod.ExperimentConfig(**{k: v for k, v in over.items() if v is not None})
    else:
        cfg = base.override(**over)
    if need_seed and cfg.seed is None:
        raise UsageError("a seed is required (--seed or 'seed = ...' in the config)")
    return cfg


def cmd_estimate(args) -> int:
    cfg = _experiment_config(args)
    ests = estimate_grid(cfg.template(), cfg.n_grid, cfg.trials, cfg.seed, args.threads)
    text = format_csv(ests)
    if cfg.output:
        atomic_write(cfg.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _verdict(value: float, limit: float | None, status: str) -> tuple[str, int]:
    if limit is None:
        return "not asserted", EXIT_OK
    if status != "ok":
        return "inconclusive", EXIT_INCONCLUSIVE
    if value <= limit:
        return "pass", EXIT_OK
    return "fail", EXIT_FAIL


def cmd_rates(args) -> int:
    cfg = _experiment_config(args)
    ests = estimate_grid(cfg.template(), cfg.n_grid, cfg.trials, cfg.seed, args.threads)
    fit = fit_alpha(ests)
    res = residual_rate(ests, fit.alpha_hat, fit.alpha_stderr)
    verdict, code = _verdict(res.exponent_hat, args.max_slope, res.status)
    lines = ["[alpha]", fit.report(), "[residual]", res.report(), f"max_slope = {args.max_slope}", f"verdict = {verdict}", ""]
    report = "\n".join(lines)
    if cfg.output:
        atomic_write(cfg.output, report)
    else:
        sys.stdout.write(report)
    if args.csv:
        atomic_write(args.csv, format_csv(ests))
    if args.plot:
        from .plotting import rate_plot

        rate_plot(ests, fit, args.plot)
    return code


def cmd_gaps(args) -> int:
    cfg = _experiment_config(args)
    tpl = cfg.template()
    out = []
    slope_status = "ok"
    slope = float("nan")
    if args.kind == "closeness":
        series = [closeness_gap(tpl, cfg.n_grid, cfg.trials, cfg.seed, args.threads)]
    elif args.kind == "boundary":
        series = list(boundary_growth(tpl, cfg.n_grid, cfg.trials, cfg.seed, args.threads))
    elif args.kind == "perturbation":
        ks = _ints(args.k) if args.k else [0, 1]
        series = [perturbation_gaps(tpl, cfg.n_grid[-1], ks, cfg.trials, cfg.seed, args.threads)]
    elif args.kind == "add-one":
        series = [add_one_series(tpl, cfg.n_grid, cfg.trials, cfg.seed, args.threads)]
    else:
        series = [poissonization_gap(tpl, cfg.n_grid, cfg.trials, cfg.seed, args.threads)]
    for s in series:
        out.append(s.table())
        if args.kind != "perturbation":
            sf = s.slope()
            ub = s.upper_slope()
            out.append(f"slope = {sf.slope!r} +- {sf.slope_stderr!r} status = {sf.status} used = {sf.used}")
            out.append(f"upper_envelope_slope = {ub.slope!r}\n")
    # the asserted slope is the last series (L_B for boundary runs)
    if args.kind != "perturbation":
        sf = series[-1].slope()
        slope, slope_status = sf.slope, sf.status
    verdict, code = _verdict(slope, args.max_slope, slope_status)
    if args.kind == "closeness" and any(g.extra.get("min_gap", 0.0) < -1e-9 for g in series[0].points):
        verdict, code = "fail (negative paired gap)", EXIT_FAIL
    out.append(f"max_slope = {args.max_slope}\nverdict = {verdict}\n")
    text = "\n".join(out)
    if cfg.output:
        atomic_write(cfg.output, text)
    else:
        sys.stdout.write(text)
    return code


def cmd_density_approx(args) -> int:
    f = AffineDensity(args.a, args.d)
    beta = f.beta if args.beta is None else args.beta
    K = f.K if args.K is None else args.K
    print("m gap bound")
    bad = 0
    for m in _ints(args.m):
        gap = l1_gap(f, approximate_block(f, m))
        bound = args.d ** (beta / 2) * K * m ** (-beta)
        bad += gap > bound + 1e-12
        print(f"{m} {gap!r} {bound!r}")
    return EXIT_FAIL if bad else EXIT_OK


def cmd_report(args) -> int:
    groups: OrderedDict[tuple, list[Estimate]] = OrderedDict()
    for path in args.csv:
        for e in read_csv(path):
            groups.setdefault((e.functional, e.variant, e.d, e.p, e.sampler, e.seed), []).append(e)
    out = []
    for key, ests in groups.items():
        ests = sorted({e.n: e for e in ests}.values(), key=lambda e: e.n)
        fn, var, d, p, sampler, seed = key
        q = (d - p) / d
        out.append(f"[{fn}{'*' if var == 'dual' else ''} d={d} p={p:g} sampler={sampler} seed={seed}]")
        out.append("n trials mean stderr mean/n^((d-p)/d)")
        for e in ests:
            out.append(f"{e.n} {e.trials} {e.mean!r} {e.stderr!r} {e.mean / e.n ** q if e.n else 0.0!r}")
        if len(ests) >= 4 and 0 < p < d:
            fit = fit_alpha(ests)
            out.append(f"alpha_hat = {fit.alpha_hat!r} +- {fit.alpha_stderr!r} ({fit.model})")
        out.append("")
    text = "\n".join(out)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------ parser


def _add_experiment_args(sp) -> None:
    sp.add_argument("--config", help="INI file with experiment sections")
    sp.add_argument("--section", help="section name (default: first)")
    sp.add_argument("--functional", choices=["mm", "mst", "tsp"])
    sp.add_argument("--variant", choices=["plain", "dual"])
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--sampler", help="uniform | poisson | holder(a=<real>) | block(path=<file>)")
    sp.add_argument("--n", help="grid of sizes, e.g. '128 256 512 1024'")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--mode", choices=["exact", "heuristic"])
    sp.add_argument("--boundary-factor", type=float)
    sp.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="eucrates", description="Power-weighted Euclidean functionals and rate experiments.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("solve", help="solve one instance from a point file")
    sp.add_argument("--functional", required=True, choices=["mm", "mst", "tsp"])
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--variant", default="plain", choices=["plain", "dual"])
    sp.add_argument("--mode", default="exact", choices=["exact", "heuristic", "brute_oracle"])
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--box", help="'c_1 ... c_d side' (default: unit cube)")
    sp.add_argument("--boundary-factor", type=float)
    sp.add_argument("--edges", action="store_true")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("axioms", help="randomised property suite")
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--powers", default=" ".join(str(p) for p in POWERS))
    sp.add_argument("--functionals", default=",".join(FUNCTIONALS))
    sp.add_argument("--n-max", type=int, default=12)
    sp.add_argument("--no-dual", action="store_true")
    sp.set_defaults(func=cmd_axioms)

    sp = sub.add_parser("estimate", help="Monte Carlo means to CSV")
    _add_experiment_args(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("rates", help="alpha fit and residual rate")
    _add_experiment_args(sp)
    sp.add_argument("--csv", help="also write the estimates CSV here")
    sp.add_argument("--plot", help="write an SVG log-log plot here")
    sp.add_argument("--max-slope", type=float, help="assert the residual log-slope is at most this")
    sp.set_defaults(func=cmd_rates)

    sp = sub.add_parser("gaps", help="paired gap experiments")
    _add_experiment_args(sp)
    sp.add_argument("--kind", default="closeness", choices=["closeness", "boundary", "perturbation", "add-one", "poisson"])
    sp.add_argument("--k", help="k values for --kind perturbation (uses the largest n)")
    sp.add_argument("--max-slope", type=float, help="assert the gap log-slope is at most this")
    sp.set_defaults(func=cmd_gaps)

    sp = sub.add_parser("density-approx", help="block approximation gap vs bound")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--K", type=float)
    sp.add_argument("--m", default="1 2 4 8 16")
    sp.set_defaults(func=cmd_density_approx)

    sp = sub.add_parser("report", help="summarise estimate CSVs")
    sp.add_argument("csv", nargs="+")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            build_parser().print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""``roptd`` command line.

Exit status: 0 when the design converged or verified, 2 when it did not,
1 on any input error.  Summaries go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path

from .config import ConfigError, load_config
from .driver import orbit_reduction, problem_context, solve_problem
from .equivalence import export_d_surface, verify_optimality
from .information import InfeasibleWeightsError, SingularInformationError
from .model import ModelError
from .reporting import read_weights_csv, round_design, write_exact_design, write_report
from .symmetry import SymmetryError, Transform, detect_Q

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_OPTIMAL = 2

log = logging.getLogger("roptd")


def _axes(arg):
    if arg is None:
        return None
    return [a.strip() for a in arg.split(",") if a.strip()]


def _fmt_point(p):
    return "(" + ", ".join(f"{v:.4f}" for v in p) + ")"


def _require_weights(args):
    if not args.weights:
        raise ConfigError(f"{args.command} needs --weights FILE")


def cmd_solve(cfg, args) -> int:
    rep = solve_problem(cfg, args.algorithm, _axes(args.symmetry), args.delta,
                        use_correlation=not args.use_v0_raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(rep, "json", out / "report.json")
    write_report(rep, "csv", out / "support.csv", names=cfg.space.names)
    export_d_surface(problem_context(cfg, not args.use_v0_raw), rep.weights, cfg.space,
                     out / "d_surface.csv")
    sym = rep.extra["symmetry"]
    print(f"algorithm   {rep.algorithm}")
    print(f"working     {rep.working}")
    if sym["applied"]:
        print(f"symmetry    axes {','.join(sym['axes'])}: {sym['n_orbits']} orbits for N={sym['N']}")
    print(f"converged   {rep.converged}")
    print(f"loss        {rep.loss:.10g}")
    print(f"max_d       {rep.max_d:.3e}")
    print(f"support     {len(rep.support)} points")
    if rep.algorithm == "interior":
        print("stages      t        iters  max_d      status")
        for s in rep.outer_trace:
            print(f"            {s.t:<8.4g} {s.inner_iters:<6d} {s.max_d:<10.3e} {s.status}")
    else:
        print(f"iterations  {rep.extra['iterations']} (loss increases: {rep.extra['loss_increases']})")
    for p, wt in rep.support:
        print(f"  {_fmt_point(p)}  {wt:.4f}")
    print(f"wrote       {out / 'report.json'}, {out / 'support.csv'}, {out / 'd_surface.csv'}")
    return EXIT_OK if rep.converged else EXIT_NOT_OPTIMAL


def cmd_verify(cfg, args) -> int:
    _require_weights(args)
    w = read_weights_csv(args.weights, cfg.space)
    ctx = problem_context(cfg, not args.use_v0_raw)
    delta = cfg.solver.delta if args.delta is None else args.delta
    rep = verify_optimality(ctx, w, delta, cfg.solver.support_threshold)
    print(f"max_d       {rep.max_d:.3e} at {_fmt_point(cfg.space.points[rep.argmax_j])}")
    print(f"delta       {rep.delta_used:g}")
    print(f"support     {len(rep.support_indices)} points, max |d| {rep.support_abs_d:.3e}")
    for note in rep.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"optimal     {rep.optimal}")
    return EXIT_OK if rep.optimal else EXIT_NOT_OPTIMAL


def cmd_reduce_info(cfg, args) -> int:
    axes = _axes(args.symmetry) if args.symmetry is not None else cfg.symmetry
    if not axes:
        raise ConfigError("reduce-info needs symmetry axes (--symmetry or [symmetry].axes)")
    idx = cfg.axis_indices(axes)
    for name, a in zip(axes, idx):
        Q = detect_Q(cfg.model, cfg.space, Transform.reflection(a))
        print(f"Q[{name}]      " + " ".join(f"{int(v):+d}" for v in Q))
    red = orbit_reduction(cfg, axes)
    sizes = Counter(int(s) for s in red.multiplicities)
    print(f"N           {red.N}")
    print(f"orbits      {red.n_orbits}")
    print("sizes       " + ", ".join(f"{k}x{v}" for k, v in sorted(sizes.items())))
    return EXIT_OK


def cmd_round(cfg, args) -> int:
    _require_weights(args)
    if args.n is None:
        raise ConfigError("round needs --n RUNS")
    w = read_weights_csv(args.weights, cfg.space)
    design = round_design(w, args.n, cfg.space, threshold=cfg.solver.support_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = write_exact_design(design, cfg.space.names, out / "exact_design.csv")
    for p, c in design.runs:
        print(f"  {_fmt_point(p)}  {c}")
    print(f"total       {design.n} runs on {len(design.runs)} points")
    print(f"wrote       {path}")
    return EXIT_OK


def cmd_export_d(cfg, args) -> int:
    _require_weights(args)
    w = read_weights_csv(args.weights, cfg.space)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = export_d_surface(problem_context(cfg, not args.use_v0_raw), w, cfg.space, out / "d_surface.csv")
    print(f"wrote       {path}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "reduce-info": cmd_reduce_info,
    "round": cmd_round,
    "export-d": cmd_export_d,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roptd", description="R-optimal approximate designs on discrete grids.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("config", help="config file, or the name of a bundled config such as example1.cfg")
    ap.add_argument("--algorithm", choices=["interior", "multiplicative"], default=None)
    ap.add_argument("--symmetry", default=None, metavar="AXES",
                    help="comma separated reflection axes, e.g. x1,x2")
    ap.add_argument("--delta", type=float, default=None, help="optimality tolerance on max d")
    ap.add_argument("--out", default=".", metavar="DIR")
    ap.add_argument("--weights", default=None, metavar="FILE",
                    help="support or d-surface CSV written by an earlier run")
    ap.add_argument("--n", type=int, default=None, help="number of runs for 'round'")
    ap.add_argument("--use-v0-raw", action="store_true",
                    help="work with V0 instead of its correlation matrix R0")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.delta is not None and not args.delta > 0:
        print("roptd: error: --delta must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except SingularInformationError as exc:
        print(f"roptd: singular information matrix: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SymmetryError as exc:
        where = f" (witness {exc.witness})" if exc.witness is not None else ""
        print(f"roptd: symmetry error: {exc}{where}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ModelError, InfeasibleWeightsError, ValueError, OSError) as exc:
        print(f"roptd: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

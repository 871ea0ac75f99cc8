"""Command-line front end: ``adswitch {solve,study,list,check}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import noise, problems
from .diagnostics import write_history_csv, write_report_json
from .problems import UnknownProblemError, builtin, check_derivatives, eval_objective
from .solver import SolverConfig, solve

OUT_DIR_ENV = "ADSWITCH_OUT_DIR"
CHECK_TOL = 1e-4

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("adswitch")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _level(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("noise levels must lie in [0, 1]")
    return v


def _add_config_flags(p: argparse.ArgumentParser, eps_default: float):
    d = SolverConfig()
    p.add_argument("--eps", type=float, default=eps_default, help=f"stopping tolerance (default {eps_default:g})")
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--eta", type=float, default=d.eta)
    p.add_argument("--theta", type=float, default=d.theta)
    p.add_argument("--delta", type=float, default=d.delta)
    p.add_argument("--varsigma", type=float, default=d.varsigma)
    p.add_argument("--diagnostics", action="store_true", help="record f (and psi with --rho-diag) every iteration")
    p.add_argument("--rho-diag", type=float, default=None, help="penalty weight for the Lyapunov diagnostic")
    p.add_argument("--out-dir", type=Path, default=None, help=f"output directory (default ${OUT_DIR_ENV})")


def _config(args, accept_rule: bool) -> SolverConfig:
    return SolverConfig(
        beta=args.beta,
        eta=args.eta,
        theta=args.theta,
        delta=args.delta,
        varsigma=args.varsigma,
        epsilon=args.eps,
        max_iter=args.max_iter,
        rho_diag=args.rho_diag,
        diagnostics=args.diagnostics or args.rho_diag is not None,
        accept_rule=accept_rule,
    )


def _out_dir(args) -> Path | None:
    out = args.out_dir
    if out is None and os.environ.get(OUT_DIR_ENV):
        out = Path(os.environ[OUT_DIR_ENV])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adswitch", description="Adaptive switching solver for equality-constrained problems.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one problem")
    p.add_argument("problem", nargs="?", help="registered problem name")
    p.add_argument("--manifest", type=Path, help="JSON problem manifest instead of a name")
    p.add_argument("--n", type=int, default=None, help="size of a synthetic problem")
    p.add_argument("--accept", action="store_true", help="also stop on an acceptable objective value (needs f_star)")
    p.add_argument("--level", type=_level, default=0.0, help="relative gradient noise level")
    p.add_argument("--seed", type=int, default=0)
    _add_config_flags(p, eps_default=1e-5)

    p = sub.add_parser("study", help="noise reliability study")
    p.add_argument("problems", nargs="+")
    p.add_argument("--levels", type=_level, nargs="+", default=list(noise.DEFAULT_LEVELS))
    p.add_argument("--runs", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    _add_config_flags(p, eps_default=noise.STUDY_EPSILON)

    sub.add_parser("list", help="list registered problems")

    p = sub.add_parser("check", help="finite-difference derivative check")
    p.add_argument("problems", nargs="*", help="problem names (default: all)")
    p.add_argument("--h", type=float, default=1e-6)
    return parser


def _lookup(name, n=None):
    try:
        return builtin(name, n)
    except UnknownProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def summary_line(name, n, m, f, gt, cn, iters, exitc) -> str:
    fs = "---" if f is None else f"{f:+.6e}"
    return f"{name:<10s} {n:4d} {m:4d} {fs:>14s} {gt:.2e} {cn:.2e} {iters:6d} {exitc}"


def cmd_solve(args) -> int:
    if args.manifest is not None:
        problem = problems.load_manifest(args.manifest)
    elif args.problem:
        problem = _lookup(args.problem, args.n)
        if problem is None:
            return EXIT_USAGE
    else:
        print("error: give a problem name or --manifest", file=sys.stderr)
        return EXIT_USAGE
    config = _config(args, accept_rule=args.accept)
    perturb = None
    if args.level > 0:
        spec = noise.NoiseSpec(args.level, args.seed)
        rng = noise.make_rng(args.seed)
        perturb = lambda g: noise.perturb_gradient(g, spec, rng)  # noqa: E731
    report = solve(problem, config, perturb=perturb)
    st = report.status
    f = st.f if st.f is not None else eval_objective(problem, report.x_final)
    print(summary_line(problem.name, problem.n, problem.m, f, st.gT_norm, st.c_norm, st.k_final, st.exitc))
    if not report.audits_passed():
        failed = [k for k, a in report.audit.items() if not a.passed]
        print(f"warning: audits failed: {', '.join(failed)}", file=sys.stderr)
    out = _out_dir(args)
    if out is not None:
        csv_path = write_history_csv(report, out / f"{problem.name}.csv")
        write_report_json(report, out / f"{problem.name}.json", history_csv=csv_path.name)
    return EXIT_OK if st.success else EXIT_FAIL


def cmd_study(args) -> int:
    insts = []
    for name in args.problems:
        p = _lookup(name)
        if p is None:
            return EXIT_USAGE
        insts.append(p)
    config = _config(args, accept_rule=True)
    summary = noise.run_study(insts, args.levels, args.runs, config, seed=args.seed, workers=args.workers)
    print(f"{'problem':<10s} {'level':>6s} {'success':>8s} {'avg its':>9s}")
    for c in summary.cells:
        print(f"{c.problem:<10s} {c.level:6.2f} {c.successes:>4d}/{c.runs:<3d} {c.avg_iterations:9.1f}")
    print()
    print(f"{'level':>6s} {'failures':>9s} {'successes':>10s}")
    for level, fail, ok in summary.reliability():
        print(f"{level:6.0%} {fail:9d} {ok:10d}")
    out = _out_dir(args)
    if out is not None:
        for level in summary.levels:
            summary.write_level_csv(level, out / f"study_level_{level:g}.csv")
        summary.write_json(out / "study.json")
    return EXIT_OK


def cmd_list(args) -> int:
    for name, (n, m) in problems.registry_dims().items():
        print(f"{name:<12s} n={n:<4d} m={m}")
    return EXIT_OK


def cmd_check(args) -> int:
    names = args.problems or problems.available()
    worst = 0.0
    for name in names:
        p = _lookup(name)
        if p is None:
            return EXIT_USAGE
        rep = check_derivatives(p, p.x0, args.h)
        worst = max(worst, rep.max_error)
        print(f"{name:<12s} gradient {rep.gradient_error:.2e} jacobian {rep.jacobian_error:.2e}")
    return EXIT_FAIL if worst > CHECK_TOL else EXIT_OK


COMMANDS = {"solve": cmd_solve, "study": cmd_study, "list": cmd_list, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

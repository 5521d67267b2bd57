"""Command-line driver: unisolvency lab, convergence studies, epsilon sweeps.

Commands
--------
unisolvency   DOF-matrix invertibility over random shape-regular simplices
converge      solve a benchmark problem over a level sequence, report errors
sweep         singularly perturbed benchmark over a range of epsilons

Numbers are formatted like 2.5856e+1 (five significant digits), orders
with two decimals, so tables can be eyeballed against references; CSV
output is byte-stable for a fixed configuration and thread count.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import element, problems

_PROBLEMS = ("triharmonic-square", "triharmonic-lshape", "robust", "perturbed")
_DEFAULT_LEVELS = "8,16,32,64"
_ENV_THREADS = "HMFEM_THREADS"


def _fmt(x: float) -> str:
    mant, exp = f"{x:.4e}".split("e")
    return f"{mant}e{int(exp):+d}"


def _fmt_order(o) -> str:
    return "--" if o is None else f"{o:.2f}"


def emit_report(records, fmt: str = "table") -> str:
    """Render convergence records as an aligned table or CSV."""
    if not records:
        raise ValueError("no records to report")
    if fmt == "csv":
        lines = ["inv_h,e0,ord0,e1,ord1,e2,ord2,e3,ord3"]
        for r in records:
            cells = [str(r.inv_h)]
            for e, o in zip(r.errors, r.orders):
                cells.append(_fmt(e))
                cells.append("" if o is None else f"{o:.2f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    header = (f"{'1/h':>5} | {'L2 error':>10} {'order':>6} | "
              f"{'H1 error':>10} {'order':>6} | {'H2 error':>10} {'order':>6} | "
              f"{'H3 error':>10} {'order':>6}")
    lines = [header, "-" * len(header)]
    for r in records:
        cells = [f"{r.inv_h:>5}"]
        for e, o in zip(r.errors, r.orders):
            cells.append(f"{_fmt(e):>10} {_fmt_order(o):>6}")
        lines.append(" | ".join(cells))
    return "\n".join(lines) + "\n"


def _parse_levels(text: str) -> list[int]:
    try:
        levels = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}")
    if not levels or any(v < 1 for v in levels):
        raise argparse.ArgumentTypeError("levels must be positive integers")
    return levels


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmfem",
        description="Nonconforming-element convergence and unisolvency lab")
    sub = parser.add_subparsers(dest="command", required=True)

    uni = sub.add_parser("unisolvency", help="DOF-matrix invertibility report")
    uni.add_argument("--n", type=int, choices=(1, 2, 3), default=None,
                     help="simplex dimension (default: all)")
    uni.add_argument("--element", choices=("wuxu", "robust"), default=None,
                     help="element family (default: every valid one)")
    uni.add_argument("--trials", type=int, default=100)
    uni.add_argument("--seed", type=int, default=20240301)
    uni.add_argument("--format", choices=("table", "csv"), default="table")
    uni.add_argument("--output", default=None)

    conv = sub.add_parser("converge", help="convergence study over levels")
    conv.add_argument("--problem", choices=_PROBLEMS, required=True)
    conv.add_argument("--element", choices=("wuxu", "robust"), default=None)
    conv.add_argument("--levels", type=_parse_levels, default=None)
    conv.add_argument("--convention", choices=("multiindex", "frobenius"),
                      default=None, help="broken-form convention "
                      "(tri-harmonic problems only; default multiindex)")
    conv.add_argument("--quad-degree", type=int, default=None)
    conv.add_argument("--threads", type=int, default=None)
    conv.add_argument("--b0", type=float, default=1.0,
                      help="zeroth-order coefficient of the robust problem")
    conv.add_argument("--epsilon", type=float, default=1e-2,
                      help="epsilon of the perturbed problem")
    conv.add_argument("--format", choices=("table", "csv"), default="table")
    conv.add_argument("--output", default=None,
                      help="write CSV to this path instead of stdout")

    sw = sub.add_parser("sweep", help="perturbed benchmark over epsilons")
    sw.add_argument("--epsilons", type=_parse_floats, default=[1.0, 1e-2, 1e-4])
    sw.add_argument("--level", type=int, default=8)
    sw.add_argument("--threads", type=int, default=None)
    sw.add_argument("--output", default=None)
    return parser


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get(_ENV_THREADS)
    return max(1, int(env)) if env else 1


def _write(text: str, path: str | None, out):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def _build_case(args) -> problems.ProblemCase:
    problem = args.problem
    if problem in ("robust", "perturbed"):
        if args.element == "wuxu":
            raise SystemExit(f"problem {problem!r} requires the robust element")
        if args.convention == "multiindex":
            raise SystemExit(
                f"problem {problem!r} defines its load for the tensor "
                "(frobenius) convention; --convention multiindex is invalid")
        if problem == "robust":
            return problems.robust_case(b0=args.b0)
        return problems.perturbed_sweep_case(args.epsilon)
    if args.element == "robust":
        raise SystemExit(f"problem {problem!r} is set up for the wuxu element")
    convention = args.convention or "multiindex"
    if problem == "triharmonic-square":
        return problems.example1(convention)
    return problems.example2(convention)


def _default_levels(problem: str) -> list[int]:
    if problem == "triharmonic-lshape":
        return [4, 8, 16, 32, 64]
    if problem in ("robust", "perturbed"):
        return [4, 8, 16, 32]
    return [8, 16, 32, 64]


def cmd_unisolvency(args, out) -> int:
    ns = [args.n] if args.n else [1, 2, 3]
    variants = [args.element] if args.element else ["wuxu", "robust"]
    reports = []
    for variant in variants:
        for n in ns:
            if variant == "robust" and n != 2:
                continue
            reports.append(element.check_unisolvency(
                n, variant, trials=args.trials, seed=args.seed))
    if not reports:
        raise SystemExit("no valid (n, element) pair selected")
    if args.format == "csv":
        lines = ["n,variant,trial,cond,pass"]
        for rep in reports:
            lines.extend(rep.csv_rows())
        text = "\n".join(lines) + "\n"
    else:
        text = "\n".join(rep.to_text() for rep in reports) + "\n"
    _write(text, args.output, out)
    return 0 if all(rep.all_passed for rep in reports) else 1


def cmd_converge(args, out) -> int:
    case = _build_case(args)
    levels = args.levels or _default_levels(args.problem)
    records = problems.run_convergence_study(
        case, levels, threads=_threads(args), quad_degree=args.quad_degree)
    fmt = "csv" if (args.output or args.format == "csv") else "table"
    _write(emit_report(records, fmt), args.output, out)
    return 0


def cmd_sweep(args, out) -> int:
    rows = []
    for eps in args.epsilons:
        case = problems.perturbed_sweep_case(eps)
        dofmap, x, _ = problems.solve_case(case, args.level,
                                           threads=_threads(args))
        err = problems.energy_error(dofmap, x, case.exact, case.form)
        rows.append((eps, err))
    lines = [f"{'epsilon':>10}  {'energy error':>14}"]
    for eps, err in rows:
        lines.append(f"{eps:>10.1e}  {_fmt(err):>14}")
    errs = [e for _, e in rows]
    bounded = max(errs) <= 10.0 * min(errs)
    lines.append(f"bounded within 10x: {'yes' if bounded else 'NO'}")
    _write("\n".join(lines) + "\n", args.output, out)
    return 0 if bounded else 1


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command == "unisolvency":
        return cmd_unisolvency(args, out)
    if args.command == "converge":
        return cmd_converge(args, out)
    return cmd_sweep(args, out)


def entry():  # console-script hook
    sys.exit(main())

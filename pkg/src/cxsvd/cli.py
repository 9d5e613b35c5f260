"""``cxsvd`` command line: gradcheck, selfcheck, optimize.

Exit codes: 0 success, 1 check failures, 2 configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, CxsvdError, DivergenceDetected, ShapeMismatch
from .fd_oracle import DEFAULT_H, LOSS_NAMES
from .harness import FORMULA_MODES, RunConfig, parse_size, run_gradcheck, run_optimize, run_selfcheck
from .matrix_core import load_matrix


def _size(text):
    try:
        return parse_size(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _loss(text):
    if text != "all" and text not in LOSS_NAMES:
        raise argparse.ArgumentTypeError(f"unknown loss {text!r}; choose from {', '.join(LOSS_NAMES)} or all")
    return text


def build_parser():
    p = argparse.ArgumentParser(prog="cxsvd", description="Complex SVD gradient checks.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gradcheck", help="compare backward formulas against finite differences")
    g.add_argument("--size", action="append", type=_size, help='"N" or "RxC"; repeatable')
    g.add_argument("--seed", action="append", type=int, help="repeatable")
    g.add_argument("--loss", action="append", type=_loss, help='catalogue name or "all"; repeatable')
    g.add_argument("--h", type=float, default=DEFAULT_H)
    g.add_argument("--tol", type=float, default=1e-6)
    g.add_argument("--formula", choices=FORMULA_MODES, default="full")
    g.add_argument("--broadening", type=float, default=0.0)
    g.add_argument("--degeneracy-tol", type=float, default=1e-10)
    g.add_argument("--matrix", help="JSON matrix file to use instead of seeded matrices")
    g.add_argument("--report", help="write the JSON report here")

    s = sub.add_parser("selfcheck", help="run the invariant suites")
    s.add_argument("--filter", help="only run suites whose name contains this text")
    s.add_argument("--mutate", action="store_true",
                   help="flip the diagonal-term sign; the suite is expected to fail")

    o = sub.add_parser("optimize", help="gradient descent through the tape")
    o.add_argument("--loss", type=_loss, default="frob")
    o.add_argument("--eta", type=float, default=0.1)
    o.add_argument("--steps", type=int, default=20)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--size", type=_size, default=(3, 3))
    o.add_argument("--matrix", help="JSON matrix file for the starting point")
    o.add_argument("--report", help="write the trajectory JSON here")
    return p


def _write(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _gradcheck(args, out):
    losses = args.loss or ["all"]
    if "all" in losses:
        losses = "all"
    matrix = load_matrix(args.matrix) if args.matrix else None
    cfg = RunConfig(
        sizes=args.size or [(3, 3)], seeds=args.seed or [0], losses=losses, h=args.h, tol=args.tol,
        formula_mode=args.formula, broadening=args.broadening, degeneracy_tol=args.degeneracy_tol,
        matrix=matrix,
    )
    report = run_gradcheck(cfg)
    for t in report["trials"]:
        err = "   n/a  " if t["rel_error"] is None else f"{t['rel_error']:.2e}"
        status = "PASS" if t["passed"] else "FAIL"
        line = f"{status}  {t['loss_name']:<14} {t['rows']}x{t['cols']} seed={t['seed']} rel_error={err}"
        if t["reason"]:
            line += f"  ({t['reason']})"
        print(line, file=out)
    s = report["summary"]
    print(f"{s['trials']} trials, {s['failures']} failures, max rel error {s['max_rel_error']}", file=out)
    if args.report:
        _write(args.report, report)
    return 0 if s["failures"] == 0 else 1


def _selfcheck(args, out):
    rows = run_selfcheck(args.filter, mutate=args.mutate)
    if not rows:
        print(f"no suite matches {args.filter!r}", file=out)
        return 2
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}", file=out)
    return 0 if all(ok for _, ok, _ in rows) else 1


def _optimize(args, out):
    A0 = load_matrix(args.matrix) if args.matrix else None
    try:
        traj = run_optimize(args.loss, args.eta, args.steps, A0, seed=args.seed, size=args.size)
    except DivergenceDetected as exc:
        print(f"diverged: {exc}", file=out)
        return 1
    for i, v in enumerate(traj["losses"]):
        print(f"step {i:4d}  loss {v:.12g}", file=out)
    print(f"monotone: {traj['monotone']}", file=out)
    if args.report:
        _write(args.report, traj)
    return 0


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    handlers = {"gradcheck": _gradcheck, "selfcheck": _selfcheck, "optimize": _optimize}
    try:
        return handlers[args.command](args, out)
    except (ConfigError, ShapeMismatch, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CxsvdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

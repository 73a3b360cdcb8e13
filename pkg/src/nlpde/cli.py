"""Command line entry point: ``nlpde solve | slice | reference``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .deep_splitting import solve as ds_solve
from .deep_splitting import write_loss_csv
from .mlp_picard import mlp_reference
from .problems import PROBLEM_NAMES, get_problem
from .stochastic import RngStream


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--T", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=tuple(harness.PRESETS), default="desk")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlpde", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="repeated solves and a statistics table")
    _common(s)
    s.add_argument("--method", choices=("mlp", "deep-splitting"), default="deep-splitting")
    s.add_argument("--N", type=int, help="time steps (deep splitting) or levels n (MLP)")
    s.add_argument("--M", type=int, help="gradient steps per level (deep splitting) or base M (MLP)")
    s.add_argument("--K", type=int, help="non-local samples")
    s.add_argument("--batch", type=int, help="batch size J")
    s.add_argument("--lr", type=float, help="learning rate")
    s.add_argument("--runs", type=int, default=5)
    s.add_argument("--reference", type=float, help="user reference value")
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    sl = sub.add_parser("slice", help="x -> V_n((x, 0, ..., 0)) along the first axis")
    _common(sl)
    sl.add_argument("--source", choices=("deep-splitting", "analytic"), default="deep-splitting")
    sl.add_argument("--levels", default="0,5,10", help="comma-separated levels n")
    sl.add_argument("--lo", type=float, default=-0.5)
    sl.add_argument("--hi", type=float, default=0.5)
    sl.add_argument("--samples", type=int, default=101)
    sl.add_argument("--N", type=int, default=10)
    sl.add_argument("--M", type=int)
    sl.add_argument("--batch", type=int)
    sl.add_argument("--losses", help="also write the loss traces as CSV here")

    r = sub.add_parser("reference", help="print an MLP reference value at (T, 0)")
    _common(r)
    r.add_argument("--n", type=int, help="levels n (default: preset)")
    r.add_argument("--M", type=int, help="base M (default: n)")
    r.add_argument("--K", type=int)
    r.add_argument("--runs", type=int, default=5)
    return ap


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _cmd_solve(args) -> None:
    problem = get_problem(args.problem, args.d, args.T)
    if args.method == "mlp":
        cfg = harness.mlp_config(args.problem, args.preset, levels=args.N, base=args.M, nonlocal_samples=args.K)
    else:
        cfg = harness.deep_splitting_config(
            args.problem, args.preset, time_steps=args.N, grad_steps=args.M,
            nonlocal_samples=args.K, batch_size=args.batch, learning_rate=args.lr,
        )
    report = harness.run_experiment(problem, args.method, cfg, args.runs, args.seed, reference=args.reference)
    _emit(harness.emit_table([report], fmt=args.format), args.out)


def _cmd_slice(args) -> None:
    problem = get_problem(args.problem, args.d, args.T)
    levels = [int(k) for k in args.levels.split(",") if k.strip()]
    if args.source == "analytic":
        if problem.analytic is None:
            raise ValueError(f"{args.problem} has no closed-form solution")
        times = [n * args.T / args.N for n in levels]
        text = harness.emit_slice(problem.analytic, args.lo, args.hi, args.samples, d=args.d, times=times)
    else:
        cfg = harness.deep_splitting_config(
            args.problem, args.preset, time_steps=args.N, grad_steps=args.M, batch_size=args.batch
        )
        sol = ds_solve(problem, cfg, RngStream(args.seed))
        if args.losses:
            write_loss_csv(sol, args.losses)
        text = harness.emit_slice(sol, args.lo, args.hi, args.samples, levels=levels)
    _emit(text, args.out)


def _cmd_reference(args) -> None:
    problem = get_problem(args.problem, args.d, args.T)
    base = args.M if args.M is not None else args.n
    cfg = harness.mlp_config(args.problem, args.preset, levels=args.n, base=base, nonlocal_samples=args.K)
    mean, std = mlp_reference(problem, cfg, args.runs, 0.0, np.zeros(args.d), args.seed)
    out = {"problem": args.problem, "d": args.d, "T": args.T, "n": cfg.levels, "M": cfg.base,
           "runs": args.runs, "mean": mean, "std": std}
    _emit(json.dumps(out) + "\n", args.out)


COMMANDS = {"solve": _cmd_solve, "slice": _cmd_slice, "reference": _cmd_reference}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        run_index = getattr(exc, "run_index", None)
        if run_index is not None:
            err["run"] = run_index
        sys.stderr.write(json.dumps(err) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

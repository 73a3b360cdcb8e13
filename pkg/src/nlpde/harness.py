"""Experiment runner: repeated solves, relative-error statistics and table output."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .deep_splitting import DeepSplittingConfig, SplittingSolution, solve
from .mlp_picard import MlpConfig, mlp_estimate, mlp_reference
from .neural import Activation
from .stochastic import RngStream

__all__ = [
    "PRESETS",
    "PROBLEM_SETTINGS",
    "RunFailedError",
    "RunReport",
    "deep_splitting_config",
    "emit_slice",
    "emit_table",
    "mlp_config",
    "resolve_reference",
    "run_experiment",
    "summarize",
    "worker_threads",
]

TABLE_HEADER = ["d", "T", "N", "mean", "std", "reference", "rel_l1_error", "err_std", "runtime_s"]
REFERENCE_RUNS = 5
REFERENCE_STREAM = -1


@dataclass(frozen=True)
class ProblemSettings:
    """Per-problem training and reference settings at full scale."""

    ds_samples: int
    grad_steps: int
    learning_rate: float
    start: str
    hidden: Activation
    output: Activation
    mlp_samples: int


PROBLEM_SETTINGS = {
    "fisher-kpp": ProblemSettings(1, 500, 1e-2, "zero", Activation.TANH, Activation.SQUARE, 1),
    "competition": ProblemSettings(5, 500, 1e-2, "zero", Activation.TANH, Activation.SQUARE, 10),
    "sine-gordon": ProblemSettings(5, 500, 1e-3, "zero", Activation.TANH, Activation.IDENTITY, 10),
    "rep-mut": ProblemSettings(5, 1000, 1e-2, "zero", Activation.TANH, Activation.SQUARE, 10),
    "rep-mut-box": ProblemSettings(5, 2000, 1.0 / 200.0, "uniform", Activation.TANH, Activation.SQUARE, 10),
    "allen-cahn": ProblemSettings(5, 500, 1e-2, "uniform", Activation.RELU, Activation.IDENTITY, 10),
}

# desk caps the gradient steps at 300; paper keeps the per-problem count
PRESETS = {
    "desk": {"batch": 2000, "grad_cap": 300, "mlp_levels": 4},
    "paper": {"batch": 8000, "grad_cap": None, "mlp_levels": 5},
}


def _settings(name: str) -> ProblemSettings:
    try:
        return PROBLEM_SETTINGS[name]
    except KeyError:
        raise ValueError(f"no settings for problem {name!r}") from None


def _preset(preset: str) -> dict:
    try:
        return PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}") from None


def deep_splitting_config(name: str, preset: str = "desk", **overrides) -> DeepSplittingConfig:
    s, p = _settings(name), _preset(preset)
    steps = s.grad_steps if p["grad_cap"] is None else min(s.grad_steps, p["grad_cap"])
    cfg = DeepSplittingConfig(
        time_steps=10, grad_steps=steps, nonlocal_samples=s.ds_samples, batch_size=p["batch"],
        learning_rate=s.learning_rate, hidden=s.hidden, output=s.output, start=s.start,
    )
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def mlp_config(name: str, preset: str = "paper", **overrides) -> MlpConfig:
    s, p = _settings(name), _preset(preset)
    cfg = MlpConfig(levels=p["mlp_levels"], base=p["mlp_levels"], nonlocal_samples=s.mlp_samples)
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def worker_threads(default: int = 1) -> int:
    raw = os.environ.get("PDE_THREADS")
    if raw is None or raw == "":
        return default
    n = int(raw)
    if n < 1:
        raise ValueError("PDE_THREADS must be a positive integer")
    return n


class RunFailedError(RuntimeError):
    def __init__(self, run_index: int, cause: BaseException):
        super().__init__(f"run {run_index} failed: {type(cause).__name__}: {cause}")
        self.run_index = run_index
        self.cause = cause


@dataclass(frozen=True)
class RunReport:
    problem: str
    method: str
    d: int
    T: float
    N: int
    run_values: tuple[float, ...]
    reference: float
    provenance: str
    mean: float
    std: float
    rel_l1_error: float
    error_std: float
    rel_err_of_mean: float
    runtime_seconds: float = field(default=0.0, compare=False)

    def row(self) -> list:
        return [self.d, self.T, self.N, self.mean, self.std, self.reference,
                self.rel_l1_error, self.error_std, self.runtime_seconds]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["run_values"] = list(self.run_values)
        return out


def summarize(values, reference: float) -> dict:
    """Mean, population std, mean relative error and its population std."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("need at least one run value")
    if reference == 0:
        raise ValueError("relative errors need a nonzero reference")
    rel = np.abs(v - reference) / abs(reference)
    mean = float(v.mean())
    return {
        "mean": mean,
        "std": float(v.std()),
        "rel_l1_error": float(rel.mean()),
        "error_std": float(rel.std()),
        "rel_err_of_mean": abs(mean - reference) / abs(reference),
    }


def resolve_reference(problem, reference=None, reference_cfg: MlpConfig | None = None, seed: int = 0):
    """``(value, provenance)``: user value, else analytic, else an MLP reference."""
    if reference is not None:
        return float(reference), "user"
    origin = np.zeros(problem.d)
    if problem.analytic is not None:
        return float(problem.analytic(problem.T, origin)), "analytic"
    cfg = reference_cfg if reference_cfg is not None else mlp_config(problem.name, "paper")
    mean, _ = mlp_reference(problem, cfg, REFERENCE_RUNS, 0.0, origin, RngStream(seed, (REFERENCE_STREAM,)))
    return mean, "mlp"


def _single_run(problem, method: str, config, stream: RngStream) -> float:
    origin = np.zeros(problem.d)
    if method == "mlp":
        return mlp_estimate(problem, config, 0.0, origin, stream).value
    if method == "deep-splitting":
        return solve(problem, config, stream).value(origin)
    raise ValueError(f"unknown method {method!r}")


def run_experiment(problem, method: str, config, runs: int = 5, seed: int = 0, reference=None,
                   reference_cfg: MlpConfig | None = None, threads: int | None = None) -> RunReport:
    """``runs`` independent solves evaluated at ``(T, 0)`` and their statistics.

    Run ``r`` draws from stream ``(seed, (r,))``; an MLP reference uses
    ``(seed, (-1,))``, so it never shares randomness with a run.  Runtime is
    the mean wall time of the solve calls only.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if method not in ("mlp", "deep-splitting"):
        raise ValueError(f"unknown method {method!r}")
    base = RngStream(seed)

    def task(r):
        t0 = time.perf_counter()
        try:
            value = _single_run(problem, method, config, base.child(r))
        except Exception as exc:
            raise RunFailedError(r, exc) from exc
        return value, time.perf_counter() - t0

    threads = worker_threads() if threads is None else threads
    if threads <= 1:
        results = [task(r) for r in range(runs)]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, runs)) as pool:
            results = list(pool.map(task, range(runs)))
    values = tuple(float(v) for v, _ in results)
    ref, provenance = resolve_reference(problem, reference, reference_cfg, seed)
    N = config.levels if method == "mlp" else config.time_steps
    return RunReport(
        problem=problem.name, method=method, d=problem.d, T=problem.T, N=N,
        run_values=values, reference=ref, provenance=provenance,
        runtime_seconds=float(np.mean([dt for _, dt in results])),
        **summarize(values, ref),
    )


def emit_table(reports, path=None, fmt: str = "csv") -> str:
    """Write reports as CSV (fixed 9-column header) or JSON; returns the text."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for rep in reports:
            w.writerow([repr(v) if isinstance(v, float) else v for v in rep.row()])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([rep.to_dict() for rep in reports], indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None and path != "-":
        Path(path).write_text(text)
    return text


def emit_slice(source, lo: float, hi: float, samples: int, d: int | None = None, fixed_coords=None,
               levels=None, times=None, path=None) -> str:
    """TSV of ``x -> value`` along the first coordinate.

    ``source`` is a :class:`SplittingSolution` (one column per level in
    ``levels``) or an analytic callable ``(t, points) -> values`` (one column
    per time in ``times``).  The other coordinates are ``fixed_coords``
    (default 0).
    """
    if samples < 2:
        raise ValueError("a slice needs at least two samples")
    if isinstance(source, SplittingSolution):
        d = source.networks[0].input_dim
        N = len(source.networks) - 1
        levels = list(range(N + 1)) if levels is None else list(levels)
        for n in levels:
            if not 0 <= n <= N:
                raise IndexError(f"level {n} outside 0..{N}")
        names = [f"value_n{n}" for n in levels]
        evals = [source.networks[n].forward_batch for n in levels]
    else:
        if d is None or times is None:
            raise ValueError("an analytic slice needs d and times")
        names = [f"value_t{t:g}" for t in times]
        evals = [lambda pts, t=t: source(t, pts) for t in times]
    xs = np.linspace(lo, hi, samples)
    pts = np.zeros((samples, d)) if fixed_coords is None else np.tile(np.asarray(fixed_coords, dtype=np.float64), (samples, 1))
    if pts.shape != (samples, d):
        raise ValueError(f"fixed_coords must have length {d}")
    pts[:, 0] = xs
    cols = [np.asarray(ev(pts), dtype=np.float64) for ev in evals]
    lines = ["\t".join(["x"] + names)]
    for i, x in enumerate(xs):
        lines.append("\t".join(repr(float(v)) for v in [x] + [c[i] for c in cols]))
    text = "\n".join(lines) + "\n"
    if path is not None and path != "-":
        Path(path).write_text(text)
    return text

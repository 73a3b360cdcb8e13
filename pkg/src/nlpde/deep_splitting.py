"""Deep splitting: one network per time step, trained level by level.

Level ``n`` regresses ``V_n(Y_{N-n})`` onto the one-step target

    V_{n-1}(Y_{N-n+1}) + dt / K * sum_k f(t_{n-1}, Y_{N-n+1}, Z_k, V_{n-1}(Y_{N-n+1}), V_{n-1}(Z_k))

where ``Y`` is a stepped path on the reversed grid started at a sample of
the start-point law and ``Z_k`` are draws of the non-local measure at
``Y_{N-n+1}``.  ``V_0`` is ``g`` itself.  ``V_{n-1}`` is frozen while
level ``n`` trains.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .neural import Activation, NeuralNet, default_dims, init_xavier
from .optim import make_optimizer
from .stochastic import RngStream, TimeGrid, simulate_path

__all__ = [
    "DeepSplittingConfig",
    "GClosure",
    "NonFiniteLossError",
    "SplittingSolution",
    "level_indices",
    "solve",
    "splitting_loss",
    "train_level",
    "write_loss_csv",
]


class NonFiniteLossError(FloatingPointError):
    """Training produced a non-finite loss; carries the state at that point."""

    def __init__(self, message, level, step, loss, params):
        super().__init__(message)
        self.level = level
        self.step = step
        self.loss = loss
        self.params = params


class GClosure:
    """The parameter-free level-0 approximator ``V_0 = g``."""

    def __init__(self, g: Callable, d: int):
        self.g = g
        self.input_dim = d

    def forward_batch(self, xs) -> np.ndarray:
        return np.asarray(self.g(np.asarray(xs, dtype=np.float64)), dtype=np.float64)

    def forward(self, x) -> float:
        return float(self.forward_batch(np.asarray(x, dtype=np.float64)[None])[0])

    def __call__(self, xs):
        return self.forward_batch(xs)


def _per_index(value, name: str) -> Callable[[int], int]:
    if callable(value):
        return value
    if int(value) != value or value < 0:
        raise ValueError(f"{name} must be a nonnegative integer, got {value}")
    return lambda k: int(value)


def _zero_start(rng: RngStream, J: int, problem) -> np.ndarray:
    return np.zeros((J, problem.d))


def _uniform_start(rng: RngStream, J: int, problem) -> np.ndarray:
    """Uniform on the problem's hypercube, or on ``[-1/2, 1/2]^d`` in free space."""
    dom = problem.domain
    lo = dom.lower if dom.is_hypercube else np.full(problem.d, -0.5)
    hi = dom.upper if dom.is_hypercube else np.full(problem.d, 0.5)
    return lo + (hi - lo) * rng.uniform((J, problem.d))


START_SAMPLERS = {"zero": _zero_start, "uniform": _uniform_start}


@dataclass(frozen=True)
class DeepSplittingConfig:
    """Training settings; schedule fields take a constant or a function of the index."""

    time_steps: int = 10
    grad_steps: int | Callable[[int], int] = 500
    nonlocal_samples: int | Callable[[int], int] = 1
    batch_size: int | Callable[[int], int] = 8000
    learning_rate: float | Callable[[int], float] = 1e-2
    optimizer: str = "adam"
    hidden: Activation = Activation.TANH
    output: Activation = Activation.IDENTITY
    width_offset: int = 50
    start: str | Callable = "zero"
    warm_start: bool = False
    bias_init: str = "xavier"
    dtype: type = np.float64

    def __post_init__(self):
        if self.time_steps < 1:
            raise ValueError("need at least one time step")
        if not callable(self.start) and self.start not in START_SAMPLERS:
            raise ValueError(f"unknown start sampler {self.start!r}")
        for name in ("nonlocal_samples", "batch_size"):
            value = getattr(self, name)
            if not callable(value) and value < 1:
                raise ValueError(f"{name} must be at least 1")
        _per_index(self.grad_steps, "grad_steps")

    def steps_at(self, n: int) -> int:
        return _per_index(self.grad_steps, "grad_steps")(n)

    def samples_at(self, n: int) -> int:
        k = _per_index(self.nonlocal_samples, "nonlocal_samples")(n)
        if k < 1:
            raise ValueError(f"K_{n} = {k} < 1")
        return k

    def batch_at(self, m: int) -> int:
        j = _per_index(self.batch_size, "batch_size")(m)
        if j < 1:
            raise ValueError(f"J_{m} = {j} < 1")
        return j

    def sample_start(self, rng: RngStream, J: int, problem) -> np.ndarray:
        sampler = self.start if callable(self.start) else START_SAMPLERS[self.start]
        return sampler(rng, J, problem)


@dataclass
class SplittingSolution:
    networks: list
    loss_traces: list[np.ndarray]
    grid: TimeGrid
    runtime_seconds: float = field(default=0.0, compare=False)

    def value(self, x, level: int | None = None) -> float:
        """``V_n(x)``, approximating the initial-value solution at ``t_n``; default ``n = N``."""
        n = len(self.networks) - 1 if level is None else level
        return self.networks[n].forward(x)


def level_indices(N: int, n: int) -> tuple[int, int]:
    """Reversed-grid path indices ``(N - n, N - n + 1)`` read by level ``n``."""
    if not 1 <= n <= N:
        raise IndexError(f"level {n} outside 1..{N}")
    return N - n, N - n + 1


def splitting_loss(problem, grid: TimeGrid, n: int, prev_net, cur_net, paths, z, cache=False):
    """Mean squared splitting residual of level ``n``.

    ``paths`` holds reversed-grid states of shape ``(k, J, d)`` with
    ``k >= N - n + 2``; ``z`` holds the non-local draws ``(J, K, d)`` anchored
    at ``Y_{N-n+1}`` (``None`` for a Dirac measure).  Returns
    ``(loss, residuals)``, plus the forward cache of ``cur_net`` if asked.
    """
    N = grid.steps
    i_cur, i_prev = level_indices(N, n)
    if len(paths) <= i_prev:
        raise IndexError(f"level {n} needs path index {i_prev}, only {len(paths)} states given")
    y_cur = paths[i_cur]
    y_prev = paths[i_prev]
    J = y_prev.shape[0]
    t_prev = grid.forward_times[n - 1]
    dt = grid.forward_times[n] - t_prev
    v_prev = prev_net.forward_batch(y_prev)
    if z is None:
        incr = np.broadcast_to(problem.f(t_prev, y_prev, y_prev, v_prev, v_prev), (J,))
    else:
        K = z.shape[1]
        v_z = prev_net.forward_batch(z.reshape(J * K, -1)).reshape(J, K)
        vals = problem.f(t_prev, y_prev[:, None, :], z, v_prev[:, None], v_z)
        incr = np.broadcast_to(vals, (J, K)).sum(axis=1) / K
    target = v_prev + dt * incr
    if cache:
        out, fwd = cur_net.forward_cached(y_cur)
    else:
        out, fwd = cur_net.forward_batch(y_cur), None
    residuals = out - target
    loss = float(np.mean(residuals * residuals))
    return (loss, residuals, fwd) if cache else (loss, residuals)


def _draw_batch(problem, cfg: DeepSplittingConfig, grid: TimeGrid, n: int, rng: RngStream, J: int):
    x0 = cfg.sample_start(rng.child(0), J, problem)
    paths = simulate_path(problem, grid, x0, rng.child(1), n_steps=grid.steps - n + 1)
    measure = problem.nonlocal_measure
    if measure.is_dirac:
        return paths, None
    y = paths[grid.steps - n + 1]
    noise = measure.draw_noise(rng.child(2), (J, cfg.samples_at(n), problem.d))
    return paths, measure.apply(y[:, None, :], noise)


def _fresh_net(problem, cfg: DeepSplittingConfig, rng: RngStream) -> NeuralNet:
    return init_xavier(default_dims(problem.d, cfg.width_offset), cfg.hidden, cfg.output, rng, cfg.dtype, cfg.bias_init)


def train_level(problem, cfg: DeepSplittingConfig, n: int, prev_net, rng: RngStream, init_net=None):
    """Train ``V_n`` for ``M_n`` steps against the frozen ``prev_net``.

    Stream layout: ``rng.child(n, 0)`` initialises the net, ``rng.child(n, m)``
    feeds step ``m`` (start points, path increments, non-local draws).
    """
    grid = TimeGrid(problem.T, cfg.time_steps)
    level_indices(grid.steps, n)
    net = init_net.copy() if init_net is not None else _fresh_net(problem, cfg, rng.child(n, 0))
    steps = cfg.steps_at(n)
    opt = make_optimizer(cfg.optimizer, net.params.size, cfg.learning_rate, cfg.dtype)
    trace = np.empty(steps)
    for m in range(1, steps + 1):
        J = cfg.batch_at(m)
        paths, z = _draw_batch(problem, cfg, grid, n, rng.child(n, m), J)
        loss, residuals, fwd = splitting_loss(problem, grid, n, prev_net, net, paths, z, cache=True)
        if not math.isfinite(loss):
            raise NonFiniteLossError(
                f"level {n}, step {m}: loss {loss}; parameter norm {np.linalg.norm(net.params):.3e}",
                level=n, step=m, loss=loss, params=net.params.copy(),
            )
        trace[m - 1] = loss
        grad = net.backward_cached(fwd, (2.0 / J) * residuals)
        net.params -= opt.delta(grad).astype(net.dtype, copy=False)
    return net, trace


def solve(problem, cfg: DeepSplittingConfig, rng: RngStream) -> SplittingSolution:
    grid = TimeGrid(problem.T, cfg.time_steps)
    networks = [GClosure(problem.g, problem.d)]
    traces = []
    for n in range(1, grid.steps + 1):
        init = networks[-1] if cfg.warm_start and n > 1 else None
        net, trace = train_level(problem, cfg, n, networks[-1], rng, init_net=init)
        networks.append(net)
        traces.append(trace)
    return SplittingSolution(networks, traces, grid)


def write_loss_csv(solution: SplittingSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "step", "loss"])
        for n, trace in enumerate(solution.loss_traces, start=1):
            for m, loss in enumerate(trace, start=1):
                w.writerow([n, m, repr(float(loss))])

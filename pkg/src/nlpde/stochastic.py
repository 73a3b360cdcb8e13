"""Random streams, Brownian increments, stepped paths and non-local samplers.

Streams are addressed by ``(seed, path)`` where ``path`` is a tuple of
integers.  Extending the path gives a child stream that is statistically
independent of its parent and of all siblings, so multi-indexed families
of random variables map onto stream paths without storing any draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Domain, reflect_batch, reflect_segment

__all__ = [
    "NonlocalMeasure",
    "PathGrid",
    "RngStream",
    "TimeGrid",
    "gaussian_increment",
    "sample_nonlocal",
    "simulate_path",
    "step",
]


def _zigzag(k: int) -> int:
    return 2 * k if k >= 0 else -2 * k - 1


class RngStream:
    """Counter-based (Philox) random stream at a hierarchical address.

    The generator is created lazily and then advances with every draw, so a
    single stream yields one sequence; re-creating ``RngStream(seed, path)``
    replays it bit for bit.  Not safe for concurrent use; children are.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(k) for k in path)
        self._gen = None

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.path + keys)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = (len(self.path),) + tuple(_zigzag(k) for k in self.path)
            seq = np.random.SeedSequence(self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
            self._gen = np.random.Generator(np.random.Philox(seq))
        return self._gen

    def normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self.generator.random(size)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i T / N`` and its reversal ``tau_n = T - t_{N-n}``."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.steps < 1:
            raise ValueError("need at least one time step")

    @property
    def forward_times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * (self.horizon / self.steps)

    @property
    def reversed_times(self) -> np.ndarray:
        t = self.forward_times
        return self.horizon - t[::-1]


@dataclass(frozen=True)
class PathGrid:
    """States ``Y_0 .. Y_k`` with shape ``(k + 1, d)`` or ``(k + 1, J, d)``."""

    states: np.ndarray

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k):
        return self.states[k]


@dataclass(frozen=True)
class NonlocalMeasure:
    """Law of the non-local integration variable given the base point ``x``.

    ``kind`` is one of ``dirac`` (the point itself), ``gaussian`` (density
    proportional to ``exp(-|x - z|^2 / scale^2)``), ``uniform`` (uniform on
    ``[lower, upper]``, independent of ``x``) or ``weighted_gaussian``
    (``N(0, scale^2 I)`` with its density returned as the weight).
    """

    kind: str
    scale: float = 0.0
    lower: np.ndarray | None = field(default=None, compare=False)
    upper: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def dirac(cls):
        return cls("dirac")

    @classmethod
    def gaussian_around_x(cls, scale: float):
        return cls("gaussian", float(scale))

    @classmethod
    def uniform_hypercube(cls, dim: int, lower=-0.5, upper=0.5):
        lo = np.broadcast_to(np.asarray(lower, dtype=np.float64), (dim,)).copy()
        hi = np.broadcast_to(np.asarray(upper, dtype=np.float64), (dim,)).copy()
        return cls("uniform", 0.0, lo, hi)

    @classmethod
    def weighted_gaussian(cls, scale: float):
        return cls("weighted_gaussian", float(scale))

    @property
    def is_dirac(self) -> bool:
        return self.kind == "dirac"

    def draw_noise(self, rng: RngStream, shape) -> np.ndarray:
        """Base randomness of shape ``(..., d)``; :meth:`apply` maps it to points."""
        if self.kind == "uniform":
            return rng.uniform(shape)
        if self.kind == "dirac":
            return np.zeros(shape)
        return rng.normal(shape)

    def apply(self, x, noise) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "dirac":
            return np.broadcast_to(x, np.broadcast_shapes(x.shape, np.shape(noise))).copy()
        if self.kind == "gaussian":
            # density exp(-|x - z|^2 / s^2) has per-coordinate variance s^2 / 2
            return x + (self.scale / math.sqrt(2.0)) * noise
        if self.kind == "uniform":
            out = self.lower + (self.upper - self.lower) * noise
            return np.broadcast_to(out, np.broadcast_shapes(x.shape, out.shape)).copy()
        if self.kind == "weighted_gaussian":
            out = self.scale * noise
            return np.broadcast_to(out, np.broadcast_shapes(x.shape, out.shape)).copy()
        raise ValueError(f"unknown measure kind {self.kind!r}")

    def density_weight(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if self.kind != "weighted_gaussian":
            return np.ones(z.shape[:-1])
        d = z.shape[-1]
        t = self.scale
        return (2 * np.pi) ** (-d / 2) * t ** (-d) * np.exp(-np.einsum("...i,...i->...", z, z) / (2 * t * t))


def gaussian_increment(rng: RngStream, d: int, dt: float, size=None) -> np.ndarray:
    """Brownian increment over ``dt``: ``N(0, dt I_d)``, optionally batched."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    shape = (d,) if size is None else tuple(np.atleast_1d(size)) + (d,)
    return math.sqrt(dt) * rng.normal(shape)


def step(problem, t_next, t_prev, y, dw) -> np.ndarray:
    """One step ``H(t_next, t_prev, y, dw)`` of the problem's path law.

    Euler step ``y + mu(y) (t_next - t_prev) + sigma(y) dw``, reflected back
    into hypercube domains.  Accepts one point ``(d,)`` or batches ``(..., d)``.
    """
    y = np.asarray(y, dtype=np.float64)
    proposal = y + problem.sigma_action(y, dw)
    if problem.mu is not None:
        proposal = proposal + problem.mu(y) * np.asarray(t_next - t_prev)[..., None]
    domain: Domain = problem.domain
    if not domain.is_hypercube:
        return proposal
    if proposal.ndim == 1:
        return reflect_segment(y, proposal, domain).endpoint
    shape = np.broadcast_shapes(y.shape, proposal.shape)
    a = np.broadcast_to(y, shape).reshape(-1, domain.dim)
    out, _ = reflect_batch(a, proposal.reshape(-1, domain.dim), domain)
    return out.reshape(shape)


def simulate_path(problem, grid: TimeGrid, x0, rng: RngStream, n_steps: int | None = None) -> PathGrid:
    """Stepped path on the reversed grid: ``Y_0 = x0``, ``Y_{k+1} = H(tau_{k+1}, tau_k, Y_k, dW_k)``.

    ``x0`` may be one point or a ``(J, d)`` batch of start points.  With
    ``n_steps`` only the first ``n_steps`` steps are taken.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if not np.all(problem.domain.contains(x0)):
        raise ValueError("start point outside the problem domain")
    k_max = grid.steps if n_steps is None else int(n_steps)
    if not 0 <= k_max <= grid.steps:
        raise ValueError(f"n_steps must lie in [0, {grid.steps}]")
    tau = grid.reversed_times
    states = np.empty((k_max + 1,) + x0.shape)
    states[0] = x0
    for k in range(k_max):
        dt = tau[k + 1] - tau[k]
        dw = math.sqrt(dt) * rng.normal(x0.shape)
        states[k + 1] = step(problem, tau[k + 1], tau[k], states[k], dw)
    return PathGrid(states)


def sample_nonlocal(measure: NonlocalMeasure, x, rng: RngStream, size=None):
    """Draw ``z ~ nu_x`` (optionally ``size`` draws) and its density weight."""
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape if size is None else tuple(np.atleast_1d(size)) + x.shape
    z = measure.apply(x, measure.draw_noise(rng, shape))
    return z, measure.density_weight(z)

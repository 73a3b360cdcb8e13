"""Full-history recursive multilevel Picard estimator for non-local PDEs.

The estimator targets the terminal-value form of a problem: ``u(T, .) = g``
and ``U_{n,M,r}(t, x) ~ u(t, x)``.  Since every shipped problem is
autonomous, ``U(0, x)`` approximates the initial-value solution at time
``T``.

Randomness layout
-----------------
An estimator instance with multi-index ``i`` owns the stream at path ``P``.

* ``P + (l, m, -1)`` holds the own draws (uniform time, Brownian increment,
  ``K`` non-local draws) of sample ``(i, l, m)`` for ``l >= 1``;
* ``P + (l, m)`` and ``P + (l, -m)`` are the streams of the recursive
  estimators ``U^{(i,l,m)}_l`` and ``U^{(i,l,-m)}_{l-1}``;
* ``P + (0, 0)`` holds, row ``m``, the draws of the level-0 samples, which
  need no recursion and are therefore drawn as one block;
* ``P + (-1, 0)`` holds, row ``m``, the terminal increments ``W^{(i,0,-m)}``.

Within one estimator call every evaluation point shares the same random
variables, exactly as ``U^i(t, .)`` is a single random field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .stochastic import RngStream

__all__ = ["MlpConfig", "MlpEstimate", "mlp_cost", "mlp_estimate", "mlp_reference", "truncate"]

OWN = -1


@dataclass(frozen=True)
class MlpConfig:
    """Levels ``n``, base ``M``, non-local sample rule ``K(n, l, m)`` and truncation ``r``."""

    levels: int = 5
    base: int = 5
    nonlocal_samples: int | Callable[[int, int, int], int] = 10
    truncation: float = math.inf

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError("levels must be nonnegative")
        if self.base < 1:
            raise ValueError("base M must be positive")
        if not self.truncation > 0:
            raise ValueError("truncation r must be positive")
        if not callable(self.nonlocal_samples) and self.nonlocal_samples < 1:
            raise ValueError("K must be at least 1")

    def samples(self, n: int, l: int, m: int) -> int:
        k = self.nonlocal_samples(n, l, m) if callable(self.nonlocal_samples) else self.nonlocal_samples
        if k < 1:
            raise ValueError(f"K({n}, {l}, {m}) = {k} < 1")
        return int(k)


@dataclass(frozen=True)
class MlpEstimate:
    value: float
    evaluations: int
    g_evaluations: int


def truncate(y, r: float):
    """``phi_r(y) = min(r, max(-r, y))``; identity for ``r = inf``."""
    if math.isinf(r):
        return y
    return np.clip(y, -r, r)


class _Counter:
    __slots__ = ("f", "g")

    def __init__(self):
        self.f = 0
        self.g = 0


def _f(problem, shape, t, x, z, y, yz):
    return np.broadcast_to(problem.f(t, x, z, y, yz), shape)


def _nonlocal_points(problem, X, noise):
    """Points ``Z_k = Z^{(..., k)}_X`` for shared noise ``(K, d)`` and states ``(..., d)``."""
    return problem.nonlocal_measure.apply(X[..., None, :], noise)


def _estimate(problem, cfg: MlpConfig, n: int, t: float, xs: np.ndarray, stream: RngStream, count: _Counter):
    P, d = xs.shape
    total = np.zeros(P)
    if n == 0:
        return total
    T = problem.T
    span = T - t
    dirac = problem.nonlocal_measure.is_dirac
    measure = problem.nonlocal_measure
    r = cfg.truncation

    # terminal term: mean of g over M^n independent endpoints
    Mn = cfg.base**n
    term = stream.child(-1, 0)
    dw = math.sqrt(span) * term.normal((Mn, 1, d))
    XT = problem.step(T, t, xs[None], dw)
    total += problem.g(XT).mean(axis=0)
    count.g += Mn * P

    for l in range(n):
        Ml = cfg.base ** (n - l)
        if l == 0:
            blk = stream.child(0, 0)
            V = t + span * blk.uniform(Ml)
            dw = np.sqrt(V - t)[:, None, None] * blk.normal((Ml, 1, d))
            X = problem.step(V[:, None], t, xs[None], dw)
            Vb = V[:, None]
            if dirac:
                vals = _f(problem, (Ml, P), Vb, X, X, 0.0, 0.0)
                count.f += Ml * P
            else:
                K = cfg.samples(n, 0, 1)
                noise = measure.draw_noise(blk, (Ml, 1, K, d))
                Z = measure.apply(X[:, :, None, :], noise)
                vals = _f(problem, (Ml, P, K), Vb[..., None], X[:, :, None, :], Z, 0.0, 0.0).mean(axis=-1)
                count.f += Ml * P * K
            total += span * vals.mean(axis=0)
            continue
        acc = np.zeros(P)
        for m in range(1, Ml + 1):
            own = stream.child(l, m, OWN)
            V = t + span * own.uniform()
            X = problem.step(V, t, xs, math.sqrt(V - t) * own.normal((1, d)))
            if dirac:
                pts = X
                K = 1
            else:
                K = cfg.samples(n, l, m)
                Z = _nonlocal_points(problem, X, measure.draw_noise(own, (K, d)))
                pts = np.concatenate([X[:, None, :], Z], axis=1).reshape(-1, d)
            hi = truncate(_estimate(problem, cfg, l, V, pts, stream.child(l, m), count), r)
            lo = truncate(_estimate(problem, cfg, l - 1, V, pts, stream.child(l, -m), count), r)
            # hi and lo share every point, so f sees them stacked on a leading axis
            if dirac:
                both = _f(problem, (2, P), V, X, X, np.stack([hi, lo]), np.stack([hi, lo]))
                diff = both[0] - both[1]
            else:
                y = np.stack([hi, lo]).reshape(2, P, K + 1)
                both = _f(problem, (2, P, K), V, X[:, None, :], Z, y[..., :1], y[..., 1:])
                diff = (both[0] - both[1]).mean(axis=-1)
            count.f += 2 * P * K
            acc += diff
        total += span * acc / Ml
    return total


def mlp_estimate(problem, cfg: MlpConfig, t: float, x, rng: RngStream) -> MlpEstimate:
    """One realisation of ``U_{n,M,r}(t, x)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.d,):
        raise ValueError(f"x must have shape ({problem.d},), got {x.shape}")
    if not 0.0 <= t <= problem.T:
        raise ValueError(f"t = {t} outside [0, {problem.T}]")
    if not problem.domain.contains(x):
        raise ValueError(f"x = {x} outside the problem domain")
    count = _Counter()
    value = _estimate(problem, cfg, cfg.levels, float(t), x[None, :], rng, count)
    return MlpEstimate(float(value[0]), count.f, count.g)


def mlp_reference(problem, cfg: MlpConfig, runs: int, t: float, x, seed):
    """Mean and uncorrected standard deviation over ``runs`` independent estimates.

    ``seed`` is an integer or a stream; run ``k`` uses its child ``k``.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    base = seed if isinstance(seed, RngStream) else RngStream(seed)
    values = np.array([mlp_estimate(problem, cfg, t, x, base.child(k)).value for k in range(runs)])
    return float(values.mean()), float(values.std())


def mlp_cost(n: int, M: int, K: int, points: int = 1, dirac: bool = False) -> tuple[int, int]:
    """Closed-form ``(f, g)`` evaluation counts of one estimate with constant ``K``."""
    if dirac:
        K = 1
    fanout = points if dirac else points * (K + 1)
    if n == 0:
        return 0, 0
    f_count = M**n * points * K
    g_count = M**n * points
    for l in range(1, n):
        Ml = M ** (n - l)
        f_hi, g_hi = mlp_cost(l, M, K, fanout, dirac)
        f_lo, g_lo = mlp_cost(l - 1, M, K, fanout, dirac)
        f_count += Ml * (2 * points * K + f_hi + f_lo)
        g_count += Ml * (g_hi + g_lo)
    return f_count, g_count

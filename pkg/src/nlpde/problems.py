"""The shipped example PDE problems and the replicator-mutator closed form.

Every problem is posed in initial-value form

    du/dt = 1/2 Tr(sigma sigma^T Hess u) + <mu, grad u>
            + int f(t, x, z, u(t, x), u(t, z)) nu_x(dz),     u(0, .) = g,

with zero normal derivative on hypercube boundaries.  All callables are
vectorised over leading axes: points have shape ``(..., d)`` and values
``(...)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import Domain
from .stochastic import NonlocalMeasure

__all__ = [
    "PROBLEM_NAMES",
    "PdeProblem",
    "RepMutParams",
    "allen_cahn_mass",
    "exact_replicator_mutator",
    "fisher_kpp",
    "get_problem",
    "nonlocal_competition",
    "nonlocal_sine_gordon",
    "replicator_mutator",
]

EPSILON = 0.1
KERNEL_SCALE = 0.1
MUTATION = 0.1
INITIAL_VARIANCE = 0.05
IMPORTANCE_SCALE = 1.0 / 50.0


@dataclass(frozen=True)
class PdeProblem:
    name: str
    d: int
    T: float
    domain: Domain
    g: Callable
    f: Callable
    sigma_action: Callable
    nonlocal_measure: NonlocalMeasure
    mu: Callable | None = None
    analytic: Callable | None = field(default=None, compare=False)

    @property
    def reflecting(self) -> bool:
        return self.domain.is_hypercube

    def step(self, t_next, t_prev, y, dw):
        from .stochastic import step

        return step(self, t_next, t_prev, y, dw)


def _sq_norm(x):
    x = np.asarray(x, dtype=np.float64)
    return np.einsum("...i,...i->...", x, x)


def _gaussian_bump(x):
    return np.exp(-0.25 * _sq_norm(x))


def _scaled_action(eps):
    def sigma_action(x, v):
        return eps * np.asarray(v, dtype=np.float64)

    return sigma_action


def fisher_kpp(d: int, T: float) -> PdeProblem:
    """Fisher-KPP with Neumann boundary on ``[-1/2, 1/2]^d``; Dirac non-local measure."""

    def f(t, x, z, y, yz):
        return y * (1.0 - y)

    return PdeProblem(
        name="fisher-kpp", d=d, T=T, domain=Domain.hypercube(d),
        g=_gaussian_bump, f=f, sigma_action=_scaled_action(EPSILON),
        nonlocal_measure=NonlocalMeasure.dirac(),
    )


def competition_compensator(d: int, scale: float = KERNEL_SCALE) -> float:
    """Normaliser ``pi^{d/2} s^d`` turning the Gaussian kernel into a probability law."""
    return math.pi ** (d / 2) * scale**d


def nonlocal_competition(d: int, T: float) -> PdeProblem:
    c = competition_compensator(d)

    def f(t, x, z, y, yz):
        return y * (1.0 - yz * c)

    return PdeProblem(
        name="competition", d=d, T=T, domain=Domain.free_space(d),
        g=_gaussian_bump, f=f, sigma_action=_scaled_action(EPSILON),
        nonlocal_measure=NonlocalMeasure.gaussian_around_x(KERNEL_SCALE),
    )


def nonlocal_sine_gordon(d: int, T: float) -> PdeProblem:
    c = competition_compensator(d)

    def f(t, x, z, y, yz):
        return np.sin(y) - yz * c

    return PdeProblem(
        name="sine-gordon", d=d, T=T, domain=Domain.free_space(d),
        g=_gaussian_bump, f=f, sigma_action=_scaled_action(EPSILON),
        nonlocal_measure=NonlocalMeasure.gaussian_around_x(KERNEL_SCALE),
    )


@dataclass(frozen=True)
class RepMutParams:
    """Per-coordinate mutation scales, initial variances and initial means."""

    mutation: np.ndarray
    variance: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mutation, dtype=np.float64))
        s = np.atleast_1d(np.asarray(self.variance, dtype=np.float64))
        u = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        if not (m.shape == s.shape == u.shape and m.ndim == 1):
            raise ValueError("mutation, variance and mean must be equal-length vectors")
        if np.any(m <= 0) or np.any(s <= 0):
            raise ValueError("mutation scales and variances must be positive")
        object.__setattr__(self, "mutation", m)
        object.__setattr__(self, "variance", s)
        object.__setattr__(self, "mean", u)

    @classmethod
    def isotropic(cls, d: int, mutation=MUTATION, variance=INITIAL_VARIANCE, mean=0.0):
        return cls(np.full(d, mutation), np.full(d, variance), np.full(d, mean))

    @property
    def d(self) -> int:
        return len(self.mutation)


def replicator_moments(params: RepMutParams, t: float):
    """Variance and mean ``(S_i(t), U_i(t))`` of the Gaussian solution."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    m, s, u = params.mutation, params.variance, params.mean
    ch, sh = np.cosh(m * t), np.sinh(m * t)
    denom = m * ch + s * sh
    return m * (m * sh + s * ch) / denom, m * u / denom


def exact_replicator_mutator(params: RepMutParams, t: float, x) -> np.ndarray:
    """Closed-form solution of the replicator-mutator PDE on ``R^d``."""
    var, mean = replicator_moments(params, t)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.d:
        raise ValueError(f"point dimension {x.shape[-1]} != {params.d}")
    log_u = -0.5 * np.sum(np.log(2 * np.pi * var)) - np.sum((x - mean) ** 2 / (2 * var), axis=-1)
    return np.exp(log_u)


def fitness(x):
    """Quadratic Malthusian fitness ``a(x) = -|x|^2 / 2``."""
    return -0.5 * _sq_norm(x)


def replicator_mutator(d: int, T: float, variant: str = "weighted") -> PdeProblem:
    """Replicator-mutator on ``R^d``.

    ``variant="weighted"`` samples the non-local variable from a narrow
    Gaussian importance law and divides by its density inside ``f``;
    ``variant="box"`` integrates uniformly over ``[-1/2, 1/2]^d``.
    """
    params = RepMutParams.isotropic(d)
    mutation = params.mutation.copy()

    def g(x):
        return exact_replicator_mutator(params, 0.0, x)

    def sigma_action(x, v):
        return mutation * np.asarray(v, dtype=np.float64)

    if variant == "weighted":
        measure = NonlocalMeasure.weighted_gaussian(IMPORTANCE_SCALE)

        def f(t, x, z, y, yz):
            return y * (fitness(x) - yz * fitness(z) / measure.density_weight(z))

        name = "rep-mut"
    elif variant == "box":
        measure = NonlocalMeasure.uniform_hypercube(d)

        def f(t, x, z, y, yz):
            return y * (fitness(x) - yz * fitness(z))

        name = "rep-mut-box"
    else:
        raise ValueError(f"unknown replicator-mutator variant {variant!r}")

    def analytic(t, x):
        return exact_replicator_mutator(params, t, x)

    return PdeProblem(
        name=name, d=d, T=T, domain=Domain.free_space(d), g=g, f=f,
        sigma_action=sigma_action, nonlocal_measure=measure, analytic=analytic,
    )


def allen_cahn_mass(d: int, T: float) -> PdeProblem:
    """Mass-conserving Allen-Cahn with Neumann boundary on ``[-1/2, 1/2]^d``."""

    def f(t, x, z, y, yz):
        return y - y**3 - (yz - yz**3)

    return PdeProblem(
        name="allen-cahn", d=d, T=T, domain=Domain.hypercube(d),
        g=_gaussian_bump, f=f, sigma_action=_scaled_action(EPSILON),
        nonlocal_measure=NonlocalMeasure.uniform_hypercube(d),
    )


_FACTORIES = {
    "fisher-kpp": fisher_kpp,
    "competition": nonlocal_competition,
    "sine-gordon": nonlocal_sine_gordon,
    "rep-mut": lambda d, T: replicator_mutator(d, T, "weighted"),
    "rep-mut-box": lambda d, T: replicator_mutator(d, T, "box"),
    "allen-cahn": allen_cahn_mass,
}
PROBLEM_NAMES = tuple(_FACTORIES)


def get_problem(name: str, d: int, T: float) -> PdeProblem:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}") from None
    return factory(d, T)

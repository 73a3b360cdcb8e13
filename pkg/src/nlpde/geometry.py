"""Domains and the reflection of straight steps at their boundary.

Two domain kinds are supported: free space and closed axis-aligned
hypercubes.  A step ``a -> b`` that leaves a hypercube is reflected at the
first face it crosses, the remaining travel continues in the mirrored
direction, and this repeats until the residual segment stays inside.  On a
hypercube the coordinates decouple, so the iterated reflection has a
closed form (:func:`fold_hypercube`); both are kept so each can check the
other.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

__all__ = [
    "Domain",
    "DomainViolationError",
    "ReflectionNonconvergenceError",
    "ReflectionResult",
    "first_exit",
    "fold_hypercube",
    "reflect_batch",
    "reflect_segment",
]

CONTAINMENT_TOL = 1e-12
DEFAULT_MAX_BOUNCES = 1000


class DomainViolationError(ValueError):
    """A point that must lie in the domain does not."""


class ReflectionNonconvergenceError(RuntimeError):
    """The bounce budget ran out before the residual segment stayed inside.

    ``start`` and ``target`` hold the partial state at the moment the budget
    was exhausted (for batched calls, of the first offending row).
    """

    def __init__(self, message, start=None, target=None, bounces=None, row=None):
        super().__init__(message)
        self.start = start
        self.target = target
        self.bounces = bounces
        self.row = row


@dataclass(frozen=True)
class Domain:
    """Free space ``R^d`` or a closed box ``[lower, upper]``."""

    kind: str
    dim: int
    lower: np.ndarray | None = field(default=None, compare=False)
    upper: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        if self.kind == "free":
            if self.lower is not None or self.upper is not None:
                raise ValueError("free space carries no bounds")
        elif self.kind == "hypercube":
            lo = np.asarray(self.lower, dtype=np.float64).reshape(-1)
            hi = np.asarray(self.upper, dtype=np.float64).reshape(-1)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise ValueError("hypercube bounds must have length dim")
            if not np.all(lo < hi):
                raise ValueError("hypercube needs lower < upper in every coordinate")
            lo.setflags(write=False)
            hi.setflags(write=False)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def free_space(cls, dim: int) -> "Domain":
        return cls("free", dim)

    @classmethod
    def hypercube(cls, dim: int, lower=-0.5, upper=0.5) -> "Domain":
        lo = np.broadcast_to(np.asarray(lower, dtype=np.float64), (dim,))
        hi = np.broadcast_to(np.asarray(upper, dtype=np.float64), (dim,))
        return cls("hypercube", dim, lo.copy(), hi.copy())

    @property
    def is_hypercube(self) -> bool:
        return self.kind == "hypercube"

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        if (self.kind, self.dim) != (other.kind, other.dim):
            return False
        if not self.is_hypercube:
            return True
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __hash__(self):
        if self.is_hypercube:
            return hash((self.kind, self.dim, self.lower.tobytes(), self.upper.tobytes()))
        return hash((self.kind, self.dim))

    def contains(self, x, tol: float = CONTAINMENT_TOL):
        """Membership of one point (returns bool) or a batch ``(..., d)``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"point dimension {x.shape[-1]} != domain dimension {self.dim}")
        if not self.is_hypercube:
            inside = np.all(np.isfinite(x), axis=-1)
        else:
            inside = np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside


@dataclass(frozen=True)
class ReflectionResult:
    endpoint: np.ndarray
    bounce_count: int
    path_length: float


def _check_start(a, domain):
    if not domain.contains(a):
        raise DomainViolationError(f"start point {a} lies outside the domain")


def first_exit(a, b, domain: Domain):
    """First boundary crossing of the segment ``a -> b``.

    Returns ``(crossing, face_normal)`` or ``None`` when the closed segment
    stays in the domain.  Simultaneous hits are resolved towards the lowest
    coordinate index.  A segment ending exactly on a face does not exit.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_start(a, domain)
    if not domain.is_hypercube:
        return None
    lo, hi = domain.lower, domain.upper
    delta = b - a
    best_r, best_i, best_face = np.inf, -1, 0.0
    for i in range(domain.dim):
        if b[i] > hi[i]:
            r, face = (hi[i] - a[i]) / delta[i], hi[i]
        elif b[i] < lo[i]:
            r, face = (lo[i] - a[i]) / delta[i], lo[i]
        else:
            continue
        if r < best_r:
            best_r, best_i, best_face = r, i, face
    if best_i < 0:
        return None
    r = min(max(best_r, 0.0), 1.0)
    crossing = np.clip(a + r * delta, lo, hi)
    crossing[best_i] = best_face
    normal = np.zeros(domain.dim)
    normal[best_i] = 1.0 if best_face == hi[best_i] else -1.0
    return crossing, normal


def reflect_segment(a, b, domain: Domain, max_bounces: int = DEFAULT_MAX_BOUNCES) -> ReflectionResult:
    """Reflect the step ``a -> b`` back into ``domain`` until it stays inside."""
    if max_bounces < 1:
        raise ValueError("max_bounces must be at least 1")
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    _check_start(a, domain)
    if not domain.is_hypercube:
        return ReflectionResult(b, 0, float(np.linalg.norm(b - a)))
    bounces = 0
    length = 0.0
    while True:
        hit = first_exit(a, b, domain)
        if hit is None:
            length += float(np.linalg.norm(b - a))
            return ReflectionResult(b, bounces, length)
        if bounces >= max_bounces:
            raise ReflectionNonconvergenceError(
                f"no convergence after {max_bounces} bounces", start=a, target=b, bounces=bounces
            )
        crossing, normal = hit
        length += float(np.linalg.norm(crossing - a))
        # mirror the endpoint about the face plane through the crossing
        b = b - 2.0 * normal * np.dot(b - crossing, normal)
        a = crossing
        bounces += 1


def fold_hypercube(b, domain: Domain) -> np.ndarray:
    """Closed-form reflection endpoint: a triangle wave per coordinate."""
    if not domain.is_hypercube:
        raise ValueError("fold_hypercube needs a hypercube domain")
    b = np.asarray(b, dtype=np.float64)
    width = domain.upper - domain.lower
    y = np.mod(b - domain.lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    return domain.lower + y


def reflect_batch(a, b, domain: Domain, max_bounces: int = DEFAULT_MAX_BOUNCES, check_start: bool = True):
    """Row-wise :func:`reflect_segment` endpoints for ``(P, d)`` arrays.

    Returns ``(endpoints, bounce_counts)``.  Dispatches to the compiled
    kernel when it is available.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != domain.dim:
        raise ValueError(f"expected matching (P, {domain.dim}) arrays, got {a.shape} and {b.shape}")
    if not domain.is_hypercube:
        return b.copy(), np.zeros(len(b), dtype=np.int64)
    if check_start:
        inside = domain.contains(a)
        if not np.all(inside):
            row = int(np.argmin(inside))
            raise DomainViolationError(f"start point {a[row]} (row {row}) lies outside the domain")
    out, counts, bad = kernels.reflect_batch(a, b, domain.lower, domain.upper, int(max_bounces))
    if bad >= 0:
        raise ReflectionNonconvergenceError(
            f"row {bad}: no convergence after {max_bounces} bounces",
            start=a[bad], target=b[bad], bounces=max_bounces, row=bad,
        )
    return out, counts

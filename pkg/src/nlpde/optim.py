"""Update rules returning the parameter delta; callers apply ``theta -= delta``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["Adam", "AdamState", "Sgd", "adam_update", "make_optimizer", "sgd_update"]

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def _as_array(grads) -> np.ndarray:
    return np.asarray(getattr(grads, "flat", grads))


def _schedule(rate) -> Callable[[int], float]:
    if callable(rate):
        return rate
    rate = float(rate)
    if not rate > 0:
        raise ValueError("learning rate must be positive")
    return lambda m: rate


@dataclass
class AdamState:
    """Moment buffers and step counter; both moments start at zero."""

    size: int
    learning_rate: float | Callable[[int], float] = 1e-2
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPSILON
    dtype: type = np.float64
    first_moment: np.ndarray = field(init=False)
    second_moment: np.ndarray = field(init=False)
    step_count: int = field(init=False, default=0)

    def __post_init__(self):
        self.first_moment = np.zeros(self.size, dtype=self.dtype)
        self.second_moment = np.zeros(self.size, dtype=self.dtype)
        self._rate = _schedule(self.learning_rate)

    def rate(self, m: int) -> float:
        return self._rate(m)


def adam_update(state: AdamState, grads) -> np.ndarray:
    """Advance ``state`` by one step and return the bias-corrected Adam delta.

    The denominator is ``sqrt(v / (1 - beta2^m)) + eps``, with ``eps``
    outside the root.
    """
    g = _as_array(grads)
    if g.shape != state.first_moment.shape:
        raise ValueError(f"gradient shape {g.shape} != state shape {state.first_moment.shape}")
    state.step_count += 1
    m = state.step_count
    b1, b2 = state.beta1, state.beta2
    state.first_moment *= b1
    state.first_moment += (1.0 - b1) * g
    state.second_moment *= b2
    state.second_moment += (1.0 - b2) * g * g
    m_hat = state.first_moment / (1.0 - b1**m)
    v_hat = np.abs(state.second_moment) / (1.0 - b2**m)
    return state.rate(m) * m_hat / (np.sqrt(v_hat) + state.eps)


def sgd_update(rate: float, grads) -> np.ndarray:
    if not rate > 0:
        raise ValueError("learning rate must be positive")
    return rate * _as_array(grads)


class Adam:
    def __init__(self, size: int, learning_rate=1e-2, dtype=np.float64):
        self.state = AdamState(size, learning_rate, dtype=dtype)

    def delta(self, grads) -> np.ndarray:
        return adam_update(self.state, grads)


class Sgd:
    def __init__(self, size: int, learning_rate=1e-2, dtype=np.float64):
        self.size = size
        self.rate = _schedule(learning_rate)
        self.step_count = 0

    def delta(self, grads) -> np.ndarray:
        g = _as_array(grads)
        if g.shape != (self.size,):
            raise ValueError(f"gradient shape {g.shape} != ({self.size},)")
        self.step_count += 1
        return sgd_update(self.rate(self.step_count), g)


def make_optimizer(name: str, size: int, learning_rate, dtype=np.float64):
    if name == "adam":
        return Adam(size, learning_rate, dtype)
    if name == "sgd":
        return Sgd(size, learning_rate, dtype)
    raise ValueError(f"unknown optimizer {name!r}")

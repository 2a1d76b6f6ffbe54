"""Tabular Q-learning primitives.

All randomness flows through a ``numpy.random.Generator`` (PCG64) owned by the
caller. ``Random(0,1)`` draws are ``rng.random()`` (half-open ``[0, 1)``) and
uniform action draws are ``rng.integers(0, n_actions)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return the run generator for ``seed`` (PCG64, 64-bit seed)."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class QTable:
    """Dense ``(n_states, n_actions)`` table of action values."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError(f"Q-table must be a non-empty 2-D array, got shape {self.values.shape}")

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def row(self, state: int = 0) -> np.ndarray:
        return self.values[state]


@dataclass(frozen=True)
class LearningParams:
    alpha: float = 0.1
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class Fixed:
    """Time-invariant exploration rate."""

    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")


@dataclass(frozen=True)
class ExpDecay:
    """Exploration rate ``exp(-k t)``."""

    k: float

    def __post_init__(self) -> None:
        if not (self.k > 0.0 and math.isfinite(self.k)):
            raise ValueError(f"decay rate k must be a positive finite number, got {self.k}")


ExplorationSchedule = Union[Fixed, ExpDecay]


def init_qtable(n_states: int, n_actions: int, rng: np.random.Generator) -> QTable:
    if n_states < 1 or n_actions < 1:
        raise ValueError(f"Q-table dimensions must be positive, got ({n_states}, {n_actions})")
    return QTable(rng.random((n_states, n_actions)))


def epsilon_at(schedule: ExplorationSchedule, t: int) -> float:
    if isinstance(schedule, Fixed):
        return schedule.epsilon
    return math.exp(-schedule.k * t)


def greedy_action(qrow) -> int:
    """Lowest index attaining the row maximum."""
    qrow = np.asarray(qrow)
    if qrow.size == 0:
        raise ValueError("cannot pick an action from an empty row")
    return int(np.argmax(qrow))


def select_action(qrow, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice.

    Consumes one ``rng.random()`` coin per call and, only when exploring, one
    ``rng.integers(0, n)`` draw. The compiled run loops consume the stream in
    the same order.
    """
    qrow = np.asarray(qrow)
    if qrow.size == 0:
        raise ValueError("cannot pick an action from an empty row")
    if rng.random() < eps:
        return int(rng.integers(0, qrow.size))
    return int(np.argmax(qrow))


def update(
    q: QTable,
    state: int,
    action: int,
    reward: float,
    next_state: int,
    params: LearningParams,
) -> None:
    """Apply ``Q(s,a) <- (1-alpha) Q(s,a) + alpha [r + delta max_a' Q(s',a')]`` in place."""
    if not (0 <= state < q.n_states and 0 <= next_state < q.n_states):
        raise ValueError(f"state index out of range [0, {q.n_states})")
    if not 0 <= action < q.n_actions:
        raise ValueError(f"action index {action} out of range [0, {q.n_actions})")
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    continuation = float(q.values[next_state].max())
    target = reward + params.delta * continuation
    q.values[state, action] = (1.0 - params.alpha) * q.values[state, action] + params.alpha * target

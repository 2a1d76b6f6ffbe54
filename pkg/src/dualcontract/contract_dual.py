"""Two principals, one agent: agent best response, heterogeneous effort cost, principal rewards."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

# Profits within this distance of the cell maximum count as ties. Distinct
# grid profits differ by far more; float rounding between equal-profit effort
# splits does not.
TIE_TOL = 1e-12

BLEND_FORMS = ("algorithm2", "section54")
TIE_RULES = ("lowest_index", "split")


@dataclass(frozen=True)
class DualContractParams:
    I1: float = 1.0
    I2: float = 1.0
    T1: float = 2.0
    T2: float = 2.0
    c: float = 2.0
    kappa: float = 0.0
    beta: float = 0.0
    d_p: int = 101
    d_e: int = 101

    def __post_init__(self) -> None:
        for name in ("I1", "I2", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.T1 > self.I1:
            raise ValueError(f"T1 must exceed I1, got T1={self.T1}, I1={self.I1}")
        if not self.T2 > self.I2:
            raise ValueError(f"T2 must exceed I2, got T2={self.T2}, I2={self.I2}")
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError(f"kappa must be in [0, 1), got {self.kappa}")
        if not 0.0 <= self.beta <= 0.5:
            raise ValueError(f"beta must be in [0, 0.5], got {self.beta}")
        if self.d_p < 2:
            raise ValueError(f"d_p must be at least 2, got {self.d_p}")
        if self.d_e < 2:
            raise ValueError(f"d_e must be at least 2, got {self.d_e}")

    @property
    def a1(self) -> float:
        return self.T1 - self.I1

    @property
    def a2(self) -> float:
        return self.T2 - self.I2

    @property
    def tax_grid(self) -> np.ndarray:
        return np.arange(self.d_p) / (self.d_p - 1)

    @property
    def n_agent_actions(self) -> int:
        return self.d_e * (self.d_e + 1) // 2

    def table_key(self) -> tuple:
        """Fields the agent table depends on (it ignores ``beta``)."""
        return (self.I1, self.I2, self.T1, self.T2, self.c, self.kappa, self.d_p, self.d_e)


class EffortPair(NamedTuple):
    e1: float
    e2: float


@dataclass(frozen=True)
class AgentDecisionTable:
    """Agent's chosen action index for every ``(p1, p2)`` grid cell.

    ``actions[i, j]`` indexes the triangular effort enumeration; ``e1``, ``e2``
    and ``profit`` are the decoded efforts and the agent's profit per cell.
    """

    params: DualContractParams
    actions: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    profit: np.ndarray

    def effort(self, i: int, j: int) -> EffortPair:
        return EffortPair(float(self.e1[i, j]), float(self.e2[i, j]))


def agent_cost(e: EffortPair, c: float, kappa: float):
    """Effort cost ``0.5 c s^2 (1 - kappa + 2 kappa e2/s)`` with ``s = e1 + e2``; zero at ``s = 0``.

    Vectorises over array-valued ``e1``/``e2``.
    """
    e1, e2 = e
    s = np.asarray(e1 + e2, dtype=np.float64)
    safe = np.where(s > 0, s, 1.0)
    cost = 0.5 * c * s * s * (1.0 - kappa + 2.0 * kappa * e2 / safe)
    cost = np.where(s > 0, cost, 0.0)
    return float(cost) if cost.ndim == 0 else cost


def agent_profit(p1, p2, e: EffortPair, params: DualContractParams):
    e1, e2 = e
    return (
        params.a1 * e1 * (1.0 - p1)
        + params.a2 * e2 * (1.0 - p2)
        - agent_cost(e, params.c, params.kappa)
    )


def _effort_enumeration(d_e: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(d_e)
    # triu_indices yields (i, j) with j >= i, row-major; re-map to e1-major,
    # inner e2 = 0 .. d_e-1-i.
    e2_idx = j - i
    return i / (d_e - 1), e2_idx / (d_e - 1)


def decode_action(k: int, d_e: int) -> EffortPair:
    """Decode an action index under the triangular enumeration.

    Index runs over ``i = 0..d_e-1`` (``e1 = i/(d_e-1)``) and, inside, over
    ``j = 0..d_e-1-i`` (``e2 = j/(d_e-1)``).
    """
    n = d_e * (d_e + 1) // 2
    if not 0 <= k < n:
        raise ValueError(f"action index {k} out of range [0, {n}) for d_e={d_e}")
    i = 0
    row_len = d_e
    while k >= row_len:
        k -= row_len
        i += 1
        row_len -= 1
    return EffortPair(i / (d_e - 1), k / (d_e - 1))


def build_agent_table(params: DualContractParams, tie_rule: str = "lowest_index") -> AgentDecisionTable:
    """Exhaustive best response for every tax cell.

    ``tie_rule="lowest_index"`` takes the lowest action index among tied
    maxima. ``"split"`` instead takes the tied action with the smallest
    ``|e1 - e2|`` (then the lowest index); it is an analysis aid, not the
    default behaviour.
    """
    if tie_rule not in TIE_RULES:
        raise ValueError(f"tie_rule must be one of {TIE_RULES}, got {tie_rule!r}")
    e1, e2 = _effort_enumeration(params.d_e)
    cost = agent_cost(EffortPair(e1, e2), params.c, params.kappa)
    gain1 = params.a1 * e1
    gain2 = params.a2 * e2
    taxes = params.tax_grid
    n = params.d_p
    imbalance = np.abs(e1 - e2)
    actions = np.empty((n, n), dtype=np.int64)
    profit = np.empty((n, n))
    rows = np.arange(n)
    for i, p1 in enumerate(taxes):
        # rows: p2 values; columns: agent actions
        values = gain1 * (1.0 - p1) + np.outer(1.0 - taxes, gain2) - cost
        best = values.max(axis=1)
        tied = values >= (best - TIE_TOL)[:, None]
        if tie_rule == "split":
            k = np.argmin(np.where(tied, imbalance, np.inf), axis=1)
        else:
            k = np.argmax(tied, axis=1)
        actions[i] = k
        profit[i] = values[rows, k]
    return AgentDecisionTable(params, actions, e1[actions], e2[actions], profit)


def _pure_effort(a: float, p: float, c: float, cost_factor: float) -> float:
    return min(max(a * (1.0 - p) / (c * cost_factor), 0.0), 1.0)


def agent_best_effort_closed_form(p1: float, p2: float, params: DualContractParams) -> EffortPair:
    """Continuous best response.

    For a fixed total effort the cost is linear in ``e2``, so the optimum puts
    all effort in one project. Compare the two pure options; ties go to
    project 2, matching the table's lowest-index rule.
    """
    k = params.kappa
    x1 = _pure_effort(params.a1, p1, params.c, 1.0 - k)
    x2 = _pure_effort(params.a2, p2, params.c, 1.0 + k)
    v1 = params.a1 * x1 * (1.0 - p1) - 0.5 * params.c * x1 * x1 * (1.0 - k)
    v2 = params.a2 * x2 * (1.0 - p2) - 0.5 * params.c * x2 * x2 * (1.0 + k)
    if v1 > v2:
        return EffortPair(x1, 0.0)
    return EffortPair(0.0, x2)


def principal_profits(p1, p2, e: EffortPair, params: DualContractParams):
    """Raw per-principal profits ``(T_i - I_i) e_i p_i``, net of the returned investment."""
    e1, e2 = e
    return params.a1 * e1 * p1, params.a2 * e2 * p2


def blended_rewards(pi1, pi2, beta: float):
    """Mix own and joint profit: ``r_i = beta (pi1 + pi2) + (1 - 2 beta) pi_i``."""
    joint = pi1 + pi2
    return beta * joint + (1.0 - 2.0 * beta) * pi1, beta * joint + (1.0 - 2.0 * beta) * pi2


def scaled_blended_rewards(p1, p2, e: EffortPair, params: DualContractParams):
    """Blend with each principal's reward scaled by its own margin ``T_i - I_i``.

    Coincides with :func:`blended_rewards` when both margins are 1.
    """
    e1, e2 = e
    joint = e1 * p1 + e2 * p2
    b = params.beta
    r1 = params.a1 * joint * b + params.a1 * e1 * p1 * (1.0 - 2.0 * b)
    r2 = params.a2 * joint * b + params.a2 * e2 * p2 * (1.0 - 2.0 * b)
    return r1, r2


def reward_matrices(
    table: AgentDecisionTable, beta: float, blend_form: str = "algorithm2"
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell learner rewards ``(R1[i, j], R2[i, j])`` for tax indices ``(i, j)``."""
    params = table.params
    taxes = params.tax_grid
    P1, P2 = np.meshgrid(taxes, taxes, indexing="ij")
    e = EffortPair(table.e1, table.e2)
    if blend_form == "algorithm2":
        pi1, pi2 = principal_profits(P1, P2, e, params)
        return blended_rewards(pi1, pi2, beta)
    if blend_form == "section54":
        return scaled_blended_rewards(P1, P2, e, replace(params, beta=beta))
    raise ValueError(f"unknown blend form {blend_form!r}; expected one of {BLEND_FORMS}")


def export_rows(table: AgentDecisionTable):
    """Yield ``(p1, p2, e1, e2, agent_profit)`` per cell in row-major order."""
    taxes = table.params.tax_grid
    n = table.params.d_p
    for i in range(n):
        for j in range(n):
            yield taxes[i], taxes[j], table.e1[i, j], table.e2[i, j], table.profit[i, j]

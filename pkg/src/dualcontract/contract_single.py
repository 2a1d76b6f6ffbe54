"""Single principal-agent environment and the limited-liability debt-contract reference model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class InfeasibleContractError(Exception):
    """No grid contract satisfies the principal's break-even condition."""


@dataclass(frozen=True)
class SingleContractParams:
    I: float = 1.0
    T: float = 2.0
    c: float = 2.0
    d_p: int = 101

    def __post_init__(self) -> None:
        if not self.I > 0:
            raise ValueError(f"I must be positive, got {self.I}")
        if not self.T > self.I:
            raise ValueError(f"T must exceed I, got T={self.T}, I={self.I}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.d_p < 2:
            raise ValueError(f"d_p must be at least 2, got {self.d_p}")

    @property
    def tax_grid(self) -> np.ndarray:
        return np.arange(self.d_p) / (self.d_p - 1)


@dataclass(frozen=True)
class InnesParams:
    X_H: float
    X_L: float
    I: float
    c: float

    def __post_init__(self) -> None:
        if not self.X_H > self.X_L:
            raise ValueError(f"X_H must exceed X_L, got X_H={self.X_H}, X_L={self.X_L}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.I > 0:
            raise ValueError(f"I must be positive, got {self.I}")


class InnesContract(NamedTuple):
    D_L: float
    D_H: float
    agent_value: float


def _check_tax(p) -> None:
    p = np.asarray(p)
    if np.any(p < 0.0) or np.any(p > 1.0) or np.any(np.isnan(p)):
        raise ValueError(f"tax rate must lie in [0, 1], got {p}")


def agent_best_effort(p, params: SingleContractParams):
    """Agent's profit-maximising effort ``clamp((T-I)(1-p)/c, 0, 1)``.

    Accepts a scalar or an array of tax rates.
    """
    _check_tax(p)
    return np.clip((params.T - params.I) * (1.0 - p) / params.c, 0.0, 1.0)


def single_step_profits(p, params: SingleContractParams):
    """Return ``(principal_profit, agent_profit)`` under the agent's best response.

    The principal's profit is net of the returned investment ``I``.
    """
    e = agent_best_effort(p, params)
    surplus = params.T - params.I
    principal = surplus * e * p
    agent = surplus * e * (1.0 - p) - 0.5 * params.c * e * e
    return principal, agent


def innes_agent_value(D_L, D_H, e, params: InnesParams):
    """Agent's expected residual net of effort cost for contract ``(D_L, D_H)`` at effort ``e``."""
    return e * (params.X_H - D_H) + (1.0 - e) * (params.X_L - D_L) - 0.5 * params.c * e * e


def _innes_effort(D_L, D_H, params: InnesParams):
    return np.clip(((params.X_H - D_H) - (params.X_L - D_L)) / params.c, 0.0, 1.0)


def innes_agent_effort(contract: tuple[float, float], params: InnesParams) -> float:
    """First-order-condition effort for ``contract = (D_L, D_H)``, clamped to ``[0, 1]``."""
    D_L, D_H = contract
    if D_L > params.X_L or D_H > params.X_H:
        raise ValueError(
            f"contract ({D_L}, {D_H}) violates limited liability (X_L={params.X_L}, X_H={params.X_H})"
        )
    return float(_innes_effort(D_L, D_H, params))


def innes_break_even_residual(contract: tuple[float, float], e, I: float):
    D_L, D_H = contract
    return e * D_H + (1.0 - e) * D_L - I


def innes_optimal_contract_search(
    params: InnesParams, grid_step: float = 0.001, tol: float = 0.0
) -> InnesContract:
    """Brute-force the agent-optimal contract subject to the principal breaking even.

    The lattice is anchored at the liability caps: ``D_L = X_L - m*step`` and
    ``D_H = X_H - n*step`` down to zero, so ``X_L`` and ``X_H`` are exact grid
    points. A contract counts as break-even when ``|residual| <= tol`` or when
    it is one of the two ``D_H`` neighbours bracketing a sign change of the
    residual in its ``D_L`` row. Candidates are ranked by the agent's value with
    the principal paid exactly ``I`` (value plus residual), so tolerance slack
    is not rewarded.
    """
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    if tol < 0:
        raise ValueError(f"tol must be non-negative, got {tol}")
    n_low = int(np.floor(params.X_L / grid_step + 1e-9)) if params.X_L > 0 else 0
    n_high = int(np.floor(params.X_H / grid_step + 1e-9)) if params.X_H > 0 else 0
    D_L = params.X_L - np.arange(n_low + 1) * grid_step
    D_H = params.X_H - np.arange(n_high + 1) * grid_step
    L, H = np.meshgrid(D_L, D_H, indexing="ij")

    e = _innes_effort(L, H, params)
    residual = innes_break_even_residual((L, H), e, params.I)
    value = innes_agent_value(L, H, e, params)

    feasible = np.abs(residual) <= tol
    sign = np.sign(residual)
    crossing = sign[:, :-1] * sign[:, 1:] <= 0
    feasible[:, :-1] |= crossing
    feasible[:, 1:] |= crossing
    if not feasible.any():
        raise InfeasibleContractError(
            f"no contract on a {grid_step} grid breaks even for I={params.I} "
            f"(X_H={params.X_H}, X_L={params.X_L}, c={params.c})"
        )

    score = np.where(feasible, value + residual, -np.inf)
    i, j = np.unravel_index(int(np.argmax(score)), score.shape)
    return InnesContract(float(L[i, j]), float(H[i, j]), float(value[i, j]))

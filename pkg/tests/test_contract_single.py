import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualcontract.contract_single import (
    InfeasibleContractError,
    InnesParams,
    SingleContractParams,
    agent_best_effort,
    innes_agent_effort,
    innes_agent_value,
    innes_break_even_residual,
    innes_optimal_contract_search,
    single_step_profits,
)

BASE = SingleContractParams()
EFFORT_GRID = np.linspace(0.0, 1.0, 10_001)


def grid_effort(p, params=BASE):
    """Brute-force argmax of the agent's profit over a 1e-4 effort grid."""
    a = params.T - params.I
    profit = a * EFFORT_GRID * (1 - p) - 0.5 * params.c * EFFORT_GRID**2
    return EFFORT_GRID[np.argmax(profit)], profit.max()


def smaller_root(xh, xl, i, c):
    """Smaller D_H solving the break-even condition at D_L = X_L."""
    # e = (X_H - D_H)/c, e (D_H - X_L) = I - X_L  ->  (X_H - D)(D - X_L) = c (I - X_L)
    s, prod = xh + xl, xh * xl + c * (i - xl)
    return (s - math.sqrt(s * s - 4 * prod)) / 2


@pytest.mark.parametrize("p,expected", [(0.5, 0.25), (0.0, 0.5)])
def test_best_effort_matches_grid(p, expected):
    e, _ = grid_effort(p)
    assert agent_best_effort(p, BASE) == pytest.approx(expected, abs=1e-12)
    assert e == pytest.approx(expected, abs=1e-4)


def test_best_effort_full_tax():
    assert agent_best_effort(1.0, SingleContractParams(I=3, T=10, c=0.5)) == 0.0


@pytest.mark.parametrize("p", [-0.01, 1.01, float("nan")])
def test_best_effort_rejects(p):
    with pytest.raises(ValueError):
        agent_best_effort(p, BASE)


@pytest.mark.parametrize("p,expected", [(0.5, (0.125, 0.0625)), (1.0, (0.0, 0.0)), (0.0, (0.0, 0.25))])
def test_step_profits(p, expected):
    principal, agent = single_step_profits(p, BASE)
    e, best = grid_effort(p)
    assert (principal, agent) == pytest.approx(expected, abs=1e-12)
    assert agent == pytest.approx(best, abs=1e-6)
    assert principal == pytest.approx(e * p, abs=1e-4)


@given(
    st.floats(0, 1),
    st.floats(0.1, 5),
    st.floats(0.1, 5),
    st.floats(0.1, 5),
)
def test_agent_profit_nonnegative(p, i, margin, c):
    params = SingleContractParams(I=i, T=i + margin, c=c)
    principal, agent = single_step_profits(p, params)
    assert agent >= -1e-12
    assert principal >= 0


def test_params_invariants():
    with pytest.raises(ValueError):
        SingleContractParams(I=2, T=2)
    with pytest.raises(ValueError):
        SingleContractParams(c=0)
    with pytest.raises(ValueError):
        SingleContractParams(d_p=1)
    assert BASE.tax_grid[1] == 0.01 and BASE.tax_grid.size == 101


INNES = InnesParams(X_H=2, X_L=1, I=1.1, c=2)


def grid_innes_effort(D_L, D_H, params):
    return EFFORT_GRID[np.argmax(innes_agent_value(D_L, D_H, EFFORT_GRID, params))]


@pytest.mark.parametrize("D_H,expected", [(1.5, 0.25), (1.2, 0.4)])
def test_innes_effort_matches_grid(D_H, expected):
    assert innes_agent_effort((1.0, D_H), INNES) == pytest.approx(expected, abs=1e-12)
    assert grid_innes_effort(1.0, D_H, INNES) == pytest.approx(expected, abs=1e-4)


def test_innes_effort_at_caps():
    assert innes_agent_effort((1.0, 2.0), INNES) == 0.0


def test_innes_effort_liability():
    with pytest.raises(ValueError):
        innes_agent_effort((1.1, 1.5), INNES)
    with pytest.raises(ValueError):
        innes_agent_effort((1.0, 2.1), INNES)


def test_break_even_residual():
    assert innes_break_even_residual((1.0, 1.5), 0.25, 1.0) == pytest.approx(0.125, abs=1e-12)
    assert innes_break_even_residual((1.0, 1.2), 0.4, 1.08) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0, 1), st.floats(0.1, 10))
def test_break_even_constant_payout(e, i):
    assert innes_break_even_residual((i, i), e, i) == pytest.approx(0.0, abs=1e-12)


def test_search_default_tolerance():
    contract = innes_optimal_contract_search(INNES, grid_step=0.001)
    assert contract.D_L == 1.0
    assert abs(contract.D_H - smaller_root(2, 1, 1.1, 2)) <= 0.001
    assert round(smaller_root(2, 1, 1.1, 2), 4) == 1.2764


def test_search_with_tolerance_band():
    # A tolerance band admits contracts paying the principal slightly less
    # than I; the agent-optimal one sits on the band edge.
    contract = innes_optimal_contract_search(INNES, grid_step=0.001, tol=0.002)
    assert contract.D_L == 1.0
    edge = smaller_root(2, 1, 1.1 - 0.002, 2)
    assert abs(contract.D_H - edge) <= 0.001
    assert contract.D_H < smaller_root(2, 1, 1.1, 2)


def test_search_riskless():
    contract = innes_optimal_contract_search(InnesParams(X_H=2, X_L=1, I=1, c=2))
    assert (contract.D_L, contract.D_H) == (1.0, 1.0)


def test_search_infeasible():
    with pytest.raises(InfeasibleContractError):
        innes_optimal_contract_search(InnesParams(X_H=2, X_L=1, I=5, c=2))


def test_search_bad_arguments():
    with pytest.raises(ValueError):
        innes_optimal_contract_search(INNES, grid_step=0)
    with pytest.raises(ValueError):
        innes_optimal_contract_search(INNES, tol=-1)


@given(
    st.floats(0.5, 2.5),
    st.floats(0.5, 1.5),
    st.floats(0.05, 0.95),
    st.floats(1.0, 4.0),
)
def test_search_low_cap_binds(gap, xl, frac, c):
    """D_L* = X_L whenever an interior break-even contract exists."""
    xh = xl + gap
    # Keep first-best effort interior and pick I strictly inside the feasible range.
    if (xh - xl) / c > 1:
        c = xh - xl
    peak = xl + (xh - xl) ** 2 / (4 * c)
    i = xl + frac * (peak - xl)
    params = InnesParams(X_H=xh, X_L=xl, I=i, c=c)
    step = 0.005
    contract = innes_optimal_contract_search(params, grid_step=step)
    assert contract.D_L == xl
    assert abs(contract.D_H - smaller_root(xh, xl, i, c)) <= step + 1e-9

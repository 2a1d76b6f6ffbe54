"""Learning runs for the single- and dual-principal games, plus sweeps and benchmarks."""

from __future__ import annotations

import logging
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .config import ConfigError, InvariantError, RunConfig
from .contract_dual import (
    AgentDecisionTable,
    DualContractParams,
    EffortPair,
    blended_rewards,
    build_agent_table,
    principal_profits,
    reward_matrices,
    scaled_blended_rewards,
)
from .contract_single import agent_best_effort, single_step_profits
from .qcore import (
    Fixed,
    QTable,
    epsilon_at,
    greedy_action,
    init_qtable,
    make_rng,
    select_action,
    update,
)

log = logging.getLogger(__name__)

ENGINES = ("compiled", "python")
SWEEP_PARAMS = ("beta", "kappa", "alpha", "k")


@dataclass(frozen=True)
class Snapshot:
    t: int
    epsilon: float
    greedy_actions: tuple[int, ...]
    taxes: tuple[float, ...]
    efforts: tuple[float, ...]
    greedy_profits: tuple[float, ...]
    agent_profit: float
    effective_tax: float


@dataclass
class RunResult:
    config: RunConfig
    snapshots: list[Snapshot]
    qtables: list[QTable]
    converged: bool
    explore_counts: tuple[int, ...]

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @property
    def final_taxes(self) -> tuple[float, ...]:
        return self.final.taxes

    @property
    def effective_tax_final(self) -> float:
        return self.final.effective_tax


class RunInterrupted(Exception):
    """A run stopped early because its stop event was set."""


class SweepPoint(NamedTuple):
    value: float
    mean: float
    median: float
    p10: float
    p90: float
    converged_frac: float
    n_seeds: int


@dataclass
class SweepSummary:
    param: str
    points: list[SweepPoint]
    # (value, seed) -> final effective tax
    cells: dict[tuple[float, int], float] = field(default_factory=dict)
    # (value, seed) -> final greedy taxes (p1, p2)
    final_taxes: dict[tuple[float, int], tuple[float, ...]] = field(default_factory=dict)
    interrupted: bool = False
    discarded: int = 0


class CollusiveOptimum(NamedTuple):
    p1: float
    p2: float
    joint_profit: float
    effective_tax: float


def effective_tax_rate(p1: float, p2: float, e: EffortPair) -> float:
    """Tax of the project receiving effort; ``min(p1, p2)`` when there is none."""
    e1, e2 = e
    if e1 > 0 and e2 == 0:
        return p1
    if e2 > 0 and e1 == 0:
        return p2
    if e1 == 0 and e2 == 0:
        return min(p1, p2)
    return p1 if e1 >= e2 else p2


def convergence_check(snapshots: Sequence[Snapshot], window: int) -> bool:
    """True when every learner's greedy action is constant over the trailing ``window`` iterations."""
    if not snapshots:
        return False
    last = snapshots[-1].t
    if window > last:
        log.warning("convergence window %d exceeds run history of %d iterations", window, last)
        return False
    trailing = [s.greedy_actions for s in snapshots if s.t >= last - window]
    return all(actions == trailing[-1] for actions in trailing)


def _snapshot_ts(t_max: int, every: int) -> list[int]:
    ts = list(range(every, t_max + 1, every))
    if not ts or ts[-1] != t_max:
        ts.append(t_max)
    return ts


def _schedule_code(config: RunConfig) -> tuple[int, float]:
    sched = config.exploration
    if isinstance(sched, Fixed):
        return _kernels.FIXED, sched.epsilon
    return _kernels.EXP_DECAY, sched.k


def _check_env(config: RunConfig, env: str, engine: str) -> None:
    if config.env != env:
        raise ConfigError(f"expected a {env!r} config, got env={config.env!r}", key="env")
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}, got {engine!r}")


def _single_snapshot(config: RunConfig, t: int, q: QTable) -> Snapshot:
    params = config.single_params()
    a = greedy_action(q.row(0))
    p = float(params.tax_grid[a])
    pi, agent = single_step_profits(p, params)
    e = float(agent_best_effort(p, params))
    return Snapshot(
        t=t,
        epsilon=epsilon_at(config.exploration, t),
        greedy_actions=(a,),
        taxes=(p,),
        efforts=(e,),
        greedy_profits=(float(pi),),
        agent_profit=float(agent),
        effective_tax=p,
    )


def run_single(config: RunConfig, engine: str = "compiled") -> RunResult:
    """Single principal learning a tax rate against a best-responding agent.

    ``engine="python"`` steps through :func:`select_action` and :func:`update`
    directly; it consumes the generator identically and is used to cross-check
    the compiled loop.
    """
    _check_env(config, "single", engine)
    params = config.single_params()
    learning = config.learning_params()
    rng = make_rng(config.seed)
    q = init_qtable(1, params.d_p, rng)
    rewards, _ = single_step_profits(params.tax_grid, params)
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)

    best = np.array([greedy_action(q.row(0))], dtype=np.int64)
    explored = np.zeros(1, dtype=np.int64)
    kind, rate = _schedule_code(config)
    snapshots = []
    t = 0
    for t_snap in _snapshot_ts(config.t_max, config.snapshot_every):
        if engine == "compiled":
            _kernels.single_steps(
                q.values[0], rewards, rng, t, t_snap, learning.alpha, learning.delta, kind, rate, best, explored
            )
        else:
            for step in range(t, t_snap):
                eps = epsilon_at(config.exploration, step)
                a = select_action(q.row(0), eps, rng)
                update(q, 0, a, float(rewards[a]), 0, learning)
        t = t_snap
        snapshots.append(_single_snapshot(config, t, q))
    if engine == "python":
        explored[:] = -1  # not tracked
    return RunResult(
        config=config,
        snapshots=snapshots,
        qtables=[q],
        converged=convergence_check(snapshots, config.convergence_window),
        explore_counts=tuple(int(x) for x in explored),
    )


def _dual_snapshot(config: RunConfig, t: int, q1: QTable, q2: QTable, table: AgentDecisionTable) -> Snapshot:
    params = table.params
    i, j = greedy_action(q1.row(0)), greedy_action(q2.row(0))
    p1, p2 = float(params.tax_grid[i]), float(params.tax_grid[j])
    e = table.effort(i, j)
    pi1, pi2 = principal_profits(p1, p2, e, params)
    return Snapshot(
        t=t,
        epsilon=epsilon_at(config.exploration, t),
        greedy_actions=(i, j),
        taxes=(p1, p2),
        efforts=(e.e1, e.e2),
        greedy_profits=(float(pi1), float(pi2)),
        agent_profit=float(table.profit[i, j]),
        effective_tax=effective_tax_rate(p1, p2, e),
    )


def agent_table_for(config: RunConfig) -> AgentDecisionTable:
    return build_agent_table(config.dual_params())


def run_dual(
    config: RunConfig,
    table: AgentDecisionTable | None = None,
    engine: str = "compiled",
    stop: threading.Event | None = None,
) -> RunResult:
    """Two independent learners setting taxes against a best-responding agent.

    Per iteration: principal 1's coin (and draw when exploring), then
    principal 2's; the agent's response is read from ``table``; each learner
    updates on its blended reward. ``stop`` is polled between snapshot chunks;
    once set the run raises :class:`RunInterrupted`.
    """
    _check_env(config, "dual", engine)
    params = config.dual_params()
    if table is None:
        table = build_agent_table(params)
    elif table.params.table_key() != params.table_key():
        raise ConfigError("agent table was built for different environment parameters")
    learning = config.learning_params()
    rng = make_rng(config.seed)
    q1 = init_qtable(1, params.d_p, rng)
    q2 = init_qtable(1, params.d_p, rng)
    R1, R2 = reward_matrices(table, config.beta, config.blend_form)
    R1 = np.ascontiguousarray(R1)
    R2 = np.ascontiguousarray(R2)

    best = np.array([greedy_action(q1.row(0)), greedy_action(q2.row(0))], dtype=np.int64)
    explored = np.zeros(2, dtype=np.int64)
    kind, rate = _schedule_code(config)
    snapshots = []
    t = 0
    for t_snap in _snapshot_ts(config.t_max, config.snapshot_every):
        if stop is not None and stop.is_set():
            raise RunInterrupted(f"stopped at t={t}")
        if engine == "compiled":
            _kernels.dual_steps(
                q1.values[0], q2.values[0], R1, R2, rng, t, t_snap,
                learning.alpha, learning.delta, kind, rate, best, explored,
            )
        else:
            _python_dual_steps(config, table, q1, q2, rng, t, t_snap)
        t = t_snap
        snapshots.append(_dual_snapshot(config, t, q1, q2, table))
    if engine == "python":
        explored[:] = -1
    return RunResult(
        config=config,
        snapshots=snapshots,
        qtables=[q1, q2],
        converged=convergence_check(snapshots, config.convergence_window),
        explore_counts=tuple(int(x) for x in explored),
    )


def _python_dual_steps(config, table, q1, q2, rng, t0, t1) -> None:
    params = replace(table.params, beta=config.beta)
    learning = config.learning_params()
    taxes = params.tax_grid
    for t in range(t0, t1):
        eps = epsilon_at(config.exploration, t)
        i = select_action(q1.row(0), eps, rng)
        j = select_action(q2.row(0), eps, rng)
        e = EffortPair(table.e1[i, j], table.e2[i, j])
        if config.blend_form == "algorithm2":
            pi1, pi2 = principal_profits(taxes[i], taxes[j], e, params)
            r1, r2 = blended_rewards(pi1, pi2, config.beta)
        else:
            r1, r2 = scaled_blended_rewards(taxes[i], taxes[j], e, params)
        update(q1, 0, i, float(r1), 0, learning)
        update(q2, 0, j, float(r2), 0, learning)


def run(config: RunConfig, table: AgentDecisionTable | None = None) -> RunResult:
    if config.env == "single":
        return run_single(config)
    return run_dual(config, table)


def collusive_optimum_oracle(
    params: DualContractParams, table: AgentDecisionTable | None = None
) -> CollusiveOptimum:
    """Exhaustive scan for the tax pair maximising joint raw principal profit.

    Ties resolve to the first pair in row-major ``(p1, p2)`` order.
    """
    if table is None:
        table = build_agent_table(params)
    taxes = params.tax_grid
    P1, P2 = np.meshgrid(taxes, taxes, indexing="ij")
    pi1, pi2 = principal_profits(P1, P2, EffortPair(table.e1, table.e2), params)
    joint = pi1 + pi2
    i, j = np.unravel_index(int(np.argmax(joint)), joint.shape)
    p1, p2 = float(taxes[i]), float(taxes[j])
    return CollusiveOptimum(p1, p2, float(joint[i, j]), effective_tax_rate(p1, p2, table.effort(i, j)))


def _apply_param(template: RunConfig, param: str, value: float) -> RunConfig:
    return template.with_values(**{param: value})


def sweep(
    template: RunConfig,
    param: str,
    grid: Iterable[float],
    seeds: Iterable[int],
    parallelism: int = 1,
    stop: threading.Event | None = None,
) -> SweepSummary:
    """Run every ``(value, seed)`` cell of a dual-environment sweep and aggregate the final effective tax.

    Cells are independent (own generator, shared read-only agent tables), so
    the summary does not depend on ``parallelism``. Setting ``stop``, or a
    KeyboardInterrupt in the calling thread, lets running cells stop at their
    next snapshot boundary; unfinished cells are discarded and the summary is
    marked ``interrupted``.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {param!r}", key="param")
    grid = sorted(set(float(v) for v in grid))
    seeds = list(dict.fromkeys(seeds))
    if not grid or not seeds:
        raise ConfigError("sweep needs a nonempty grid and at least one seed")
    if parallelism < 1:
        raise ConfigError(f"parallelism must be at least 1, got {parallelism}", key="jobs")
    stop = stop if stop is not None else threading.Event()

    cells: list[tuple[float, int, RunConfig]] = []
    for value in grid:
        for seed in seeds:
            try:
                config = _apply_param(template, param, value).with_values(seed=seed)
            except ValueError as exc:
                key = getattr(exc, "key", None) or param
                raise InvariantError(f"sweep cell {param}={value}, seed={seed}: {exc}", key=key) from None
            if config.env != "dual":
                raise ConfigError("sweeps run the dual environment", key="env")
            cells.append((value, seed, config))

    tables: dict[tuple, AgentDecisionTable] = {}
    for _, _, config in cells:
        key = config.dual_params().table_key()
        if key not in tables:
            tables[key] = agent_table_for(config)

    def _one(cell):
        value, seed, config = cell
        if stop.is_set():
            return None
        try:
            result = run_dual(config, tables[config.dual_params().table_key()], stop=stop)
        except RunInterrupted:
            return None
        except Exception as exc:
            raise RuntimeError(f"sweep cell {param}={value}, seed={seed} failed: {exc}") from exc
        return result.effective_tax_final, result.converged, result.final_taxes

    outcomes: list[tuple | None] = [None] * len(cells)
    interrupted = False
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(_one, cell) for cell in cells]
        try:
            done, _ = wait(futures, return_when=FIRST_EXCEPTION)
            for future in done:
                future.result()  # re-raise a failing cell
        except KeyboardInterrupt:
            interrupted = True
        except BaseException:
            stop.set()
            raise
        finally:
            if interrupted or stop.is_set():
                stop.set()
                for future in futures:
                    future.cancel()
        for index, future in enumerate(futures):
            if not future.cancelled():
                outcomes[index] = future.result()
    interrupted = interrupted or any(o is None for o in outcomes)

    summary = SweepSummary(param=param, points=[], interrupted=interrupted)
    for value in grid:
        taxes = []
        converged = []
        for (v, seed, _), outcome in zip(cells, outcomes):
            if v != value:
                continue
            if outcome is None:
                summary.discarded += 1
                continue
            tax, conv, finals = outcome
            taxes.append(tax)
            converged.append(conv)
            summary.cells[(v, seed)] = tax
            summary.final_taxes[(v, seed)] = finals
        if not taxes:
            continue
        arr = np.asarray(taxes)
        summary.points.append(
            SweepPoint(
                value=value,
                mean=float(arr.mean()),
                median=float(np.median(arr)),
                p10=float(np.percentile(arr, 10)),
                p90=float(np.percentile(arr, 90)),
                converged_frac=float(np.mean(converged)),
                n_seeds=len(taxes),
            )
        )
    if summary.interrupted:
        log.warning("sweep interrupted: discarded %d incomplete cell(s)", summary.discarded)
    return summary

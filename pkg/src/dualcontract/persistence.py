"""On-disk formats: JSON config, JSON-lines trajectories, CSV tables.

Byte-level layouts are documented in FORMATS.md. Every writer is
deterministic, and none emits NaN or infinity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .config import ConfigParseError, RunConfig
from .contract_dual import AgentDecisionTable, export_rows
from .experiments import RunResult, SweepSummary
from .qcore import QTable

SWEEP_HEADER = ("param", "value", "mean_eff_tax", "median_eff_tax", "p10", "p90", "converged_frac", "n_seeds")
QTABLE_HEADER = ("action_index", "tax_rate", "q_value")
AGENT_TABLE_HEADER = ("p1", "p2", "e1", "e2", "agent_profit")


class PersistenceIOError(OSError):
    """Reading or writing ``path`` failed."""

    def __init__(self, path: Path | str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = Path(path)


class NonFiniteValueError(ValueError):
    """A writer was handed NaN or infinity."""


def _write_text(path: Path | str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise PersistenceIOError(path, exc.strerror or str(exc)) from exc


def _read_text(path: Path | str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise PersistenceIOError(path, exc.strerror or str(exc)) from exc


def _finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise NonFiniteValueError(f"refusing to write non-finite {what}: {value}")
    return value


def _fixed6(value: float, what: str) -> str:
    text = f"{_finite(value, what):.6f}"
    return "0.000000" if text == "-0.000000" else text


# --- config -----------------------------------------------------------------


def read_config_document(path: Path | str) -> dict[str, Any]:
    """Parse a config file into a raw mapping without applying defaults."""
    text = _read_text(path)
    if not text.strip():
        raise ConfigParseError(f"{path}: config file is empty")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigParseError(f"{path}: config must be a JSON object, got {type(doc).__name__}")
    return doc


def load_config(path: Path | str) -> RunConfig:
    return RunConfig.from_mapping(read_config_document(path))


def config_to_json(config: RunConfig) -> str:
    return json.dumps(config.to_document(), indent=2, allow_nan=False) + "\n"


def write_config(config: RunConfig, path: Path | str) -> None:
    _write_text(path, config_to_json(config))


# --- trajectories -----------------------------------------------------------


def _trajectory_record(result: RunResult, index: int) -> dict[str, Any]:
    snap = result.snapshots[index]
    if len(snap.taxes) == 1:
        record = {
            "t": snap.t,
            "epsilon": snap.epsilon,
            "p1": snap.taxes[0],
            "e1": snap.efforts[0],
            "pi1": snap.greedy_profits[0],
        }
    else:
        record = {
            "t": snap.t,
            "epsilon": snap.epsilon,
            "p1": snap.taxes[0],
            "p2": snap.taxes[1],
            "e1": snap.efforts[0],
            "e2": snap.efforts[1],
            "pi1": snap.greedy_profits[0],
            "pi2": snap.greedy_profits[1],
        }
    record["agent_profit"] = snap.agent_profit
    record["effective_tax"] = snap.effective_tax
    for key, value in record.items():
        if key != "t":
            record[key] = _finite(value, f"{key} at t={snap.t}")
    if index == len(result.snapshots) - 1:
        record["final"] = True
    return record


def trajectory_lines(result: RunResult) -> Iterable[str]:
    last_t = -1
    for index, snap in enumerate(result.snapshots):
        if snap.t <= last_t:
            raise ValueError(f"snapshot times must strictly increase, got {snap.t} after {last_t}")
        last_t = snap.t
        yield json.dumps(_trajectory_record(result, index), allow_nan=False)


def write_trajectory(result: RunResult, path: Path | str) -> None:
    _write_text(path, "".join(line + "\n" for line in trajectory_lines(result)))


def read_trajectory(path: Path | str) -> list[dict[str, Any]]:
    return [json.loads(line) for line in _read_text(path).splitlines() if line.strip()]


# --- CSV tables -------------------------------------------------------------


def _csv_text(header: Iterable[str], rows: Iterable[Iterable[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def sweep_csv(summary: SweepSummary) -> str:
    points = sorted(summary.points, key=lambda p: p.value)
    rows = (
        (
            summary.param,
            _fixed6(p.value, "value"),
            _fixed6(p.mean, "mean_eff_tax"),
            _fixed6(p.median, "median_eff_tax"),
            _fixed6(p.p10, "p10"),
            _fixed6(p.p90, "p90"),
            _fixed6(p.converged_frac, "converged_frac"),
            str(p.n_seeds),
        )
        for p in points
    )
    return _csv_text(SWEEP_HEADER, rows)


def write_sweep_csv(summary: SweepSummary, path: Path | str) -> None:
    _write_text(path, sweep_csv(summary))


def qtable_csv(q: QTable, state: int = 0) -> str:
    """One row per action; ``q_value`` is written with full round-trip precision."""
    row = q.row(state)
    n = row.size
    if n < 2:
        raise ValueError("a Q-table dump needs at least two actions")
    rows = (
        (str(a), repr(a / (n - 1)), repr(_finite(row[a], f"q_value at action {a}")))
        for a in range(n)
    )
    return _csv_text(QTABLE_HEADER, rows)


def dump_qtable(q: QTable, path: Path | str) -> None:
    _write_text(path, qtable_csv(q))


def read_qtable(path: Path | str) -> np.ndarray:
    """Return the ``q_value`` column of a Q-table dump."""
    reader = csv.DictReader(io.StringIO(_read_text(path)))
    return np.array([float(r["q_value"]) for r in reader])


def agent_table_csv(table: AgentDecisionTable) -> str:
    rows = (
        tuple(_fixed6(v, name) for v, name in zip(cells, AGENT_TABLE_HEADER))
        for cells in export_rows(table)
    )
    return _csv_text(AGENT_TABLE_HEADER, rows)


def write_agent_table(table: AgentDecisionTable, path: Path | str) -> None:
    _write_text(path, agent_table_csv(table))


def read_csv_rows(path: Path | str) -> list[Mapping[str, str]]:
    return list(csv.DictReader(io.StringIO(_read_text(path))))

"""Command-line frontend.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 infeasible
contract problem, 130 interrupted sweep. Values resolve as command line over
``--config`` file over built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import threading
from pathlib import Path
from typing import Any, Sequence

from .config import ConfigError, RunConfig, defaults
from .contract_dual import (
    BLEND_FORMS,
    agent_best_effort_closed_form,
    build_agent_table,
)
from .contract_single import (
    InfeasibleContractError,
    InnesParams,
    innes_optimal_contract_search,
)
from .experiments import SWEEP_PARAMS, collusive_optimum_oracle, run_dual, run_single, sweep
from .persistence import (
    NonFiniteValueError,
    PersistenceIOError,
    dump_qtable,
    read_config_document,
    write_agent_table,
    write_config,
    write_sweep_csv,
    write_trajectory,
)

log = logging.getLogger("dualcontract")

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_INTERRUPTED = 130

DEFAULT_OUT = "out"

# Config keys settable by a plain flag: key -> (flags, type, help)
_KEY_FLAGS: dict[str, tuple[tuple[str, ...], type, str]] = {
    "I1": (("--I1",), float, "investment of principal 1"),
    "I2": (("--I2",), float, "investment of principal 2"),
    "T1": (("--T1",), float, "success payoff of project 1"),
    "T2": (("--T2",), float, "success payoff of project 2"),
    "c": (("--c",), float, "effort cost coefficient"),
    "kappa": (("--kappa",), float, "cost heterogeneity in [0, 1)"),
    "beta": (("--beta",), float, "identity of interests in [0, 0.5]"),
    "d_p": (("--grid", "--d-p"), int, "number of tax grid points"),
    "d_e": (("--d-e",), int, "number of effort grid points"),
    "alpha": (("--alpha",), float, "learning rate"),
    "delta": (("--delta",), float, "discount factor"),
    "t_max": (("--iters",), int, "learning iterations"),
    "snapshot_every": (("--snapshot-every",), int, "iterations between snapshots"),
    "convergence_window": (("--convergence-window",), int, "iterations of unchanged greedy actions counted as converged"),
    "seed": (("--seed",), int, "generator seed"),
    "blend_form": (("--blend-form",), str, "reward blend"),
}

_SINGLE_KEYS = ("I1", "T1", "c", "d_p", "alpha", "delta", "t_max", "snapshot_every", "convergence_window", "seed")
_DUAL_KEYS = (
    "I1", "I2", "T1", "T2", "c", "kappa", "beta", "d_p", "d_e", "alpha", "delta",
    "t_max", "snapshot_every", "convergence_window", "seed", "blend_form",
)
_TABLE_KEYS = ("I1", "I2", "T1", "T2", "c", "kappa", "d_p", "d_e")


def _default_text(value: Any) -> str:
    return f"(default: {value})"


def _add_key_flags(parser: argparse.ArgumentParser, env: str, keys: Sequence[str]) -> None:
    base = defaults(env)
    for key in keys:
        flags, kind, text = _KEY_FLAGS[key]
        if env == "single" and key in ("I1", "T1"):
            flags = ("--" + key[0],)
        extra = {"choices": BLEND_FORMS} if key == "blend_form" else {}
        parser.add_argument(
            *flags, dest=key, type=kind, default=None, metavar=key.upper() if kind is not str else None,
            help=f"{text} {_default_text(base[key])}", **extra,
        )


def _add_common(parser: argparse.ArgumentParser, out: bool = True) -> None:
    parser.add_argument("--config", default=None, help="JSON config file (default: none)")
    if out:
        parser.add_argument("--out", default=DEFAULT_OUT, help=f"output directory {_default_text(DEFAULT_OUT)}")


def _flag_for(parser: argparse.ArgumentParser, key: str | None) -> str | None:
    if key is None:
        return None
    if key in ("epsilon", "k"):
        return f"--{key}"
    if key == "exploration":
        return "--epsilon/--k"
    for action in parser._actions:
        if action.dest == key and action.option_strings:
            return action.option_strings[0]
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualcontract",
        description="Q-learning principals setting tax rates against a best-responding agent.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("single", help="one principal learning a tax rate")
    _add_common(p)
    _add_key_flags(p, "single", _SINGLE_KEYS)
    p.add_argument("--epsilon", type=float, default=None,
                   help=f"fixed exploration rate {_default_text(defaults('single')['exploration']['fixed'])}")
    p.set_defaults(handler=cmd_single, env="single")

    p = sub.add_parser("dual", help="two competing principals")
    _add_common(p)
    _add_key_flags(p, "dual", _DUAL_KEYS)
    p.add_argument("--k", type=float, default=None,
                   help=f"exploration decay rate {_default_text(defaults('dual')['exploration']['exp_decay'])}")
    p.add_argument("--dump-agent-table", action="store_true", help="also write agent_table.csv (default: off)")
    p.set_defaults(handler=cmd_dual, env="dual")

    p = sub.add_parser("sweep", help="dual runs over a parameter grid and several seeds")
    _add_common(p)
    _add_key_flags(p, "dual", tuple(k for k in _DUAL_KEYS if k not in ("seed", "d_p")))
    p.add_argument("--d-p", dest="d_p", type=int, default=None, metavar="D_P",
                   help=f"number of tax grid points {_default_text(defaults('dual')['d_p'])}")
    p.add_argument("--k", type=float, default=None,
                   help=f"exploration decay rate {_default_text(defaults('dual')['exploration']['exp_decay'])}")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS, help="parameter to sweep (required)")
    p.add_argument("--grid", dest="sweep_grid", required=True, metavar="A,B,...",
                   help="comma-separated values of the swept parameter (required)")
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seeds", type=int, default=None, help="use seeds 1..N (default: 20)")
    seeds.add_argument("--seed-list", default=None, metavar="S1,S2,...", help="explicit comma-separated seeds (default: none)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (default: 1)")
    p.set_defaults(handler=cmd_sweep, env="dual")

    p = sub.add_parser("agent-table", help="write the agent's best response for every tax pair")
    _add_common(p)
    _add_key_flags(p, "dual", _TABLE_KEYS)
    p.set_defaults(handler=cmd_agent_table, env="dual")

    p = sub.add_parser("innes-check", help="brute-force the limited-liability debt contract")
    p.add_argument("--xh", type=float, default=2.0, help="high outcome X_H (default: 2.0)")
    p.add_argument("--xl", type=float, default=1.0, help="low outcome X_L (default: 1.0)")
    p.add_argument("--i", type=float, default=1.1, help="investment I (default: 1.1)")
    p.add_argument("--c", type=float, default=2.0, help="effort cost coefficient (default: 2.0)")
    p.add_argument("--step", type=float, default=0.001, help="contract grid step (default: 0.001)")
    p.add_argument("--tol", type=float, default=0.0, help="break-even tolerance (default: 0.0)")
    p.set_defaults(handler=cmd_innes_check)

    p = sub.add_parser("oracle", help="collusive optimum and best-response cross-check")
    _add_common(p, out=False)
    _add_key_flags(p, "dual", _TABLE_KEYS)
    p.add_argument("--p1", type=float, default=None, help="tax of principal 1 for the best-response check (default: none)")
    p.add_argument("--p2", type=float, default=None, help="tax of principal 2 for the best-response check (default: none)")
    p.set_defaults(handler=cmd_oracle, env="dual")
    return parser


def build_config(args: argparse.Namespace, env: str) -> RunConfig:
    """Merge defaults, the ``--config`` document and explicit flags (in rising priority)."""
    doc: dict[str, Any] = {}
    if getattr(args, "config", None):
        doc = read_config_document(args.config)
        if doc.get("env", env) != env:
            raise ConfigError(f"config file is for env {doc['env']!r}, command needs {env!r}", key="env")
    doc["env"] = env
    for key in _KEY_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    if getattr(args, "epsilon", None) is not None:
        doc["exploration"] = {"fixed": args.epsilon}
    if getattr(args, "k", None) is not None:
        doc["exploration"] = {"exp_decay": args.k}
    return RunConfig.from_mapping(doc)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PersistenceIOError(out, exc.strerror or str(exc)) from exc
    return out


def _tax_text(p: float, d_p: int) -> str:
    decimals = max(2, math.ceil(math.log10(d_p - 1)))
    return f"{p:.{decimals}f}"


def cmd_single(args: argparse.Namespace) -> int:
    config = build_config(args, "single")
    out = _out_dir(args)
    result = run_single(config)
    write_config(config, out / "config.json")
    write_trajectory(result, out / "trajectory.jsonl")
    dump_qtable(result.qtables[0], out / "qtable.csv")
    final = result.final
    print(
        f"final_tax={_tax_text(final.taxes[0], config.d_p)} "
        f"principal_profit={final.greedy_profits[0]:.6f} "
        f"agent_profit={final.agent_profit:.6f} converged={str(result.converged).lower()}"
    )
    return EXIT_OK


def cmd_dual(args: argparse.Namespace) -> int:
    config = build_config(args, "dual")
    out = _out_dir(args)
    table = build_agent_table(config.dual_params())
    result = run_dual(config, table)
    write_config(config, out / "config.json")
    write_trajectory(result, out / "trajectory.jsonl")
    dump_qtable(result.qtables[0], out / "qtable_1.csv")
    dump_qtable(result.qtables[1], out / "qtable_2.csv")
    if args.dump_agent_table:
        write_agent_table(table, out / "agent_table.csv")
    final = result.final
    tax = lambda p: _tax_text(p, config.d_p)  # noqa: E731
    print(
        f"final_p1={tax(final.taxes[0])} final_p2={tax(final.taxes[1])} "
        f"effective_tax={tax(final.effective_tax)} "
        f"pi1={final.greedy_profits[0]:.6f} pi2={final.greedy_profits[1]:.6f} "
        f"converged={str(result.converged).lower()}"
    )
    return EXIT_OK


def _parse_list(text: str, kind: type, flag: str) -> list:
    try:
        values = [kind(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated {kind.__name__} values, got {text!r}", key=flag) from None
    if not values:
        raise ConfigError(f"{flag} needs at least one value", key=flag)
    return values


def cmd_sweep(args: argparse.Namespace) -> int:
    template = build_config(args, "dual")
    grid = _parse_list(args.sweep_grid, float, "--grid")
    if args.seed_list is not None:
        seeds = _parse_list(args.seed_list, int, "--seed-list")
    else:
        n = 20 if args.seeds is None else args.seeds
        if n < 1:
            raise ConfigError(f"--seeds must be at least 1, got {n}", key="--seeds")
        seeds = list(range(1, n + 1))
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {args.jobs}", key="--jobs")
    out = _out_dir(args)

    stop = threading.Event()
    summary = sweep(template, args.param, grid, seeds, parallelism=args.jobs, stop=stop)
    write_config(template, out / "config.json")
    write_sweep_csv(summary, out / "sweep.csv")
    for point in summary.points:
        print(
            f"{summary.param}={point.value:g} mean_eff_tax={point.mean:.6f} median={point.median:.6f} "
            f"p10={point.p10:.6f} p90={point.p90:.6f} converged_frac={point.converged_frac:.2f} "
            f"n_seeds={point.n_seeds}"
        )
    if summary.interrupted:
        print(f"warning: interrupted, {summary.discarded} incomplete cell(s) discarded", file=sys.stderr)
        return EXIT_INTERRUPTED
    return EXIT_OK


def cmd_agent_table(args: argparse.Namespace) -> int:
    config = build_config(args, "dual")
    out = _out_dir(args)
    table = build_agent_table(config.dual_params())
    path = out / "agent_table.csv"
    write_agent_table(table, path)
    print(f"rows={config.d_p * config.d_p} path={path}")
    return EXIT_OK


def cmd_innes_check(args: argparse.Namespace) -> int:
    try:
        params = InnesParams(X_H=args.xh, X_L=args.xl, I=args.i, c=args.c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not args.step > 0:
        raise ConfigError(f"step must be positive, got {args.step}", key="--step")
    if args.tol < 0:
        raise ConfigError(f"tol must be non-negative, got {args.tol}", key="--tol")
    contract = innes_optimal_contract_search(params, grid_step=args.step, tol=args.tol)
    verdict = "PASS" if contract.D_L == params.X_L else "FAIL"
    print(
        f"D_L*={contract.D_L:.6f} D_H*={contract.D_H:.6f} agent_value={contract.agent_value:.6f} "
        f"D_L*=X_L: {verdict}"
    )
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    config = build_config(args, "dual")
    params = config.dual_params()
    table = build_agent_table(params)
    opt = collusive_optimum_oracle(params, table)
    tax = lambda p: _tax_text(p, params.d_p)  # noqa: E731
    print(
        f"collusive_optimum p1={tax(opt.p1)} p2={tax(opt.p2)} "
        f"joint_profit={opt.joint_profit:.6f} effective_tax={tax(opt.effective_tax)}"
    )
    if params.kappa > 0:
        above = opt.effective_tax > 0.5
        print(
            f"note: kappa={params.kappa:g} collusive effective tax {tax(opt.effective_tax)} vs 0.50 "
            f"without heterogeneity; a collusive tax above 0.50 is "
            f"{'reproduced' if above else 'not reproduced'} by the grid optimum"
        )
    if (args.p1 is None) != (args.p2 is None):
        raise ConfigError("--p1 and --p2 must be given together", key="--p1")
    if args.p1 is not None:
        n = params.d_p - 1
        idx = []
        for flag, p in (("--p1", args.p1), ("--p2", args.p2)):
            i = round(p * n)
            if not 0.0 <= p <= 1.0 or abs(i - p * n) > 1e-9:
                raise ConfigError(f"{flag} must be a tax grid point k/{n}, got {p}", key=flag)
            idx.append(i)
        cf = agent_best_effort_closed_form(args.p1, args.p2, params)
        tb = table.effort(*idx)
        print(
            f"best_response p1={tax(args.p1)} p2={tax(args.p2)} "
            f"closed_form=({cf.e1:.6f}, {cf.e2:.6f}) table=({tb.e1:.6f}, {tb.e2:.6f}) "
            f"table_profit={table.profit[idx[0], idx[1]]:.6f}"
        )
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        flag = exc.key if exc.key and exc.key.startswith("--") else _flag_for(sub, exc.key)
        where = f" ({flag})" if flag else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleContractError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, NonFiniteValueError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())

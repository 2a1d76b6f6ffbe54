"""Tabular Q-learning principals competing to finance a single agent."""

from .config import ConfigError, RunConfig, default_config
from .contract_dual import DualContractParams, build_agent_table
from .contract_single import InfeasibleContractError, InnesParams, SingleContractParams
from .experiments import run_dual, run_single, sweep

__all__ = [
    "ConfigError",
    "DualContractParams",
    "InfeasibleContractError",
    "InnesParams",
    "RunConfig",
    "SingleContractParams",
    "build_agent_table",
    "default_config",
    "run_dual",
    "run_single",
    "sweep",
]
__version__ = "0.1.0"

"""Run configuration: one flat record mirroring the JSON config document."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping

from .contract_dual import BLEND_FORMS, DualContractParams
from .contract_single import SingleContractParams
from .qcore import ExpDecay, ExplorationSchedule, Fixed, LearningParams


class ConfigError(ValueError):
    """Invalid run configuration. ``key`` names the offending field when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class ConfigParseError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    pass


class InvariantError(ConfigError):
    pass


ENVS = ("single", "dual")

_COMMON_DEFAULTS: dict[str, Any] = {
    "I1": 1.0,
    "I2": 1.0,
    "T1": 2.0,
    "T2": 2.0,
    "c": 2.0,
    "kappa": 0.0,
    "beta": 0.0,
    "d_p": 101,
    "d_e": 101,
    "alpha": 0.1,
    "delta": 0.0,
    "seed": 1,
    "convergence_window": 100_000,
    "blend_form": "algorithm2",
}

ENV_DEFAULTS: dict[str, dict[str, Any]] = {
    "single": {
        "exploration": {"fixed": 0.2},
        "t_max": 1_000_000,
        "snapshot_every": 1_000,
    },
    "dual": {
        "exploration": {"exp_decay": 5e-6},
        "t_max": 10_000_000,
        "snapshot_every": 10_000,
    },
}

DEFAULT_ENV = "dual"

_INT_KEYS = {"d_p", "d_e", "t_max", "snapshot_every", "seed", "convergence_window"}
_FLOAT_KEYS = {"I1", "I2", "T1", "T2", "c", "kappa", "beta", "alpha", "delta"}


def defaults(env: str = DEFAULT_ENV) -> dict[str, Any]:
    if env not in ENVS:
        raise InvariantError(f"env must be one of {ENVS}, got {env!r}", key="env")
    return {"env": env, **_COMMON_DEFAULTS, **ENV_DEFAULTS[env]}


def _schedule_from_doc(doc: Any) -> ExplorationSchedule:
    if not isinstance(doc, Mapping) or len(doc) != 1:
        raise InvariantError(
            'exploration must be {"fixed": epsilon} or {"exp_decay": k}', key="exploration"
        )
    (kind, value), = doc.items()
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvariantError(f"exploration {kind} must be a number, got {value!r}", key="exploration")
    try:
        if kind == "fixed":
            return Fixed(float(value))
        if kind == "exp_decay":
            return ExpDecay(float(value))
    except ValueError as exc:
        raise InvariantError(str(exc), key="epsilon" if kind == "fixed" else "k") from None
    raise InvariantError(f"unknown exploration kind {kind!r}", key="exploration")


def schedule_to_doc(schedule: ExplorationSchedule) -> dict[str, float]:
    if isinstance(schedule, Fixed):
        return {"fixed": schedule.epsilon}
    return {"exp_decay": schedule.k}


@dataclass(frozen=True)
class RunConfig:
    env: str
    I1: float
    I2: float
    T1: float
    T2: float
    c: float
    kappa: float
    beta: float
    d_p: int
    d_e: int
    alpha: float
    delta: float
    exploration: ExplorationSchedule
    t_max: int
    snapshot_every: int
    seed: int
    convergence_window: int
    blend_form: str

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        if self.env not in ENVS:
            raise InvariantError(f"env must be one of {ENVS}, got {self.env!r}", key="env")
        for key in _FLOAT_KEYS:
            value = getattr(self, key)
            if not math.isfinite(value):
                raise InvariantError(f"{key} must be finite, got {value}", key=key)
        if self.t_max < 1:
            raise InvariantError(f"t_max must be at least 1, got {self.t_max}", key="t_max")
        if not 1 <= self.snapshot_every <= self.t_max:
            raise InvariantError(
                f"snapshot_every must be in [1, t_max={self.t_max}], got {self.snapshot_every}",
                key="snapshot_every",
            )
        if not 1 <= self.convergence_window <= self.t_max:
            raise InvariantError(
                f"convergence_window must be in [1, t_max={self.t_max}], got {self.convergence_window}",
                key="convergence_window",
            )
        if not 0 <= self.seed < 2**64:
            raise InvariantError(f"seed must be a 64-bit unsigned integer, got {self.seed}", key="seed")
        if self.blend_form not in BLEND_FORMS:
            raise InvariantError(
                f"blend_form must be one of {BLEND_FORMS}, got {self.blend_form!r}", key="blend_form"
            )
        if not isinstance(self.exploration, (Fixed, ExpDecay)):
            raise InvariantError("exploration must be a Fixed or ExpDecay schedule", key="exploration")
        # Parameter objects carry the economic invariants; re-raise with the key.
        for build in (self.learning_params, self.dual_params, self.single_params):
            try:
                build()
            except ValueError as exc:
                key = str(exc).split(" ", 1)[0]
                key = {"I": "I1", "T": "T1"}.get(key, key)
                raise InvariantError(str(exc), key=key) from None

    def learning_params(self) -> LearningParams:
        return LearningParams(alpha=self.alpha, delta=self.delta)

    def single_params(self) -> SingleContractParams:
        return SingleContractParams(I=self.I1, T=self.T1, c=self.c, d_p=self.d_p)

    def dual_params(self) -> DualContractParams:
        return DualContractParams(
            I1=self.I1, I2=self.I2, T1=self.T1, T2=self.T2, c=self.c,
            kappa=self.kappa, beta=self.beta, d_p=self.d_p, d_e=self.d_e,
        )

    def to_document(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["exploration"] = schedule_to_doc(self.exploration)
        return doc

    def with_values(self, **changes: Any) -> "RunConfig":
        """Copy with ``changes`` applied; ``epsilon``/``k`` replace the schedule."""
        if "epsilon" in changes:
            changes["exploration"] = _schedule_from_doc({"fixed": changes.pop("epsilon")})
        if "k" in changes:
            changes["exploration"] = _schedule_from_doc({"exp_decay": changes.pop("k")})
        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any]) -> "RunConfig":
        """Build from a config document, filling missing keys from the env defaults.

        ``snapshot_every`` and ``convergence_window`` default to at most ``t_max``.
        """
        if not isinstance(doc, Mapping):
            raise ConfigParseError("config document must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise UnknownKeyError(f"unknown config key(s): {', '.join(unknown)}", key=unknown[0])
        env = doc.get("env", DEFAULT_ENV)
        merged = {**defaults(env), **doc}
        for key in ("snapshot_every", "convergence_window"):
            if key not in doc and isinstance(merged["t_max"], int):
                merged[key] = max(1, min(merged[key], merged["t_max"]))
        values: dict[str, Any] = {}
        for key, value in merged.items():
            if key == "exploration":
                values[key] = _schedule_from_doc(value)
            elif key in _INT_KEYS:
                if isinstance(value, bool) or not isinstance(value, int):
                    if isinstance(value, float) and value.is_integer():
                        value = int(value)
                    else:
                        raise InvariantError(f"{key} must be an integer, got {value!r}", key=key)
                values[key] = value
            elif key in _FLOAT_KEYS:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise InvariantError(f"{key} must be a number, got {value!r}", key=key)
                values[key] = float(value)
            else:
                if not isinstance(value, str):
                    raise InvariantError(f"{key} must be a string, got {value!r}", key=key)
                values[key] = value
        return cls(**values)


def default_config(env: str = DEFAULT_ENV, **overrides: Any) -> RunConfig:
    return RunConfig.from_mapping({"env": env, **overrides})

"""Config file parsing (INI-style key = value sections, or JSON) and echo.

Unknown keys are rejected by name; validation errors carry the offending
section and field.  The two formats describe the same structure:

    [experiment]                       {"experiment": {...},
    scheduler = dpc                     "users": [
    v = 100                               {"role": "deadline", ...},
    slots = 100000                        {"role": "throughput", ...}
    ...                                 ]}

    [user 1]
    role = deadline
    arrival_prob = 0.5
    deadline_m = 10
    gamma = 0.7
    good_prob = 0.4
"""

from __future__ import annotations

import configparser
import json
from dataclasses import replace
from pathlib import Path
from typing import Any, Mapping

from .engine import ExperimentConfig
from .model import PowerLevels, UserRole, UserSpec
from .presets import DEFAULT_HORIZON, DEFAULT_SEED, DEFAULT_TRACE_EVERY


class ConfigError(ValueError):
    """Malformed or invalid configuration input."""


_EXPERIMENT_KEYS = {
    "label": str,
    "scheduler": str,
    "v": float,
    "slots": int,
    "seed": int,
    "replications": int,
    "trace_every": int,
    "p_low": float,
    "p_high": float,
}

_USER_KEYS = {
    "role": str,
    "gamma": float,
    "good_prob": float,
    "arrival_prob": float,
    "deadline_m": int,
    "delta": float,
}

_EXPERIMENT_DEFAULTS: dict[str, Any] = {
    "slots": DEFAULT_HORIZON,
    "seed": DEFAULT_SEED,
    "replications": 1,
    "trace_every": DEFAULT_TRACE_EVERY,
}


def _convert(section: str, key: str, raw: Any, schema: Mapping[str, type]) -> Any:
    if key not in schema:
        raise ConfigError(f"unknown key {key!r} in [{section}]")
    kind = schema[key]
    if kind is str:
        return str(raw)
    try:
        if kind is int:
            # tolerate "1e5"-style integers from JSON/ini alike
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(
            f"[{section}] {key}: expected {kind.__name__}, got {raw!r}"
        ) from None


def _build_user(uid: int, section: str, entries: Mapping[str, Any]) -> UserSpec:
    values = {k: _convert(section, k, v, _USER_KEYS) for k, v in entries.items()}
    role_raw = values.pop("role", None)
    if role_raw is None:
        raise ConfigError(f"[{section}]: missing required key 'role'")
    try:
        role = UserRole(role_raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] role: expected 'deadline' or 'throughput', got {role_raw!r}"
        ) from None
    for required in ("gamma", "good_prob"):
        if required not in values:
            raise ConfigError(f"[{section}]: missing required key {required!r}")
    try:
        return UserSpec(id=uid, role=role, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def _build_config(
    experiment: Mapping[str, Any], users: list[UserSpec], default_label: str
) -> ExperimentConfig:
    values = dict(_EXPERIMENT_DEFAULTS)
    values.update(
        {k: _convert("experiment", k, v, _EXPERIMENT_KEYS) for k, v in experiment.items()}
    )
    for required in ("scheduler", "p_low", "p_high"):
        if required not in values:
            raise ConfigError(f"[experiment]: missing required key {required!r}")
    if not users:
        raise ConfigError("config defines no users")
    try:
        levels = PowerLevels(values["p_low"], values["p_high"])
    except ValueError as exc:
        raise ConfigError(f"[experiment]: {exc}") from None
    config = ExperimentConfig(
        specs=tuple(users),
        levels=levels,
        scheduler=values["scheduler"],
        horizon=values["slots"],
        seed=values["seed"],
        v=values.get("v"),
        trace_every=values["trace_every"],
        replications=values["replications"],
        label=values.get("label", default_label) or default_label,
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def _parse_ini(text: str, default_label: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    users: list[UserSpec] = []
    for section in parser.sections():
        if section == "experiment":
            continue
        parts = section.split()
        if len(parts) != 2 or parts[0] != "user" or not parts[1].isdigit():
            raise ConfigError(
                f"unexpected section [{section}]; user sections look like [user 1]"
            )
        users.append(_build_user(int(parts[1]), section, dict(parser[section])))
    users.sort(key=lambda u: u.id)
    return _build_config(dict(parser["experiment"]), users, default_label)


def _parse_json(text: str, default_label: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON config: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("JSON config must be an object")
    unknown = set(doc) - {"experiment", "users"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    experiment = doc.get("experiment", {})
    users_raw = doc.get("users", [])
    if not isinstance(experiment, dict) or not isinstance(users_raw, list):
        raise ConfigError("'experiment' must be an object and 'users' a list")
    users = []
    for pos, entry in enumerate(users_raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"users[{pos}] must be an object")
        entry = dict(entry)
        uid = entry.pop("id", pos + 1)
        if not isinstance(uid, int):
            raise ConfigError(f"users[{pos}] id: expected int, got {uid!r}")
        users.append(_build_user(uid, f"user {uid}", entry))
    users.sort(key=lambda u: u.id)
    return _build_config(experiment, users, default_label)


def parse_config(path: str | Path) -> list[ExperimentConfig]:
    """Parse a config file (.json, else INI) into validated configs."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    default_label = path.stem
    if path.suffix.lower() == ".json":
        return [_parse_json(text, default_label)]
    return [_parse_ini(text, default_label)]


def apply_overrides(
    configs: list[ExperimentConfig],
    *,
    scheduler: str | None = None,
    v: float | None = None,
    slots: int | None = None,
    seed: int | None = None,
    replications: int | None = None,
    trace_every: int | None = None,
    from_preset: bool = False,
) -> list[ExperimentConfig]:
    """Apply CLI flag overrides.

    With a preset, --scheduler filters the expansion (presets already pair
    schedulers for comparison); with a config file it replaces the scheduler.
    """
    out = []
    for config in configs:
        if scheduler is not None:
            if from_preset:
                if config.scheduler != scheduler:
                    continue
            else:
                config = replace(
                    config,
                    scheduler=scheduler,
                    v=config.v if scheduler == "dpc" else None,
                )
        if v is not None and config.scheduler == "dpc":
            config = replace(config, v=v)
        if slots is not None:
            config = replace(config, horizon=slots)
        if seed is not None:
            config = replace(config, seed=seed)
        if replications is not None:
            config = replace(config, replications=replications)
        if trace_every is not None:
            config = replace(config, trace_every=trace_every)
        try:
            config.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        out.append(config)
    if not out:
        raise ConfigError("no configs left after applying --scheduler filter")
    return out


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    """Full config (defaults included) as a JSON-ready dict, for provenance."""
    return {
        "label": config.label,
        "scheduler": config.scheduler,
        "v": config.v,
        "slots": config.horizon,
        "seed": config.seed,
        "replications": config.replications,
        "trace_every": config.trace_every,
        "p_low": config.levels.p_low,
        "p_high": config.levels.p_high,
        "users": [
            {
                "id": s.id,
                "role": s.role.value,
                "gamma": s.gamma,
                "good_prob": s.good_prob,
                **(
                    {"arrival_prob": s.arrival_prob, "deadline_m": s.deadline_m}
                    if s.is_deadline
                    else {"delta": s.delta}
                ),
            }
            for s in config.specs
        ],
    }

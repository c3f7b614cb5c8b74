"""JSON run configuration: defaults, overrides and conversion to an ExperimentConfig."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .errors import ParameterError
from .harness import ExperimentConfig, ExplicitHyperParams, hyper_source_from_dict, linspace_grid
from .hyperparams import MomentSet, empirical_moments, population_moments
from .market import NoiseSpec

_PARETO_122 = {"kind": "bounded_pareto", "lower": 1.0, "upper": 2.0, "power": 2.0}

DEFAULT_CONFIG: dict[str, Any] = {
    "n_assets": 1000,
    "n_periods": 2000,
    "alpha": None,
    "n_trials": 100,
    "seed": 1,
    "workers": 1,
    "noise": "gaussian",
    "hyper": {"mean": dict(_PARETO_122), "ratio": dict(_PARETO_122), "coupling": "product"},
    "r_grid": {"start": 1.0, "stop": 2.0, "num": 21},
    "eps_grid": None,
    "out": "out",
    "plot": False,
}


def load_config(path: str | Path | None) -> dict[str, Any]:
    """Defaults with each top-level key replaced by the JSON object in ``path``."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(user, dict):
        raise ParameterError(f"config {path} must hold a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    for key, value in user.items():
        # A user-supplied hyper section replaces the default one as a whole.
        cfg[key] = value
    return cfg


def parse_value(text: str) -> Any:
    """JSON if it parses, else the bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_dotted(cfg: dict[str, Any], assignment: str) -> None:
    """Apply ``a.b.c=value``; intermediate sections are created as needed."""
    if "=" not in assignment:
        raise ParameterError(f"--set expects KEY=VALUE, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    if parts[0] not in DEFAULT_CONFIG:
        raise ParameterError(f"unknown config key {parts[0]!r}")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = parse_value(raw)


def _grid(spec: Any, name: str) -> tuple[float, ...]:
    if isinstance(spec, dict):
        try:
            return linspace_grid(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except KeyError as exc:
            raise ParameterError(f"{name} needs start, stop and num; missing {exc}") from None
    if isinstance(spec, (list, tuple)) and spec:
        return tuple(float(x) for x in spec)
    raise ParameterError(f"{name} must be a non-empty list or a {{start, stop, num}} object")


def r_grid(cfg: dict[str, Any]) -> tuple[float, ...]:
    return _grid(cfg["r_grid"], "r_grid")


def eps_grid(cfg: dict[str, Any]) -> tuple[float, ...] | None:
    return None if cfg.get("eps_grid") is None else _grid(cfg["eps_grid"], "eps_grid")


def _int(cfg: dict[str, Any], key: str) -> int:
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ParameterError(f"{key} must be an integer, got {value!r}")
    return int(value)


def resolve_alpha(cfg: dict[str, Any]) -> float:
    """Explicit ``alpha`` wins; otherwise n_periods / n_assets."""
    if cfg.get("alpha") is not None:
        return float(cfg["alpha"])
    return _int(cfg, "n_periods") / _int(cfg, "n_assets")


def resolve_n_periods(cfg: dict[str, Any]) -> int:
    n = _int(cfg, "n_assets")
    if cfg.get("alpha") is not None:
        return int(round(float(cfg["alpha"]) * n))
    return _int(cfg, "n_periods")


def _hyper(cfg: dict[str, Any]):
    try:
        return hyper_source_from_dict(cfg["hyper"])
    except (TypeError, AttributeError) as exc:
        raise ParameterError(f"malformed hyper section: {exc}") from None


def experiment_config(cfg: dict[str, Any]) -> ExperimentConfig:
    hyper = _hyper(cfg)
    return ExperimentConfig(
        n_assets=_int(cfg, "n_assets"),
        n_periods=resolve_n_periods(cfg),
        n_trials=_int(cfg, "n_trials"),
        seed=_int(cfg, "seed"),
        hyper=hyper,
        r_grid=r_grid(cfg),
        noise=NoiseSpec(str(cfg["noise"])),
        workers=_int(cfg, "workers"),
    )


def config_moments(cfg: dict[str, Any]) -> MomentSet:
    """Population moments of the configured hyperparameter law (exact sums for an explicit list)."""
    hyper = _hyper(cfg)
    if isinstance(hyper, ExplicitHyperParams):
        return empirical_moments(hyper.params())
    return population_moments(hyper)

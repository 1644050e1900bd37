"""Experiment configuration: defaults, JSON-schema validation and sweep expansion."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from ..attacks import AttackSpec
from ..combine import CombineConfig
from ..signals import DEFAULT_SCENARIOS


class ConfigError(ValueError):
    """Raised for any invalid experiment configuration."""


METHODS = ("uniform", "krum", "multiplicative", "softmax", "adaptive", "softmax+T", "adaptive+T",
           "q×v", "q×r", "v×r", "v_only", "r_only", "q×v×r")

_ALIASES = {"q": "krum", "q_only": "krum", "none": "uniform", "softmax_blend": "softmax",
            "two_stage": "adaptive", "two_stage_adaptive": "adaptive", "v": "v_only", "r": "r_only"}

USES_Q = {"krum", "multiplicative", "softmax", "adaptive", "softmax+T", "adaptive+T", "q×v", "q×r", "q×v×r"}
USES_SIGNALS = set(METHODS) - {"uniform", "krum"}

SWEEP_AXES = ("beta", "correlation", "keep_fraction", "tau_c", "data_fraction", "subtle_fraction",
              "drift_rate", "attack_strategy", "dataset", "scenario")

DEFAULTS: dict[str, Any] = {
    "name": "custom",
    "description": "",
    "experiment": "standard",
    "trials": 30,
    "base_seed": 0,
    "baseline": "krum",
    "methods": ["uniform", "krum", "q×v×r"],
    "dataset": {"source": "wine", "cap": None, "test_fraction": 0.3, "data_fraction": 1.0, "n_contributors": None},
    "corruption": {"beta": 0.3, "style": "uniform_random_flip", "subtle_fraction": 0.0, "granularity": "sample"},
    "signals": {"kind": "scenario", "scenario": "moderate", "correlation": None, "tables": {}, "tier_ranges": None,
                "exploration_bonus": None},
    "combine": {"alpha": 0.5, "tau_s": 1.0, "tau_h": 0.35, "tau_c": 0.3, "keep_fraction": 0.7, "apply_T": False,
                "delta": 0.1},
    "model": {"epochs": 500, "learning_rate": 0.001, "batch_size": None, "warmup_epochs": 200, "training": "select"},
    "krum": {"k": None, "beta_assumed": 0.3, "layer_scope": "auto"},
    "attack": None,
    "drift": None,
    "federated": {"subset_n": 500, "n_workers": 10, "beta_workers": 0.4, "keep_fraction": 0.6,
                  "warmup_epochs": 150, "score": "loss"},
    "sweep": None,
}

_DRIFT_DEFAULTS = {"type": "label", "rate": 0.3, "n_periods": 5}
_ATTACK_DEFAULTS = {"strategy": "joint", "fake_fraction": 0.6, "fake_v_range": [0.70, 0.90],
                    "fake_r_range": [0.65, 0.85], "gamma": 0.5}


def schema() -> dict:
    text = resources.files("anml.harness").joinpath("config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def canonical_method(name: str) -> str:
    key = name.strip().replace("*", "×")
    if key in METHODS:
        return key
    lowered = key.lower()
    if lowered in _ALIASES:
        return _ALIASES[lowered]
    if set(lowered) <= set("qvrx×"):
        lowered = lowered.replace("x", "×")
    for m in METHODS:
        if m.lower() == lowered:
            return m
    raise ConfigError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def set_path(cfg: dict, dotted: str, value) -> None:
    node = cfg
    parts = dotted.split(".")
    for p in parts[:-1]:
        if node.get(p) is None:
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def apply_axis(cfg: dict, axis: str, value) -> dict:
    """Copy of ``cfg`` with one sweep coordinate applied."""
    out = copy.deepcopy(cfg)
    if axis == "beta":
        out["corruption"]["beta"] = value
        out["federated"]["beta_workers"] = value
    elif axis == "correlation":
        out["signals"]["kind"] = "correlated"
        out["signals"]["correlation"] = value
    elif axis in ("keep_fraction", "tau_c"):
        out["combine"][axis] = value
    elif axis == "data_fraction":
        out["dataset"]["data_fraction"] = value
    elif axis == "subtle_fraction":
        out["corruption"]["subtle_fraction"] = value
    elif axis == "drift_rate":
        out["drift"] = {**_DRIFT_DEFAULTS, **(out.get("drift") or {}), "rate": value}
    elif axis == "attack_strategy":
        out["attack"] = {**_ATTACK_DEFAULTS, **(out.get("attack") or {}), "strategy": value}
    elif axis == "dataset":
        out["dataset"]["source"] = value
    elif axis == "scenario":
        out["signals"]["scenario"] = value
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return out


@dataclass(frozen=True)
class SweepPoint:
    label: str
    value: Any
    index: int

    @property
    def key(self) -> str:
        return "" if self.label == "" else f"{self.label}={self.value}"


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated, fully defaulted experiment description."""

    raw: dict

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def methods(self) -> list[str]:
        return list(self.raw["methods"])

    @property
    def trials(self) -> int:
        return self.raw["trials"]

    @property
    def base_seed(self) -> int:
        return self.raw["base_seed"]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return from_dict(_merge(self.raw, {k: v for k, v in kw.items() if v is not None}))

    def points(self) -> list[tuple[SweepPoint, dict]]:
        """Sweep points paired with their resolved config dicts (one unlabeled point without a sweep)."""
        sweeps = self.raw["sweep"]
        if sweeps is None:
            return [(SweepPoint("", None, 0), self.raw)]
        if isinstance(sweeps, dict):
            sweeps = [sweeps]
        out = []
        for sw in sweeps:
            base = copy.deepcopy(self.raw)
            for path, val in (sw.get("set") or {}).items():
                set_path(base, path, val)
            label = sw.get("label", sw["axis"])
            for v in sw["values"]:
                out.append((SweepPoint(label, v, len(out)), apply_axis(base, sw["axis"], v)))
        return out

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True, ensure_ascii=False)


def _check_semantics(cfg: dict) -> None:
    methods = [canonical_method(m) for m in cfg["methods"]]
    if len(set(methods)) != len(methods):
        raise ConfigError("duplicate methods in method list")
    cfg["methods"] = methods
    cfg["baseline"] = canonical_method(cfg["baseline"])
    if cfg["experiment"] == "standard" and cfg["baseline"] not in methods:
        raise ConfigError(f"baseline {cfg['baseline']!r} is not in the method list")
    sig = cfg["signals"]
    if sig["kind"] == "none" and USES_SIGNALS & set(methods):
        bad = sorted(USES_SIGNALS & set(methods))
        raise ConfigError(f"methods {bad} need v and r signals but signals.kind is 'none'")
    if sig["kind"] == "scenario":
        known = set(DEFAULT_SCENARIOS) | set(sig.get("tables") or {})
        if sig["scenario"] not in known:
            raise ConfigError(f"unknown scenario {sig['scenario']!r}")
    if sig["kind"] == "correlated" and sig["correlation"] is None:
        raise ConfigError("signals.kind 'correlated' needs signals.correlation")
    try:
        CombineConfig(**cfg["combine"])
        if cfg["attack"] is not None:
            a = cfg["attack"]
            AttackSpec(**{**a, "fake_v_range": tuple(a["fake_v_range"]), "fake_r_range": tuple(a["fake_r_range"])})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["attack"] is not None and cfg["drift"] is not None:
        raise ConfigError("attack and drift cannot be combined in one experiment")
    if cfg["corruption"]["style"] == "regression_shift" and cfg["attack"] is not None:
        raise ConfigError("attacks need a classification dataset")
    if cfg["experiment"] == "detectability":
        for sw in _sweep_list(cfg):
            if sw["axis"] not in ("subtle_fraction", "beta"):
                raise ConfigError("detectability experiments sweep subtle_fraction or beta only")


def _sweep_list(cfg: dict) -> list[dict]:
    sw = cfg["sweep"]
    if sw is None:
        return []
    return [sw] if isinstance(sw, dict) else list(sw)


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        jsonschema.validate(data, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, data)
    if cfg["attack"] is not None:
        cfg["attack"] = {**_ATTACK_DEFAULTS, **cfg["attack"]}
    if cfg["drift"] is not None:
        cfg["drift"] = {**_DRIFT_DEFAULTS, **cfg["drift"]}
    _check_semantics(cfg)
    cfg = ExperimentConfig(cfg)
    # every point must resolve to a valid config too
    for point, resolved in cfg.points():
        try:
            _check_semantics(copy.deepcopy(resolved))
            jsonschema.validate({k: v for k, v in resolved.items() if k != "sweep"}, schema())
        except (ConfigError, jsonschema.ValidationError) as exc:
            msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
            raise ConfigError(f"sweep point {point.key}: {msg}") from exc
    return cfg


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_dict(data)

"""Run configuration: built-in defaults, overlaid by a YAML/JSON file, then by
command-line flags. Every leaf remembers where its value came from."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .gnn import GnnConfig
from .mcm import McmConfig
from .trainer import TrainConfig

DATA_DIR_ENV = "ILGAMMA_DATA_DIR"


class ConfigError(ValueError):
    pass


def defaults() -> dict:
    return {
        "seed": 0,
        "model": {
            "kind": "gnn",
            "gnn": GnnConfig().to_dict(),
            "mcm": McmConfig().to_dict(),
        },
        "train": TrainConfig().to_dict(),
        "split": {
            "mode": "prediction",
            "val_fraction": None,
            "test_fraction": None,
            "stratified": False,
        },
        "ensemble": {"n": 40, "parallel": 1},
    }


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, path + "."))
        else:
            out[path] = value
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=defaults)
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key in _flatten(self.values):
            self.provenance.setdefault(key, "default")

    def get(self, dotted: str):
        node = self.values
        for part in dotted.split("."):
            node = node[part]
        return node

    def set(self, dotted: str, value, source: str) -> None:
        parts = dotted.split(".")
        node = self.values
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown configuration key {dotted!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown configuration key {dotted!r}")
        if isinstance(node[parts[-1]], dict):
            raise ConfigError(f"{dotted!r} is a section, not a value")
        node[parts[-1]] = value
        self.provenance[dotted] = source

    def merge(self, tree: dict, source: str) -> None:
        for dotted, value in _flatten(tree).items():
            self.set(dotted, value, source)

    @property
    def model_kind(self) -> str:
        return self.get("model.kind")

    def model_config(self) -> dict:
        kind = self.model_kind
        if kind not in ("gnn", "mcm"):
            raise ConfigError(f"model.kind must be 'gnn' or 'mcm', got {kind!r}")
        return copy.deepcopy(self.values["model"][kind])

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig.from_dict({**self.values["train"], "seed": self.get("seed")})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid train configuration: {exc}") from None

    def validate(self) -> None:
        self.train_config()
        try:
            if self.model_kind == "gnn":
                GnnConfig.from_dict(self.model_config())
            else:
                McmConfig.from_dict(self.model_config())
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model configuration: {exc}") from None

    def to_dict(self) -> dict:
        return {"values": copy.deepcopy(self.values), "provenance": dict(sorted(self.provenance.items()))}

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


def _normalize_tree(tree: dict) -> dict:
    """Accept a saved RunConfig dump or a model inspection dump as well."""
    if "values" in tree and "provenance" in tree:
        return tree["values"]
    if "kind" in tree and "config" in tree:  # output of inspect-model --json
        out = {"model": {"kind": tree["kind"], tree["kind"]: tree["config"]}}
        if "seed" in tree:
            out["seed"] = tree["seed"]
        return out
    return tree


def read_config_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        tree = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return _normalize_tree(tree)


def resolve(config_path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """defaults, then the config file, then flag overrides (dotted keys).

    ``None`` override values mean "flag not given" and are skipped.
    """
    run = RunConfig()
    if config_path is not None:
        run.merge(read_config_file(config_path), f"file:{config_path}")
    for dotted, value in (overrides or {}).items():
        if value is not None:
            run.set(dotted, value, "flag")
    run.validate()
    return run


def data_path(path: str | Path | None, default_name: str = "records.csv") -> Path:
    """Resolve a data file, falling back to the data directory variable."""
    base = os.environ.get(DATA_DIR_ENV)
    if path is None:
        if not base:
            raise ConfigError(f"no --data given and {DATA_DIR_ENV} is not set")
        return Path(base) / default_name
    path = Path(path)
    if not path.exists() and base and not path.is_absolute():
        candidate = Path(base) / path
        if candidate.exists():
            return candidate
    return path

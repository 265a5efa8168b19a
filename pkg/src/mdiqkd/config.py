"""Scenario files (YAML) describing one or more experimental setups."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from importlib import resources
from pathlib import Path

import yaml

from .channel import DriftParams, DriftState, FiberLink, StabilizerConfig
from .optics import DetectorModel
from .protocol import SetupConfig
from .tables import ConfigurationError, IntensitySet

_NESTED = {
    "link_alice": FiberLink,
    "link_bob": FiberLink,
    "intensities": IntensitySet,
    "detector": DetectorModel,
    "drift": DriftParams,
    "initial_drift": DriftState,
    "stabilizer": StabilizerConfig,
}


def bundled_path(name: str) -> Path:
    return Path(resources.files("mdiqkd") / "data" / name)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"{where}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc


def setup_from_dict(data: dict) -> SetupConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("each setup must be a mapping")
    name = data.get("name", "<unnamed>")
    kwargs = dict(data)
    for key, cls in _NESTED.items():
        if key in kwargs:
            kwargs[key] = _build(cls, kwargs[key], f"setup {name!r}, field {key!r}")
    for key in ("link_alice", "link_bob", "intensities"):
        if key not in kwargs:
            raise ConfigurationError(f"setup {name!r}: missing required field {key!r}")
    return _build(SetupConfig, kwargs, f"setup {name!r}")


def setup_to_dict(setup: SetupConfig) -> dict:
    return dataclasses.asdict(setup)


def load_scenario(path) -> list[SetupConfig]:
    """Parse and validate every setup in a scenario file."""
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if data is None:
        return []
    if isinstance(data, list):
        entries = data
    elif isinstance(data, dict):
        entries = data.get("setups") or []
    else:
        raise ConfigurationError("scenario file must hold a mapping with a 'setups' list")
    setups = [setup_from_dict(entry) for entry in entries]
    seen = set()
    for s in setups:
        if s.name in seen:
            raise ConfigurationError(f"duplicate setup name {s.name!r}")
        seen.add(s.name)
    return setups


def dump_scenario(setups, path):
    payload = {"setups": [setup_to_dict(s) for s in setups]}
    Path(path).write_text(yaml.safe_dump(payload, sort_keys=False))


def load_bundled_scenarios() -> list[SetupConfig]:
    return load_scenario(bundled_path("scenarios.yaml"))


def find_setup(setups, name: str) -> SetupConfig:
    for s in setups:
        if name in (s.name, s.dataset):
            return s
    raise ConfigurationError(f"no setup named {name!r}; available: {[s.name for s in setups]}")


def config_hash(obj) -> str:
    """Short stable digest of a configuration (dataclass, dict or list of them)."""
    def plain(o):
        if dataclasses.is_dataclass(o):
            return plain(dataclasses.asdict(o))
        if isinstance(o, dict):
            return {str(k): plain(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [plain(v) for v in o]
        return o
    blob = json.dumps(plain(obj), sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]

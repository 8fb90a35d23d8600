"""Shipped device presets and the default model registry."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Dict

from .model import DeviceSpec, ModelSpec


def _read_data(name: str) -> str:
    return resources.files("sweepbench.data").joinpath(name).read_text()


def builtin_devices() -> Dict[str, DeviceSpec]:
    """The shipped simulated devices, keyed by name."""
    devices = {}
    for fname in ("t4.sim", "l4.sim"):
        spec = DeviceSpec.from_dict(json.loads(_read_data(fname)))
        devices[spec.name] = spec
    return devices


def builtin_models() -> Dict[str, ModelSpec]:
    """The shipped model registry, keyed by name.

    Counts come from tools/derive_model_fixtures.py (operator-count walk of
    the standard residual-network definitions), not hand entry.
    """
    raw = json.loads(_read_data("models.json"))
    return {name: ModelSpec.from_dict(d) for name, d in raw.items()}


def load_device_file(path: Path) -> DeviceSpec:
    """Load a user-supplied device parameter file (same schema as presets)."""
    return DeviceSpec.from_dict(json.loads(Path(path).read_text()))

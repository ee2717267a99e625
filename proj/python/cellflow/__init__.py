"""Symmetry-preserving flows for cellular solid design."""

import json as _json

from ._core import (
    CellflowError,
    ConfigError,
    Design,
    flow_points,
    group_info,
    group_names,
    psi,
    random_params,
    velocity,
)
from . import _core

__all__ = [
    "CellflowError",
    "ConfigError",
    "Design",
    "design",
    "flow_points",
    "group_info",
    "group_names",
    "load_config",
    "psi",
    "random_params",
    "simulate",
    "velocity",
    "verify",
]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def load_config(config):
    """Validated config with every default filled in."""
    return _json.loads(_core.normalize_config(_text(config)))


def verify(config):
    return _core.verify(_text(config))


def design(config, out_dir=""):
    return _core.design(_text(config), out_dir)


def simulate(config, checkpoint="", out_dir=""):
    return _core.simulate(_text(config), checkpoint, out_dir)

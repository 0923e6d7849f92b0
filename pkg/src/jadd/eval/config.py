"""YAML scenario files.

A scenario file holds ScenarioSpec fields at top level plus optional
``system`` and ``cluster`` mappings.  A ``sweep`` mapping lists values per
axis; the sweep runs the Cartesian product.  Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from pathlib import Path
from typing import Any

import yaml

from ..channel import ClusterSpec
from ..sysconfig import ConfigError, SystemConfig
from .runner import ScenarioSpec

SWEEP_AXES = ("speed_kmh", "N_d", "sample_snr_db", "pilot_snr_db", "n_s", "eta", "L", "N_L")
_SPEC_KEYS = {f.name for f in dataclasses.fields(ScenarioSpec)} - {"cfg", "cluster", "fixed_paths"}
_INF_WORDS = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}


def _number(value):
    if isinstance(value, str) and value.lower() in _INF_WORDS:
        return _INF_WORDS[value.lower()]
    return value


def _cluster_from(raw: dict) -> ClusterSpec:
    names = {f.name for f in dataclasses.fields(ClusterSpec)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown cluster keys: {', '.join(unknown)}")
    return ClusterSpec(**raw)


def spec_from_mapping(raw: dict) -> ScenarioSpec:
    raw = dict(raw)
    raw.pop("sweep", None)
    system = raw.pop("system", {}) or {}
    cluster = raw.pop("cluster", {}) or {}
    unknown = sorted(set(raw) - _SPEC_KEYS)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
    values = {k: _number(v) for k, v in raw.items()}
    return ScenarioSpec(cfg=SystemConfig.from_mapping(system), cluster=_cluster_from(cluster), **values)


def load_raw(path) -> dict:
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def load_scenario(path) -> ScenarioSpec:
    return spec_from_mapping(load_raw(path))


def sweep_specs(raw: dict) -> list[ScenarioSpec]:
    """Expand the ``sweep`` block into one spec per grid point."""
    grid = raw.get("sweep") or {}
    bad = sorted(set(grid) - set(SWEEP_AXES))
    if bad:
        raise ConfigError(f"unknown sweep axes: {', '.join(bad)}")
    base_id = raw.get("scenario_id", "scenario")
    axes = list(grid)
    out = []
    for k, combo in enumerate(itertools.product(*(list(grid[a]) for a in axes))):
        point: dict[str, Any] = dict(raw)
        point.update(zip(axes, combo))
        point["scenario_id"] = f"{base_id}-{k:03d}"
        out.append(spec_from_mapping(point))
    return out

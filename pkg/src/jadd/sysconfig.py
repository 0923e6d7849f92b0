"""System configuration and angle-delay grid indexing.

Flat grid indices are 1-based and follow the Kronecker order of the
angle-delay transform: delay-major, then polarization, then horizontal,
with the vertical index running fastest.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised when a configuration record violates one of its invariants."""


class OffRegionError(ValueError):
    """Raised when a grid index has no physical angle (outside visible region)."""


@dataclass(frozen=True)
class SystemConfig:
    """Array geometry, carriers, OFDM numerology and timing.

    Field names are part of the configuration-file contract and keep the
    usual notation (``N_v``, ``f_u``, ...). Defaults describe a 2x8
    dual-polarized panel on the 1.92/2.11 GHz FDD pair with 30 kHz spacing
    and 51 resource blocks.
    """

    N_v: int = 2
    N_h: int = 8
    P_t: int = 2
    l_v: float = 0.5 * SPEED_OF_LIGHT / 2.11e9
    l_h: float = 0.5 * SPEED_OF_LIGHT / 2.11e9
    f_u: float = 1.92e9
    f_d: float = 2.11e9
    f_delta: float = 30e3
    N_f: int = 612
    T_srs: float = 0.5e-3
    N_d: int = 10
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        validate_config(self)

    @property
    def N_t(self) -> int:
        return self.N_v * self.N_h * self.P_t

    @property
    def n_spatial(self) -> int:
        """Elements per polarization, ``N_v * N_h``."""
        return self.N_v * self.N_h

    @property
    def dim(self) -> int:
        """Length of a vectorized space-frequency channel, ``N_t * N_f``."""
        return self.N_t * self.N_f

    @property
    def T_d(self) -> float:
        """CSI delay in seconds."""
        return self.N_d * self.T_srs

    @property
    def carrier_ratio(self) -> float:
        return self.f_d / self.f_u

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, raw: dict) -> "SystemConfig":
        """Build from a plain mapping; unknown keys are rejected."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ConfigError(f"unknown system config keys: {', '.join(unknown)}")
        return cls(**raw)

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate_config(raw: SystemConfig) -> SystemConfig:
    """Check every invariant of ``raw`` and return it unchanged.

    Raises:
        ConfigError: naming the first violated invariant.
    """
    for name, label in (("N_v", "vertical element count"),
                        ("N_h", "horizontal element count"),
                        ("N_f", "subcarrier count")):
        value = getattr(raw, name)
        if not _is_int(value):
            raise ConfigError(f"{label} must be an integer, got {value!r}")
        if value < 1:
            raise ConfigError(f"{label} must be ≥1")
    if raw.P_t not in (1, 2) or not _is_int(raw.P_t):
        raise ConfigError("polarizations must be 1 or 2")
    if not _is_int(raw.N_d) or raw.N_d < 0:
        raise ConfigError("CSI delay slots must be a non-negative integer")
    for name, label in (("l_v", "vertical spacing"), ("l_h", "horizontal spacing"),
                        ("f_u", "uplink frequency"), ("f_d", "downlink frequency"),
                        ("f_delta", "subcarrier spacing"), ("T_srs", "SRS period"),
                        ("c", "propagation speed")):
        value = getattr(raw, name)
        if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value)):
            raise ConfigError(f"{label} must be a finite number, got {value!r}")
        if value <= 0:
            raise ConfigError(f"nonpositive {label}: {value!r}")
    return raw


@dataclass(frozen=True)
class GridIndex:
    """Decomposition of a 1-based flat angle-delay index.

    ``i_a`` runs over all ``N_t`` spatial columns (both polarization blocks);
    ``pol`` is the 0-based polarization block and ``i_h``/``i_v`` are the
    1-based horizontal/vertical indices inside that block.
    """

    flat: int
    delay_idx: int
    i_a: int
    i_h: int
    i_v: int
    pol: int = 0


def _mod_nonzero(i: int, n: int) -> int:
    """``i mod n`` with a 0 remainder mapped to ``n``."""
    r = i % n
    return n if r == 0 else r


def flat_to_grid(i: int, cfg: SystemConfig) -> GridIndex:
    n_t = cfg.N_t
    if not _is_int(i) or not 1 <= i <= n_t * cfg.N_f:
        raise IndexError(f"flat index {i!r} outside [1, {n_t * cfg.N_f}]")
    i = int(i)
    delay_idx = -(-i // n_t) - 1
    i_a = _mod_nonzero(i, n_t)
    pol, within = divmod(i_a - 1, cfg.n_spatial)
    within += 1
    i_v = _mod_nonzero(within, cfg.N_v)
    i_h = (within - i_v) // cfg.N_v + 1
    return GridIndex(flat=i, delay_idx=delay_idx, i_a=i_a, i_h=i_h, i_v=i_v, pol=pol)


def grid_to_flat(g: GridIndex, cfg: SystemConfig) -> int:
    within = (g.i_h - 1) * cfg.N_v + g.i_v
    i_a = g.pol * cfg.n_spatial + within
    return g.delay_idx * cfg.N_t + i_a


def grid_direction_cosines(g: GridIndex, cfg: SystemConfig) -> tuple[float, float]:
    """Return ``(cos θ cos φ, cos θ)`` placing the steering phases on the DFT grid."""
    u_h = (g.i_h - 1) * cfg.c / (cfg.l_h * cfg.f_u * cfg.N_h)
    u_v = (g.i_v - 1) * cfg.c / (cfg.l_v * cfg.f_u * cfg.N_v)
    return u_h, u_v


def grid_to_angles(g: GridIndex, cfg: SystemConfig, atol: float = 1e-12) -> tuple[float, float]:
    """Zenith/azimuth pair whose uplink steering vector matches DFT column ``g``.

    Raises:
        OffRegionError: if no physical angle reproduces the grid phases.
    """
    if not (1 <= g.i_h <= cfg.N_h and 1 <= g.i_v <= cfg.N_v):
        raise IndexError(f"grid index {g} outside the array")
    u_h, u_v = grid_direction_cosines(g, cfg)
    if abs(u_v) > 1 + atol:
        raise OffRegionError(f"cos(theta) = {u_v:.6g} outside [-1, 1]")
    u_v = float(np.clip(u_v, -1.0, 1.0))
    theta = math.acos(u_v)
    if abs(u_v) <= atol:
        if abs(u_h) > atol:
            raise OffRegionError(f"cos(theta) = 0 but cos(theta)cos(phi) = {u_h:.6g}")
        return theta, 0.0
    cos_phi = u_h / u_v
    if abs(cos_phi) > 1 + atol:
        raise OffRegionError(f"cos(phi) = {cos_phi:.6g} outside [-1, 1]")
    return theta, math.acos(float(np.clip(cos_phi, -1.0, 1.0)))


def is_on_region(g: GridIndex, cfg: SystemConfig) -> bool:
    try:
        grid_to_angles(g, cfg)
    except OffRegionError:
        return False
    return True

"""Ground-truth multipath channels for the uplink and downlink bands.

Both bands share path angles, delays and the Doppler direction; only the
complex gains and the carrier (hence the Doppler rate and the steering
phases) differ.  Time is counted in SRS slots.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .sysconfig import ConfigError, SystemConfig


class Band(str, enum.Enum):
    UL = "UL"
    DL = "DL"


@dataclass(frozen=True)
class PathParams:
    beta_u: complex
    beta_d: complex
    theta: float
    phi: float
    tau: float
    cos_speed_angle: float
    pol_phase: tuple[complex, complex] = (1.0 + 0j, 1.0 + 0j)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("path delay must be non-negative")
        if abs(self.cos_speed_angle) > 1:
            raise ValueError("cos_speed_angle must lie in [-1, 1]")
        if not 0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")
        if not -math.pi < self.phi <= math.pi:
            raise ValueError("azimuth angle must lie in (-pi, pi]")


@dataclass(frozen=True)
class PathSet:
    """Column-oriented store of ``P`` paths plus the UE speed in m/s."""

    beta_u: np.ndarray
    beta_d: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    cos_speed_angle: np.ndarray
    pol_phase: np.ndarray
    speed: float = 0.0

    def __post_init__(self):
        n = len(self.beta_u)
        if n == 0:
            raise ValueError("a path set needs at least one path")
        for name in ("beta_d", "theta", "phi", "tau", "cos_speed_angle"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if self.pol_phase.shape != (n, 2):
            raise ValueError("pol_phase must have shape (P, 2)")
        if self.speed < 0:
            raise ValueError("UE speed must be non-negative")
        if np.any(self.tau < 0) or np.any(np.abs(self.cos_speed_angle) > 1):
            raise ValueError("path delays must be >= 0 and |cos_speed_angle| <= 1")

    def __len__(self):
        return len(self.beta_u)

    @classmethod
    def from_paths(cls, paths, speed: float = 0.0) -> "PathSet":
        paths = list(paths)
        if not paths:
            raise ValueError("a path set needs at least one path")
        col = lambda name, dtype: np.array([getattr(p, name) for p in paths], dtype=dtype)
        return cls(
            beta_u=col("beta_u", complex),
            beta_d=col("beta_d", complex),
            theta=col("theta", float),
            phi=col("phi", float),
            tau=col("tau", float),
            cos_speed_angle=col("cos_speed_angle", float),
            pol_phase=np.array([p.pol_phase for p in paths], dtype=complex).reshape(-1, 2),
            speed=float(speed),
        )

    @property
    def paths(self) -> list[PathParams]:
        return [
            PathParams(complex(self.beta_u[p]), complex(self.beta_d[p]), float(self.theta[p]),
                       float(self.phi[p]), float(self.tau[p]), float(self.cos_speed_angle[p]),
                       (complex(self.pol_phase[p, 0]), complex(self.pol_phase[p, 1])))
            for p in range(len(self))
        ]

    def doppler(self, freq: float, c: float) -> np.ndarray:
        """Angular Doppler rate of every path in rad/s at carrier ``freq``."""
        return 2 * np.pi * self.speed * self.cos_speed_angle * freq / c


@dataclass(frozen=True)
class ChannelSnapshot:
    t: int
    band: Band
    h: np.ndarray

    def __post_init__(self):
        if self.h.ndim != 1:
            raise ValueError("snapshot vector must be one-dimensional")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("snapshot contains non-finite entries")


DOPPLER_MODELS = ("uniform", "geometric")


@dataclass(frozen=True)
class ClusterSpec:
    """Clustered geometry standing in for tabulated delay-line models.

    Cluster centres are drawn around the mean direction with the
    ``*_spread_deg`` RMS values; rays scatter around their centre with the
    ``ray_*_spread_deg`` RMS values.  Cluster delays are exponential with
    mean ``delay_spread``.  ``theta`` is measured from the horizontal plane,
    matching the steering model where the horizontal phase goes with
    ``cos(theta) cos(phi)``.

    ``doppler="uniform"`` draws every path's ``cos_speed_angle`` i.i.d. on
    ``[-1, 1]``.  ``doppler="geometric"`` moves the UE horizontally in a
    uniformly drawn heading, so each ray's Doppler follows from its arrival
    direction and rays of one cluster stay close in Doppler.
    """

    n_clusters: int = 23
    rays_per_cluster: int = 20
    azimuth_spread_deg: float = 87.1
    elevation_spread_deg: float = 24.7
    ray_azimuth_spread_deg: float = 5.0
    ray_elevation_spread_deg: float = 3.0
    delay_spread: float = 300e-9
    ray_delay_spread: float = 0.0
    mean_azimuth_deg: float = 0.0
    mean_elevation_deg: float = 0.0
    shadowing_std_db: float = 3.0
    speed_kmh: float = 350.0
    doppler: str = "uniform"

    def __post_init__(self):
        if self.doppler not in DOPPLER_MODELS:
            raise ConfigError(f"doppler model must be one of {', '.join(DOPPLER_MODELS)}")
        if self.n_clusters < 1 or self.rays_per_cluster < 1:
            raise ConfigError("cluster count and rays per cluster must be ≥1")
        for name in ("azimuth_spread_deg", "elevation_spread_deg", "ray_azimuth_spread_deg",
                     "ray_elevation_spread_deg", "delay_spread", "ray_delay_spread",
                     "shadowing_std_db", "speed_kmh"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite non-negative number")

    @property
    def n_paths(self) -> int:
        return self.n_clusters * self.rays_per_cluster

    @property
    def speed(self) -> float:
        return self.speed_kmh / 3.6


def _wrap_azimuth(phi):
    out = np.mod(phi + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def _fold_elevation(theta):
    """Fold into ``[0, pi]``; the steering phases only see ``cos(theta)``."""
    theta = np.mod(theta, 2 * np.pi)
    return np.where(theta > np.pi, 2 * np.pi - theta, theta)


def synth_paths(scenario: ClusterSpec, rng: np.random.Generator) -> PathSet:
    """Draw a clustered path set with total expected path power one."""
    n_c, n_r = scenario.n_clusters, scenario.rays_per_cluster
    deg = np.pi / 180

    elev_c = scenario.mean_elevation_deg * deg + scenario.elevation_spread_deg * deg * rng.standard_normal(n_c)
    azi_c = scenario.mean_azimuth_deg * deg + scenario.azimuth_spread_deg * deg * rng.standard_normal(n_c)
    if scenario.delay_spread > 0:
        tau_c = -scenario.delay_spread * np.log(rng.uniform(size=n_c))
        tau_c = np.sort(tau_c - tau_c.min())
        power_c = np.exp(-tau_c / scenario.delay_spread)
    else:
        tau_c = np.zeros(n_c)
        power_c = np.ones(n_c)
    power_c = power_c * 10 ** (-scenario.shadowing_std_db * rng.standard_normal(n_c) / 10)
    power_c /= power_c.sum()

    elev = np.repeat(elev_c, n_r) + scenario.ray_elevation_spread_deg * deg * rng.standard_normal(n_c * n_r)
    phi = _wrap_azimuth(np.repeat(azi_c, n_r)
                        + scenario.ray_azimuth_spread_deg * deg * rng.standard_normal(n_c * n_r))
    tau = np.repeat(tau_c, n_r) + np.abs(scenario.ray_delay_spread * rng.standard_normal(n_c * n_r))
    power = np.repeat(power_c / n_r, n_r)

    gain = np.sqrt(power / 2) * (rng.standard_normal(power.size) + 1j * rng.standard_normal(power.size))
    # Band gains share power but not phase.
    beta_d = np.abs(gain) * np.exp(2j * np.pi * rng.uniform(size=power.size))
    pol_phase = np.exp(2j * np.pi * rng.uniform(size=(power.size, 2)))
    if scenario.doppler == "geometric":
        heading = rng.uniform(-np.pi, np.pi)
        cos_speed = np.clip(np.cos(elev) * np.cos(phi - heading), -1.0, 1.0)
    else:
        cos_speed = rng.uniform(-1.0, 1.0, size=power.size)
    return PathSet(
        beta_u=gain,
        beta_d=beta_d,
        theta=_fold_elevation(elev),
        phi=phi,
        tau=tau,
        cos_speed_angle=cos_speed,
        pol_phase=pol_phase,
        speed=scenario.speed,
    )


def steering_vector(theta, phi, freq: float, cfg: SystemConfig) -> np.ndarray:
    """Single-polarization UPA response, horizontal-major Kronecker order.

    Accepts scalar or array angles; the element axis is last.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    u_h = np.cos(theta) * np.cos(phi)
    u_v = np.cos(theta) * np.ones_like(phi)
    n_h = np.arange(cfg.N_h)
    n_v = np.arange(cfg.N_v)
    a_h = np.exp(2j * np.pi * cfg.l_h * freq / cfg.c * u_h[..., None] * n_h)
    a_v = np.exp(2j * np.pi * cfg.l_v * freq / cfg.c * u_v[..., None] * n_v)
    return (a_h[..., :, None] * a_v[..., None, :]).reshape(*a_h.shape[:-1], cfg.n_spatial)


def delay_vector(tau, cfg: SystemConfig) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    n = np.arange(cfg.N_f)
    offset = np.exp(-2j * np.pi * cfg.f_u * cfg.f_delta * tau)
    return offset[..., None] * np.exp(-2j * np.pi * tau[..., None] * n * cfg.f_delta)


def _band_terms(paths: PathSet, band: Band, cfg: SystemConfig):
    band = Band(band)
    if band is Band.UL:
        freq = cfg.f_u
        base = paths.beta_u * np.exp(-2j * np.pi * cfg.f_u * paths.tau)
    else:
        freq = cfg.f_d
        base = (paths.beta_d * np.exp(-2j * np.pi * cfg.f_d * paths.tau)
                * np.exp(-2j * np.pi * (cfg.f_d - cfg.f_u) * paths.tau))
    return band, freq, base


def _spatial_structure(paths: PathSet, freq: float, cfg: SystemConfig) -> np.ndarray:
    a = steering_vector(paths.theta, paths.phi, freq, cfg)
    if cfg.P_t == 1:
        return a
    return (paths.pol_phase[:, :, None] * a[:, None, :]).reshape(len(paths), cfg.N_t)


def channel_series(paths: PathSet, slots, band: Band, cfg: SystemConfig) -> np.ndarray:
    """Channels at several slots, shape ``(len(slots), N_t * N_f)``."""
    band, freq, base = _band_terms(paths, band, cfg)
    slots = np.atleast_1d(np.asarray(slots))
    w = paths.doppler(freq, cfg.c)
    spatial = _spatial_structure(paths, freq, cfg)
    delay = delay_vector(paths.tau, cfg)
    out = np.empty((slots.size, cfg.dim), dtype=complex)
    for k, t in enumerate(slots):
        coef = base * np.exp(1j * w * (t * cfg.T_srs))
        out[k] = ((coef[:, None] * delay).T @ spatial).ravel()
    return out


def channel_at(paths: PathSet, t: int, band: Band, cfg: SystemConfig) -> ChannelSnapshot:
    h = channel_series(paths, [t], band, cfg)[0]
    return ChannelSnapshot(t=int(t), band=Band(band), h=h)


def add_sample_noise(snap: ChannelSnapshot, sample_snr_db: float,
                     rng: np.random.Generator) -> ChannelSnapshot:
    """Add i.i.d. circular Gaussian noise at the given per-element SNR."""
    if math.isinf(sample_snr_db) and sample_snr_db > 0:
        return snap
    var = np.mean(np.abs(snap.h) ** 2) / 10 ** (sample_snr_db / 10)
    noise = np.sqrt(var / 2) * (rng.standard_normal(snap.h.size) + 1j * rng.standard_normal(snap.h.size))
    return ChannelSnapshot(t=snap.t, band=snap.band, h=snap.h + noise)

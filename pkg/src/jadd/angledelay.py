"""Unitary angle-delay transform and sparse support selection.

The transform matrix is ``W(N_f)^H ⊗ I_{P_t} ⊗ W(N_h) ⊗ W(N_v)`` with
``W(X)`` the normalized DFT matrix built on ``exp(+2j*pi/X)``.  It is
applied axis by axis with FFTs; :func:`dense_transform` materializes it
for small grids and serves as the reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import Band, ChannelSnapshot
from .sysconfig import SystemConfig

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class AngleDelayImage:
    g_hat: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class SupportSet:
    """Selected grid columns as 1-based flat indices, strongest first."""

    indices: np.ndarray
    eta: Optional[float]
    captured_power_fraction: float

    def __post_init__(self):
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("support indices must be distinct")

    def __len__(self):
        return len(self.indices)

    @property
    def positions(self) -> np.ndarray:
        """0-based positions into a vectorized channel."""
        return np.asarray(self.indices, dtype=int) - 1


def _grid_shape(cfg: SystemConfig) -> tuple[int, int, int, int]:
    return (cfg.N_f, cfg.P_t, cfg.N_h, cfg.N_v)


def project_vector(h: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """``Q^H h`` for one or more vectors stacked along the leading axes."""
    h = np.asarray(h)
    lead = h.shape[:-1]
    x = h.reshape(*lead, *_grid_shape(cfg))
    k = len(lead)
    x = np.fft.fft(x, axis=k + 3, norm="ortho")
    x = np.fft.fft(x, axis=k + 2, norm="ortho")
    x = np.fft.ifft(x, axis=k, norm="ortho")
    return x.reshape(*lead, cfg.dim)


def unproject_vector(g: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """``Q g``, the inverse of :func:`project_vector`."""
    g = np.asarray(g)
    lead = g.shape[:-1]
    x = g.reshape(*lead, *_grid_shape(cfg))
    k = len(lead)
    x = np.fft.ifft(x, axis=k + 3, norm="ortho")
    x = np.fft.ifft(x, axis=k + 2, norm="ortho")
    x = np.fft.fft(x, axis=k, norm="ortho")
    return x.reshape(*lead, cfg.dim)


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def dense_transform(cfg: SystemConfig) -> np.ndarray:
    """The full transform matrix ``Q``; only for ``N_t * N_f <= 4096``."""
    if cfg.dim > DENSE_LIMIT:
        raise ValueError(f"refusing to materialize a {cfg.dim}x{cfg.dim} transform")
    spatial = np.kron(np.eye(cfg.P_t), np.kron(dft_matrix(cfg.N_h), dft_matrix(cfg.N_v)))
    return np.kron(dft_matrix(cfg.N_f).conj().T, spatial)


def column(flat: int, cfg: SystemConfig) -> np.ndarray:
    """The grid column ``q_i`` for a 1-based flat index."""
    e = np.zeros(cfg.dim, dtype=complex)
    e[flat - 1] = 1.0
    return unproject_vector(e, cfg)


def columns(flat: Sequence[int], cfg: SystemConfig) -> np.ndarray:
    """Grid columns for several flat indices, shape ``(N_t * N_f, len(flat))``."""
    flat = np.asarray(flat, dtype=int)
    e = np.zeros((flat.size, cfg.dim), dtype=complex)
    e[np.arange(flat.size), flat - 1] = 1.0
    return unproject_vector(e, cfg).T


def project(h: ChannelSnapshot, cfg: SystemConfig) -> AngleDelayImage:
    return AngleDelayImage(g_hat=project_vector(h.h, cfg), t=h.t)


def unproject(g: AngleDelayImage, cfg: SystemConfig, band: Band = Band.UL) -> ChannelSnapshot:
    return ChannelSnapshot(t=g.t, band=band, h=unproject_vector(g.g_hat, cfg))


def select_support(images: Sequence[AngleDelayImage], eta: Optional[float] = None,
                   n_s: Optional[int] = None) -> SupportSet:
    """Rank grid columns by power summed over all images.

    Exactly one of ``eta`` (power fraction) or ``n_s`` (fixed size) must be
    given.  Equal-power columns keep ascending index order.
    """
    if (eta is None) == (n_s is None):
        raise ValueError("give exactly one of eta or n_s")
    if not images:
        raise ValueError("need at least one angle-delay image")
    lengths = {im.g_hat.size for im in images}
    if len(lengths) != 1:
        raise ValueError("angle-delay images have unequal lengths")
    power = np.sum([np.abs(im.g_hat) ** 2 for im in images], axis=0)
    total = power.sum()
    order = np.argsort(-power, kind="stable")

    if n_s is not None:
        if not 1 <= n_s <= power.size:
            raise ValueError(f"support size {n_s} outside [1, {power.size}]")
        chosen = order[:n_s]
    else:
        if not 0 < eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if total == 0:
            raise ValueError("cannot select a power-fraction support of an all-zero channel")
        if eta == 1:
            chosen = order[: np.count_nonzero(power)]
        else:
            cum = np.cumsum(power[order])
            chosen = order[: int(np.searchsorted(cum, eta * total)) + 1]
    captured = float(power[chosen].sum() / total) if total > 0 else 0.0
    return SupportSet(indices=chosen + 1, eta=eta, captured_power_fraction=captured)


def approximate(image: AngleDelayImage, s: SupportSet, cfg: SystemConfig,
                band: Band = Band.UL) -> ChannelSnapshot:
    """Channel rebuilt from the supported grid columns only."""
    g = np.zeros_like(image.g_hat)
    pos = s.positions
    g[pos] = image.g_hat[pos]
    return ChannelSnapshot(t=image.t, band=band, h=unproject_vector(g, cfg))


def captured_fraction(image: AngleDelayImage, s: SupportSet) -> float:
    p = np.abs(image.g_hat) ** 2
    return float(p[s.positions].sum() / p.sum())

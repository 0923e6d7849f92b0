"""Uplink-to-downlink mapping of angle-delay basis vectors and Doppler poles.

Angles and delays are shared by both bands, so a DL basis vector is the UL
DFT column with its spatial phases rotated from ``f_u`` to ``f_d``.  The
rotation is diagonal and is stored as a phase vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .angledelay import columns
from .channel import steering_vector
from .sysconfig import GridIndex, OffRegionError, SystemConfig, flat_to_grid, grid_to_angles

log = logging.getLogger(__name__)

SIGNED = "signed"
ARCCOS = "arccos"


@dataclass(frozen=True)
class DlBasisVector:
    index: int
    d: np.ndarray
    theta_j: Optional[float]
    phi_j: Optional[float]

    @property
    def rotated(self) -> bool:
        return self.theta_j is not None


def rotation_phases(theta, phi, cfg: SystemConfig) -> np.ndarray:
    """Diagonal of ``R_h ⊗ R_v``: the steering ramp at the carrier offset ``f_d - f_u``."""
    return steering_vector(theta, phi, cfg.f_d - cfg.f_u, cfg)


def _index_rotation(g: GridIndex, cfg: SystemConfig):
    try:
        theta, phi = grid_to_angles(g, cfg)
    except OffRegionError:
        return np.ones(cfg.n_spatial, dtype=complex), None, None
    return rotation_phases(theta, phi, cfg), theta, phi


def _rotate(q: np.ndarray, phases: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    blocks = q.reshape(cfg.N_f, cfg.P_t, cfg.n_spatial, *q.shape[1:])
    ph = phases.reshape(1, 1, cfg.n_spatial, *phases.shape[1:])
    return (blocks * ph).reshape(q.shape)


def ul_to_dl_vector(g: GridIndex, cfg: SystemConfig) -> DlBasisVector:
    """DL basis vector for grid column ``g``; each polarization block is rotated alike."""
    q = columns([g.flat], cfg)[:, 0]
    phases, theta, phi = _index_rotation(g, cfg)
    if theta is None:
        log.warning("grid index %d is off the visible region; using identity rotation", g.flat)
    return DlBasisVector(index=g.flat, d=_rotate(q, phases, cfg), theta_j=theta, phi_j=phi)


def basis_matrix(indices: Sequence[int], cfg: SystemConfig) -> np.ndarray:
    """Stack the DL basis vectors of 1-based flat ``indices`` as columns."""
    indices = [int(i) for i in indices]
    q = columns(indices, cfg)
    rot = [_index_rotation(flat_to_grid(i, cfg), cfg) for i in indices]
    off = [i for i, r in zip(indices, rot) if r[1] is None]
    if off:
        log.warning("%d of %d grid indices are off the visible region; using identity rotation "
                    "(first: %d)", len(off), len(indices), off[0])
    phases = np.stack([r[0] for r in rot], axis=1)
    return _rotate(q, phases, cfg)


def ul_to_dl_doppler(pole, cfg: SystemConfig, mode: str = SIGNED,
                     ratio: Optional[float] = None):
    """Per-slot DL phase rotation for a UL pole.

    ``mode="signed"`` keeps the Doppler sign through ``atan2``; ``"arccos"``
    reproduces the sign-dropping form.  ``ratio`` overrides ``f_d / f_u``.
    The UL phase must satisfy ``|psi| < pi / ratio`` for the map to be
    invertible.

    Raises:
        ValueError: on a zero pole or unknown mode.
    """
    z = np.asarray(pole, dtype=complex)
    if np.any(z == 0):
        raise ValueError("a zero pole carries no Doppler phase")
    if ratio is None:
        ratio = cfg.carrier_ratio
    u = z / np.abs(z)
    if mode == SIGNED:
        psi = np.angle(u)
    elif mode == ARCCOS:
        psi = np.arccos(np.clip(u.real, -1.0, 1.0))
    else:
        raise ValueError(f"unknown Doppler mapping mode {mode!r}")
    out = np.exp(1j * psi * ratio)
    return complex(out) if out.ndim == 0 else out

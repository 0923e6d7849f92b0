"""Prediction-quality metrics, closed-form error floors and overhead accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..training import ANCHOR_BITS

NMSE_FLOOR_DB = -200.0

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "n/a"


def _vec(x) -> np.ndarray:
    return np.asarray(getattr(x, "h", x))


def nmse_linear(h_true, h_pred) -> float:
    h_true, h_pred = _vec(h_true), _vec(h_pred)
    if h_true.shape != h_pred.shape:
        raise ValueError(f"shape mismatch {h_true.shape} vs {h_pred.shape}")
    energy = np.vdot(h_true, h_true).real
    if energy == 0:
        raise ValueError("NMSE is undefined for a zero true channel")
    err = h_true - h_pred
    return float(np.vdot(err, err).real / energy)


def to_db(x: float) -> float:
    """dB value clipped at :data:`NMSE_FLOOR_DB`."""
    if x <= 10 ** (NMSE_FLOOR_DB / 10):
        return NMSE_FLOOR_DB
    return 10 * math.log10(x)


def nmse_db(h_true, h_pred) -> float:
    return to_db(nmse_linear(h_true, h_pred))


def mean_nmse_db(values_linear: Sequence[float]) -> float:
    """Aggregate over drops: linear mean, then dB."""
    if len(values_linear) == 0:
        return float("nan")
    return to_db(float(np.mean(values_linear)))


def noise_floor_db(sigma2: float, N_s: int, M: int, mean_h_energy: float) -> float:
    """Full-support error floor ``10 log10(sigma2 * N_s * M / E||h||^2)``."""
    if sigma2 < 0 or N_s < 1 or M < 1 or mean_h_energy <= 0:
        raise ValueError("noise_floor_db needs sigma2 >= 0 and positive sizes/energy")
    if sigma2 == 0:
        return float("-inf")
    return 10 * math.log10(sigma2 * N_s * M / mean_h_energy)


@dataclass(frozen=True)
class BoundTerms:
    """Per-drop ingredients of the error sandwich (all linear, normalized by ``||h||^2``)."""

    nmse: float
    projection_error: float
    noise_term: float
    sigma2: float = math.nan
    energy: float = math.nan


@dataclass(frozen=True)
class BoundCheck:
    outcome: str
    lower: float
    upper: float
    mean_nmse: float
    allowance: float


def check_error_bounds(terms: Sequence[BoundTerms], z: float = 3.0,
                       atol: float = 1e-9) -> BoundCheck:
    """Check ``E[proj] - E[noise] <= E[nmse] <= E[proj] + E[noise]`` over drops.

    Expectations are sample means; the band is widened by ``z`` standard
    errors of ``nmse - proj`` to absorb Monte-Carlo spread.  With no noise
    the band collapses and every drop must match its projection error.
    """
    if not terms:
        return BoundCheck(NOT_APPLICABLE, math.nan, math.nan, math.nan, 0.0)
    nmse = np.array([t.nmse for t in terms])
    proj = np.array([t.projection_error for t in terms])
    noise = np.array([t.noise_term for t in terms])
    if np.all(noise == 0):
        ok = np.all(np.abs(nmse - proj) <= atol * np.maximum(1.0, proj))
        return BoundCheck(PASS if ok else FAIL, float(proj.mean()), float(proj.mean()),
                          float(nmse.mean()), 0.0)
    lower = float(proj.mean() - noise.mean())
    upper = float(proj.mean() + noise.mean())
    spread = float(np.std(nmse - proj, ddof=1)) if len(terms) > 1 else 0.0
    allowance = z * spread / math.sqrt(len(terms)) + atol
    mean = float(nmse.mean())
    ok = lower - allowance <= mean <= upper + allowance
    return BoundCheck(PASS if ok else FAIL, lower, upper, mean, allowance)


def _per_subcarrier(h, n_t: int) -> np.ndarray:
    h = np.asarray([_vec(x) for x in h]) if not isinstance(h, np.ndarray) else h
    if h.ndim == 1:
        h = h[None]
    return h.reshape(h.shape[0], -1, n_t).transpose(1, 0, 2)


def spectral_efficiency(h_true, h_pred, noise_power: float, n_t: int) -> float:
    """Sum rate over UEs in bits/s/Hz, averaged over subcarriers.

    ``h_true``/``h_pred`` hold one space-frequency vector per UE.  Precoders
    come from ``h_pred``: matched filter for one UE, zero forcing otherwise,
    each with unit-norm columns.  SINR is evaluated on ``h_true``.
    """
    if noise_power <= 0:
        raise ValueError("noise power must be positive")
    ht = _per_subcarrier(h_true, n_t)
    hp = _per_subcarrier(h_pred, n_t)
    if ht.shape != hp.shape:
        raise ValueError("true and predicted channels differ in shape")
    k = ht.shape[1]
    if k == 1:
        w = hp.conj().transpose(0, 2, 1)
    else:
        w = np.linalg.pinv(hp)
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    w = np.divide(w, norms, out=np.zeros_like(w), where=norms > 0)
    gains = np.abs(ht @ w) ** 2
    signal = np.diagonal(gains, axis1=1, axis2=2)
    interference = gains.sum(axis=2) - signal
    return float(np.mean(np.sum(np.log2(1 + signal / (interference + noise_power)), axis=1)))


@dataclass(frozen=True)
class FeedbackOverhead:
    scalars_per_interval: float
    bits: int


def feedback_overhead(N_s: int, M: int, N_c: int = 1, C_a: Optional[int] = None,
                      C_p: Optional[int] = None) -> FeedbackOverhead:
    """Feedback scalars per coherence interval ``N_s M / N_c`` and payload bits.

    Unquantized coefficients count two 64-bit floats each.  Both forms add
    one 64-bit scale anchor; the 8-byte size header is not counted.
    """
    if N_s < 1 or M < 1 or N_c < 1:
        raise ValueError("feedback sizes must be positive")
    per = 128 if C_a is None or C_p is None else C_a + C_p
    return FeedbackOverhead(N_s * M / N_c, N_s * M * per + ANCHOR_BITS)

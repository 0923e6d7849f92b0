"""Matrix Pencil pole estimation on angle-delay gain series.

Each selected grid column carries a complex gain sampled once per SRS
slot.  The gain is modelled as ``sum_m a_m z_m**(t - t_1)``; the poles
``z_m`` are the eigenvalues of ``pinv(P0) @ P1`` for the Hankel pair built
from the series.  Noisy series first go through MDL order detection and a
rank-M truncated SVD.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .angledelay import SupportSet, project_vector, select_support
from .sysconfig import SystemConfig

EPS = np.finfo(float).eps


class RankDeficiencyError(ValueError):
    """Requested pole count exceeds the numerical rank of the data."""


class DuplicatePoleError(ValueError):
    """Poles too close for a well-posed Vandermonde amplitude fit."""


@dataclass(frozen=True)
class GainSeries:
    index: int
    values: np.ndarray
    slot_times: np.ndarray

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("a gain series needs at least two samples")
        if len(self.values) != len(self.slot_times):
            raise ValueError("values and slot_times differ in length")
        steps = np.diff(self.slot_times)
        if not np.all(steps == 1):
            raise ValueError("slot times must be consecutive slots")

    @property
    def n(self) -> int:
        return len(self.values)

    @classmethod
    def from_values(cls, values, index: int = 1, t0: int = 0) -> "GainSeries":
        values = np.asarray(values, dtype=complex)
        return cls(index=index, values=values, slot_times=np.arange(t0, t0 + values.size))


@dataclass(frozen=True)
class PoleModel:
    index: int
    poles: np.ndarray
    amplitudes: np.ndarray
    residual: float = 0.0

    @property
    def order(self) -> int:
        return len(self.poles)


@dataclass(frozen=True)
class UlParamEstimate:
    support: SupportSet
    models: list[PoleModel]
    L: int
    t_ref: int = 0
    noisy: bool = False

    def __post_init__(self):
        if len(self.models) != len(self.support):
            raise ValueError("need one pole model per support index")

    @property
    def orders(self) -> list[int]:
        return [m.order for m in self.models]


def rank_tolerance(s: np.ndarray, shape: tuple[int, int]) -> float:
    """Singular values at or below this are treated as zero."""
    if s.size == 0:
        return 0.0
    return max(shape) * EPS * float(s.max())


def _pinv(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Moore-Penrose inverse and numerical rank, batched over leading axes."""
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    tol = max(a.shape[-2:]) * EPS * s[..., :1]
    keep = s > tol
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    inv = np.swapaxes(vh.conj(), -1, -2) @ (s_inv[..., :, None] * np.swapaxes(u.conj(), -1, -2))
    return inv, keep.sum(axis=-1)


def hankel_pair(values: np.ndarray, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Hankel pair for series stacked along the leading axes of ``values``."""
    values = np.asarray(values)
    n = values.shape[-1]
    if not 1 <= L <= n - 1:
        raise ValueError(f"prediction order L={L} outside [1, {n - 1}]")
    rows = np.arange(n - L)[:, None]
    cols = np.arange(L)[None, :]
    # 0-based sample (L - 1 + r - c) is t_{L + r - c} in 1-based notation.
    return values[..., L - 1 + rows - cols], values[..., L + rows - cols]


def build_prediction_matrices(s: GainSeries, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Hankel pair ``(P0, P1)``, each ``(N_L - L) x L``; ``P1`` is one slot ahead."""
    return hankel_pair(s.values, L)


def _select_largest(ev: np.ndarray, m: int) -> np.ndarray:
    modulus = -np.round(np.abs(ev), 12)
    order = np.lexsort((np.angle(ev), modulus), axis=-1)
    return np.take_along_axis(ev, order[..., :m], axis=-1)


def estimate_poles(p0: np.ndarray, p1: np.ndarray, M: int) -> np.ndarray:
    """``M`` largest-modulus eigenvalues of ``pinv(P0) @ P1``.

    Stacked pencils (leading batch axes) are solved in one call.

    Raises:
        RankDeficiencyError: if ``P0`` has numerical rank below ``M``.
    """
    if M < 1 or M > min(p0.shape[-2:]):
        raise ValueError(f"pole count M={M} must lie in [1, {min(p0.shape[-2:])}]")
    inv, rank = _pinv(p0)
    if np.any(rank < M):
        raise RankDeficiencyError(f"prediction matrix rank {int(np.min(rank))} < requested M={M}")
    ev = np.linalg.eigvals(inv @ p1)
    return _select_largest(ev, M)


def augmented_matrix(s: GainSeries, L: int) -> np.ndarray:
    """``[p(t_{L+1}) | P0]``: first column of ``P1`` followed by ``P0``."""
    p0, p1 = build_prediction_matrices(s, L)
    return np.hstack([p1[:, :1], p0])


def mdl_objective(sv: np.ndarray, n_obs: int, max_order: Optional[int] = None) -> np.ndarray:
    """Minimum description length for ``k = 0 .. max_order`` signal components.

    ``sv`` holds the spectrum (any order); values below the rank tolerance
    are floored so that a noise-free tail reads as exactly flat.
    """
    lam = np.sort(np.asarray(sv, dtype=float))[::-1]
    p = lam.size
    if max_order is None:
        max_order = p - 1
    floor = max(lam[0] * p * EPS, np.finfo(float).tiny)
    lam = np.maximum(lam, floor)
    out = np.empty(max_order + 1)
    for k in range(max_order + 1):
        tail = lam[k:]
        log_ratio = np.mean(np.log(tail)) - math.log(np.mean(tail))
        out[k] = -n_obs * (p - k) * log_ratio + 0.5 * k * (2 * p - k) * math.log(n_obs)
    return out


def detect_order_mdl(s: GainSeries, L: int) -> int:
    """Number of exponential components in ``s`` by MDL, at least one."""
    if not np.any(s.values):
        raise ValueError("cannot detect the order of an all-zero series")
    if L < 1 or s.n <= L:
        raise ValueError(f"need 1 <= L < N_L, got L={L}, N_L={s.n}")
    sv = np.linalg.svd(augmented_matrix(s, L), compute_uv=False)
    scores = mdl_objective(sv, s.n, max_order=min(L - 1, sv.size - 1))
    return max(int(np.argmin(scores)), 1)


def denoise_truncated_svd(s: GainSeries, L: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank-``M`` pencil pair ``(P0_M, P1_M)`` from the augmented matrix."""
    if M < 1:
        raise ValueError("truncation order M must be at least 1")
    if M > L:
        raise ValueError(f"truncation order M={M} exceeds L={L}")
    a = augmented_matrix(s, L)
    u, sv, vh = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(sv > rank_tolerance(sv, a.shape)))
    if M > rank:
        raise RankDeficiencyError(f"augmented matrix rank {rank} < requested M={M}")
    us = u[:, :M] * sv[:M]
    v = vh[:M].conj().T
    p1 = us @ v[:L].conj().T
    p0 = us @ v[1:].conj().T
    return p0, p1


def fit_amplitudes(s: GainSeries, poles: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares amplitudes for ``poles`` and the relative training residual."""
    poles = np.asarray(poles, dtype=complex)
    if poles.size > 1:
        gap = np.abs(poles[:, None] - poles[None, :])[np.triu_indices(poles.size, 1)]
        if gap.min() <= 1e-9 * max(1.0, np.abs(poles).max()):
            raise DuplicatePoleError("duplicated poles make the Vandermonde fit singular")
    k = (s.slot_times - s.slot_times[0])[:, None]
    vander = poles[None, :] ** k
    amps, *_ = np.linalg.lstsq(vander, s.values, rcond=None)
    norm = np.linalg.norm(s.values)
    resid = np.linalg.norm(vander @ amps - s.values)
    return amps, float(resid / norm) if norm > 0 else float(resid)


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return samples
    return np.stack([getattr(x, "h", x) for x in samples])


def run_doppler_estimation(samples, cfg: SystemConfig, L: int, *, eta: Optional[float] = None,
                           n_s: Optional[int] = None, noisy: bool = False,
                           shared_order: bool = True, t0: int = 0) -> UlParamEstimate:
    """Estimate the angle-delay support and per-column poles from UL samples.

    ``samples`` are ``N_L`` consecutive uplink channels (snapshots or rows).
    Noise-free mode fits ``M = L`` poles directly; noisy mode detects ``M``
    by MDL and denoises with a truncated SVD before the pencil step.
    """
    from .angledelay import AngleDelayImage

    h = _as_matrix(samples)
    n_l = h.shape[0]
    if n_l < 2:
        raise ValueError("need at least two uplink samples")
    g = project_vector(h, cfg)
    support = select_support([AngleDelayImage(row, t0 + k) for k, row in enumerate(g)],
                             eta=eta, n_s=n_s)
    slots = np.arange(t0, t0 + n_l)
    series = [GainSeries(int(i), g[:, i - 1], slots) for i in support.indices]

    if noisy:
        if L < 2:
            raise ValueError("noisy mode needs L >= 2 so that M < L")
        orders = [detect_order_mdl(s, L) for s in series]
        if shared_order:
            counts = Counter(orders)
            best = max(counts.values())
            orders = [min(k for k, c in counts.items() if c == best)] * len(series)
    else:
        orders = [L] * len(series)

    models = []
    for s, m in zip(series, orders):
        if noisy:
            p0, p1 = denoise_truncated_svd(s, L, m)
        else:
            p0, p1 = build_prediction_matrices(s, L)
        poles = estimate_poles(p0, p1, m)
        amps, resid = fit_amplitudes(s, poles)
        models.append(PoleModel(index=s.index, poles=poles, amplitudes=amps, residual=resid))
    return UlParamEstimate(support=support, models=models, L=L, t_ref=t0, noisy=noisy)

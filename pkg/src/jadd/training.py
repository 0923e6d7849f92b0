"""Downlink training round trip with the joint angle-delay-Doppler precoder.

The BS precodes ``tau = N_s * M`` pilot symbols with ``F(t)`` so that the
UE sees only the ``N_s * M`` Doppler coefficients, estimates them by least
squares and feeds them back.  The BS then extrapolates the DL channel with
the UL-derived Doppler phases.

Vector layout: space-frequency channels are subcarrier-major (``N_t``
entries per subcarrier); coefficient vectors are index-major, pole-minor.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import Band, ChannelSnapshot
from .pencil import UlParamEstimate
from .sysconfig import SystemConfig
from .ul2dl import SIGNED, basis_matrix, ul_to_dl_doppler

ANCHOR_BITS = 64
_HEADER = struct.Struct("<II")


@dataclass(frozen=True)
class DlTrainingState:
    """BS-side model: basis ``D``, per-slot DL Doppler phases and time anchor.

    ``dopplers[j, m]`` is the DL phase rotation per slot of pole ``m`` at
    support index ``j``; ``E(t)`` uses ``dopplers ** (t - t_ref)``.
    """

    D: np.ndarray
    dopplers: np.ndarray
    t_train: int
    t_ref: int = 0
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.D.ndim != 2 or self.dopplers.ndim != 2:
            raise ValueError("D and dopplers must be matrices")
        if self.D.shape[1] != self.dopplers.shape[0]:
            raise ValueError("one Doppler row per basis column is required")
        if not np.allclose(np.abs(self.dopplers), 1.0, atol=1e-12):
            raise ValueError("DL Doppler phases must have unit modulus")

    @property
    def N_s(self) -> int:
        return self.D.shape[1]

    @property
    def M(self) -> int:
        return self.dopplers.shape[1]

    @property
    def tau_len(self) -> int:
        return self.N_s * self.M

    def doppler_rows(self, t: int) -> np.ndarray:
        """``e_j(t)`` stacked as an ``N_s x M`` array."""
        return self.dopplers ** (t - self.t_ref)

    def E(self, t: int) -> np.ndarray:
        """The block-diagonal ``N_s x N_s*M`` Doppler matrix at slot ``t``."""
        rows = self.doppler_rows(t)
        out = np.zeros((self.N_s, self.tau_len), dtype=complex)
        for j in range(self.N_s):
            out[j, j * self.M:(j + 1) * self.M] = rows[j]
        return out


@dataclass(frozen=True)
class FeedbackVector:
    """UE-estimated coefficients; codeword indices are set when quantized."""

    a_hat: np.ndarray
    M: int = 1
    quantized: bool = False
    C_a: Optional[int] = None
    C_p: Optional[int] = None
    anchor: float = 0.0
    amp_idx: Optional[np.ndarray] = None
    phase_idx: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.a_hat.ndim != 1 or self.M < 1 or self.a_hat.size % self.M:
            raise ValueError("coefficient length must be a multiple of M")

    @property
    def N_s(self) -> int:
        return self.a_hat.size // self.M


@dataclass(frozen=True)
class PilotMatrix:
    S: np.ndarray

    @property
    def tau(self) -> int:
        return self.S.shape[1]


def build_training_state(est: UlParamEstimate, cfg: SystemConfig, t_train: int,
                         mode: str = SIGNED) -> DlTrainingState:
    if not est.models:
        raise ValueError("empty UL estimate")
    orders = {m.order for m in est.models}
    if len(orders) != 1:
        raise ValueError(f"support indices carry different pole counts {sorted(orders)}")
    poles = np.stack([m.poles for m in est.models])
    dopplers = np.asarray(ul_to_dl_doppler(poles, cfg, mode=mode)).reshape(poles.shape)
    D = basis_matrix(est.support.indices, cfg)
    return DlTrainingState(D=D, dopplers=dopplers, t_train=int(t_train), t_ref=est.t_ref,
                           indices=np.asarray(est.support.indices))


def basis_right_inverse(D: np.ndarray) -> np.ndarray:
    """``(D^T)^†``; equals ``conj(D)`` when the columns are orthonormal."""
    gram = D.conj().T @ D
    if np.allclose(gram, np.eye(D.shape[1]), atol=1e-10):
        return D.conj()
    # conj(D) conj(G)^{-1} = conj(D G^{-1})
    return np.linalg.solve(gram.T, D.T).T.conj()


def doppler_right_inverse(state: DlTrainingState, t: int) -> np.ndarray:
    """``(E(t)^T)^†``: block rows ``conj(e_j) / ||e_j||^2``, shape ``N_s x N_s*M``."""
    rows = state.doppler_rows(t)
    norms = np.sum(np.abs(rows) ** 2, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("degenerate Doppler block")
    inv_rows = rows.conj() / norms
    out = np.zeros((state.N_s, state.tau_len), dtype=complex)
    for j in range(state.N_s):
        out[j, j * state.M:(j + 1) * state.M] = inv_rows[j]
    return out


def build_precoder(state: DlTrainingState, t: Optional[int] = None) -> np.ndarray:
    """``F(t) = (D^T)^† (E(t)^T)^†``, shape ``N_t*N_f x N_s*M``."""
    t = state.t_train if t is None else t
    return basis_right_inverse(state.D) @ doppler_right_inverse(state, t)


def build_pilot(n: int) -> PilotMatrix:
    """Unitary ``n x n`` pilot: the normalized DFT matrix."""
    if n < 1:
        raise ValueError("pilot dimension must be at least 1")
    k = np.arange(n)
    return PilotMatrix(np.exp(-2j * np.pi * np.outer(k, k) / n) / math.sqrt(n))


def pilot_noise_variance(y_clean: np.ndarray, pilot_snr_db: float) -> float:
    if math.isinf(pilot_snr_db) and pilot_snr_db > 0:
        return 0.0
    return float(np.mean(np.abs(y_clean) ** 2) / 10 ** (pilot_snr_db / 10))


def simulate_dl_training(h_d: ChannelSnapshot, F: np.ndarray, S: PilotMatrix,
                         pilot_snr_db: float, rng: Optional[np.random.Generator] = None,
                         return_sigma2: bool = False):
    """Received pilot row ``y = h^T F S + n`` summed over all subcarriers.

    Noise power is set per pilot symbol relative to the mean of ``|h^T F S|^2``.
    """
    y = (h_d.h @ F) @ S.S
    sigma2 = pilot_noise_variance(y, pilot_snr_db)
    if sigma2 > 0:
        if rng is None:
            raise ValueError("a noisy training round needs an RNG")
        y = y + math.sqrt(sigma2 / 2) * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    return (y, sigma2) if return_sigma2 else y


def received_per_subcarrier(h_d: ChannelSnapshot, F: np.ndarray, S: PilotMatrix,
                            cfg: SystemConfig) -> np.ndarray:
    """Noise-free received row accumulated subcarrier by subcarrier."""
    y = np.zeros(S.tau, dtype=complex)
    for f in range(cfg.N_f):
        rows = slice(f * cfg.N_t, (f + 1) * cfg.N_t)
        y += h_d.h[rows] @ F[rows] @ S.S
    return y


def _pinv(a: np.ndarray) -> np.ndarray:
    """Pseudo-inverse with the package-wide rank tolerance."""
    return np.linalg.pinv(a, rcond=max(a.shape) * np.finfo(float).eps)


def estimate_coefficients(y: np.ndarray, S: PilotMatrix, state: DlTrainingState) -> FeedbackVector:
    """Least-squares ``a_hat = (S^T E^† E)^† y^T`` at the training slot."""
    E = state.E(state.t_train)
    proj = _pinv(E) @ E
    a_hat = _pinv(S.S.T @ proj) @ np.asarray(y).reshape(-1)
    return FeedbackVector(a_hat=a_hat, M=state.M)


def projection_residual(y: np.ndarray, S: PilotMatrix, state: DlTrainingState,
                        fb: FeedbackVector) -> float:
    """Relative misfit of the LS model; nonzero when ``y`` leaves the model's range."""
    E = state.E(state.t_train)
    model = S.S.T @ (_pinv(E) @ E) @ fb.a_hat
    y = np.asarray(y).reshape(-1)
    norm = np.linalg.norm(y)
    return float(np.linalg.norm(model - y) / norm) if norm > 0 else 0.0


def amplitude_codebook(C_a: int) -> np.ndarray:
    """``(1/sqrt 2)**k`` for ``k = 0 .. 2**C_a - 2`` followed by zero."""
    levels = 2 ** C_a - 1
    return np.append(2.0 ** (-0.5 * np.arange(levels)), 0.0)


def phase_codebook(C_p: int) -> np.ndarray:
    return 2 * np.pi * np.arange(2 ** C_p) / 2 ** C_p


def _unbounded(bits) -> bool:
    return bits is None or (isinstance(bits, float) and math.isinf(bits))


def quantize_feedback(fb: FeedbackVector, C_a=None, C_p=None) -> FeedbackVector:
    """Map each coefficient to amplitude/phase codewords; ``None`` or ``inf`` bits is identity."""
    if _unbounded(C_a) and _unbounded(C_p):
        return fb
    if _unbounded(C_a) or _unbounded(C_p):
        raise ValueError("quantize both amplitude and phase or neither")
    C_a, C_p = int(C_a), int(C_p)
    if C_a < 1 or C_p < 1 or C_a > 16 or C_p > 16:
        raise ValueError("codebook bits must lie in [1, 16]")
    mag = np.abs(fb.a_hat)
    anchor = float(mag.max()) if mag.size else 0.0
    amps = amplitude_codebook(C_a)
    rel = mag / anchor if anchor > 0 else np.zeros_like(mag)
    amp_idx = np.argmin(np.abs(rel[:, None] - amps[None, :]), axis=1)
    n_p = 2 ** C_p
    phase_idx = np.mod(np.rint(np.mod(np.angle(fb.a_hat), 2 * np.pi) * n_p / (2 * np.pi)), n_p).astype(int)
    return dequantize(amp_idx, phase_idx, anchor, fb.M, C_a, C_p)


def dequantize(amp_idx, phase_idx, anchor: float, M: int, C_a: int, C_p: int) -> FeedbackVector:
    amp_idx = np.asarray(amp_idx, dtype=int)
    phase_idx = np.asarray(phase_idx, dtype=int)
    a = anchor * amplitude_codebook(C_a)[amp_idx] * np.exp(1j * phase_codebook(C_p)[phase_idx])
    return FeedbackVector(a_hat=a, M=M, quantized=True, C_a=C_a, C_p=C_p, anchor=anchor,
                          amp_idx=amp_idx, phase_idx=phase_idx)


def serialize_feedback(fb: FeedbackVector) -> bytes:
    """Wire format: ``u32 N_s, u32 M``, then per coefficient either two ``u16``
    codeword indices or two ``f64`` (re, im), then one ``f64`` scale anchor."""
    head = _HEADER.pack(fb.N_s, fb.M)
    if fb.quantized:
        body = np.column_stack([fb.amp_idx, fb.phase_idx]).astype("<u2").tobytes()
    else:
        body = np.column_stack([fb.a_hat.real, fb.a_hat.imag]).astype("<f8").tobytes()
    return head + body + struct.pack("<d", fb.anchor)


def deserialize_feedback(buf: bytes, quantized: bool = False, C_a: Optional[int] = None,
                         C_p: Optional[int] = None) -> FeedbackVector:
    """Inverse of :func:`serialize_feedback`; the mode and bit widths travel out of band."""
    n_s, M = _HEADER.unpack_from(buf)
    n = n_s * M
    width = 4 if quantized else 16
    expected = _HEADER.size + n * width + 8
    if len(buf) != expected:
        raise ValueError(f"feedback payload has {len(buf)} bytes, expected {expected}")
    body = buf[_HEADER.size:_HEADER.size + n * width]
    (anchor,) = struct.unpack_from("<d", buf, _HEADER.size + n * width)
    if quantized:
        idx = np.frombuffer(body, dtype="<u2").reshape(n, 2).astype(int)
        return dequantize(idx[:, 0], idx[:, 1], anchor, M, C_a, C_p)
    pairs = np.frombuffer(body, dtype="<f8").reshape(n, 2)
    return FeedbackVector(a_hat=pairs[:, 0] + 1j * pairs[:, 1], M=M, anchor=anchor)


def feedback_bits(N_s: int, M: int, C_a: int, C_p: int) -> int:
    """Payload bits for quantized feedback, scale anchor included."""
    return N_s * M * (C_a + C_p) + ANCHOR_BITS


def predict_channel(state: DlTrainingState, fb: FeedbackVector, t_target: int) -> ChannelSnapshot:
    """``h(t) = D E(t) a_hat`` extrapolated with the absolute-slot Doppler phases."""
    if t_target < state.t_train:
        raise ValueError("prediction target precedes the training slot")
    if fb.a_hat.size != state.tau_len:
        raise ValueError("feedback length does not match the training state")
    coef = np.sum((state.doppler_rows(t_target) * fb.a_hat.reshape(state.N_s, state.M)), axis=1)
    return ChannelSnapshot(t=int(t_target), band=Band.DL, h=state.D @ coef)

"""Monte-Carlo scenario harness: UL sounding, DL training, prediction, metrics."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..channel import Band, ClusterSpec, PathSet, add_sample_noise, channel_at, channel_series, synth_paths
from ..channel import ChannelSnapshot
from ..pencil import run_doppler_estimation
from ..sysconfig import ConfigError, SystemConfig
from ..training import (build_pilot, build_precoder, build_training_state, deserialize_feedback,
                        estimate_coefficients, predict_channel, quantize_feedback,
                        serialize_feedback, simulate_dl_training)
from ..ul2dl import SIGNED
from .metrics import (BoundCheck, BoundTerms, FeedbackOverhead, check_error_bounds,
                      feedback_overhead, mean_nmse_db, nmse_linear, spectral_efficiency, to_db)

log = logging.getLogger(__name__)

FAILURE_FLAG_FRACTION = 0.05


@dataclass(frozen=True)
class ScenarioSpec:
    """One Monte-Carlo experiment.

    ``fixed_paths`` replaces the clustered draw with a given path set (one
    per UE); ``speed_kmh`` overrides the cluster speed when set.  Samples are
    taken at the ``N_L`` slots ending at ``t_e``; training happens at
    ``t_e`` and the prediction target is ``t_e + N_d``.
    """

    cfg: SystemConfig = field(default_factory=SystemConfig)
    cluster: ClusterSpec = field(default_factory=ClusterSpec)
    speed_kmh: Optional[float] = None
    sample_snr_db: float = math.inf
    pilot_snr_db: float = math.inf
    N_L: int = 10
    L: int = 2
    n_s: Optional[int] = None
    eta: Optional[float] = None
    N_d: Optional[int] = None
    C_a: Optional[int] = None
    C_p: Optional[int] = None
    drops: int = 1
    seed: int = 0
    t_s: int = 0
    t_e: Optional[int] = None
    noisy: Optional[bool] = None
    doppler_mode: str = SIGNED
    n_ues: int = 1
    se_snr_db: float = 10.0
    scenario_id: str = "scenario"
    fixed_paths: Optional[tuple] = None

    def __post_init__(self):
        if self.drops < 1:
            raise ConfigError("drops must be ≥1")
        if self.N_L < 2:
            raise ConfigError("N_L must be ≥2")
        if (self.n_s is None) == (self.eta is None):
            raise ConfigError("give exactly one of n_s or eta")
        if self.end_slot < self.t_s + self.N_L - 1:
            raise ConfigError("estimation window shorter than N_L slots")
        if self.n_ues < 1:
            raise ConfigError("n_ues must be ≥1")
        if (self.C_a is None) != (self.C_p is None):
            raise ConfigError("set both C_a and C_p or neither")
        if self.fixed_paths is not None and len(self.fixed_paths) != self.n_ues:
            raise ConfigError("fixed_paths needs one path set per UE")

    @property
    def end_slot(self) -> int:
        return self.t_s + self.N_L - 1 if self.t_e is None else self.t_e

    @property
    def delay_slots(self) -> int:
        return self.cfg.N_d if self.N_d is None else self.N_d

    @property
    def td_ms(self) -> float:
        return self.delay_slots * self.cfg.T_srs * 1e3

    @property
    def is_noisy(self) -> bool:
        return math.isfinite(self.sample_snr_db) if self.noisy is None else self.noisy

    @property
    def quantized(self) -> bool:
        return self.C_a is not None

    def replace(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DropResult:
    drop: int
    ok: bool
    nmse: float = math.nan
    nmse_stale: float = math.nan
    nmse_quant: float = math.nan
    se: float = math.nan
    se_stale: float = math.nan
    n_s: int = 0
    M: int = 0
    bounds: tuple = ()
    error: str = ""

    @property
    def nmse_db(self) -> float:
        return to_db(self.nmse) if self.ok else math.nan

    @property
    def nmse_stale_db(self) -> float:
        return to_db(self.nmse_stale) if self.ok else math.nan


@dataclass(frozen=True)
class RunReport:
    spec: ScenarioSpec
    drops: list
    bound_check: BoundCheck
    overhead: Optional[FeedbackOverhead]
    wall_clock: float = 0.0

    @property
    def completed(self) -> list:
        return [d for d in self.drops if d.ok]

    @property
    def n_failed(self) -> int:
        return len(self.drops) - len(self.completed)

    @property
    def flagged(self) -> bool:
        return self.n_failed > FAILURE_FLAG_FRACTION * len(self.drops)

    def _agg(self, name: str) -> float:
        return mean_nmse_db([getattr(d, name) for d in self.completed])

    @property
    def nmse_db(self) -> float:
        return self._agg("nmse")

    @property
    def nmse_stale_db(self) -> float:
        return self._agg("nmse_stale")

    @property
    def nmse_quant_db(self) -> float:
        return self._agg("nmse_quant")

    @property
    def se(self) -> float:
        return float(np.mean([d.se for d in self.completed])) if self.completed else math.nan

    @property
    def se_stale(self) -> float:
        return float(np.mean([d.se_stale for d in self.completed])) if self.completed else math.nan

    def summary(self) -> dict:
        return {
            "scenario_id": self.spec.scenario_id,
            "drops": len(self.drops),
            "failed": self.n_failed,
            "flagged": self.flagged,
            "nmse_db": self.nmse_db,
            "nmse_stale_db": self.nmse_stale_db,
            "nmse_quant_db": self.nmse_quant_db if self.spec.quantized else None,
            "se_relative": self.se,
            "se_stale_relative": self.se_stale,
            "bound_check": self.bound_check.outcome,
            "wall_clock_s": self.wall_clock,
        }


def drop_generators(seed: int, drops: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(drops)]


def _draw_paths(spec: ScenarioSpec, rng: np.random.Generator) -> list[PathSet]:
    if spec.fixed_paths is not None:
        return list(spec.fixed_paths)
    cluster = spec.cluster
    if spec.speed_kmh is not None:
        cluster = dataclasses.replace(cluster, speed_kmh=spec.speed_kmh)
    return [synth_paths(cluster, rng) for _ in range(spec.n_ues)]


def _ue_round(spec: ScenarioSpec, paths: PathSet, rng: np.random.Generator):
    cfg = spec.cfg
    t_e = spec.end_slot
    t_p = t_e + spec.delay_slots
    slots = np.arange(t_e - spec.N_L + 1, t_e + 1)
    ul = channel_series(paths, slots, Band.UL, cfg)
    if math.isfinite(spec.sample_snr_db):
        ul = np.stack([add_sample_noise(ChannelSnapshot(int(t), Band.UL, h), spec.sample_snr_db, rng).h
                       for t, h in zip(slots, ul)])
    est = run_doppler_estimation(ul, cfg, spec.L, eta=spec.eta, n_s=spec.n_s,
                                 noisy=spec.is_noisy, t0=int(slots[0]))
    state = build_training_state(est, cfg, t_train=t_e, mode=spec.doppler_mode)
    F = build_precoder(state)
    S = build_pilot(state.tau_len)
    h_train = channel_at(paths, t_e, Band.DL, cfg)
    y, sigma2 = simulate_dl_training(h_train, F, S, spec.pilot_snr_db, rng, return_sigma2=True)
    fb = estimate_coefficients(y, S, state)
    pred = predict_channel(state, fb, t_p)
    truth = channel_at(paths, t_p, Band.DL, cfg)

    pred_q = pred
    if spec.quantized:
        q = quantize_feedback(fb, spec.C_a, spec.C_p)
        q = deserialize_feedback(serialize_feedback(q), quantized=True, C_a=spec.C_a, C_p=spec.C_p)
        pred_q = predict_channel(state, q, t_p)

    energy = float(np.vdot(truth.h, truth.h).real)
    inside = state.D @ (state.D.conj().T @ truth.h)
    proj = float(np.vdot(truth.h - inside, truth.h - inside).real / energy)
    bounds = BoundTerms(nmse=nmse_linear(truth, pred), projection_error=proj,
                        noise_term=state.tau_len * sigma2 / energy, sigma2=sigma2, energy=energy)
    return dict(truth=truth.h, pred=pred.h, pred_q=pred_q.h, stale=h_train.h,
                n_s=state.N_s, M=state.M, bounds=bounds)


def run_drop(spec: ScenarioSpec, drop: int, rng: np.random.Generator) -> DropResult:
    try:
        ues = [_ue_round(spec, p, rng) for p in _draw_paths(spec, rng)]
    except (ValueError, np.linalg.LinAlgError) as exc:
        log.info("drop %d failed: %s", drop, exc)
        return DropResult(drop=drop, ok=False, error=f"{type(exc).__name__}: {exc}")
    truth = np.stack([u["truth"] for u in ues])
    n_t = spec.cfg.N_t
    noise = float(np.mean(np.abs(truth) ** 2)) * n_t / 10 ** (spec.se_snr_db / 10)
    mean = lambda key: float(np.mean([nmse_linear(u["truth"], u[key]) for u in ues]))
    return DropResult(
        drop=drop,
        ok=True,
        nmse=mean("pred"),
        nmse_stale=mean("stale"),
        nmse_quant=mean("pred_q"),
        se=spectral_efficiency(truth, np.stack([u["pred"] for u in ues]), noise, n_t),
        se_stale=spectral_efficiency(truth, np.stack([u["stale"] for u in ues]), noise, n_t),
        n_s=ues[0]["n_s"],
        M=ues[0]["M"],
        bounds=tuple(u["bounds"] for u in ues),
    )


def run_scenario(spec: ScenarioSpec, threads: int = 1) -> RunReport:
    """Run all drops; results are identical for any ``threads``."""
    start = time.perf_counter()
    rngs = drop_generators(spec.seed, spec.drops)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            drops = list(pool.map(lambda k: run_drop(spec, k, rngs[k]), range(spec.drops)))
    else:
        drops = [run_drop(spec, k, rngs[k]) for k in range(spec.drops)]
    terms = [b for d in drops if d.ok for b in d.bounds]
    done = [d for d in drops if d.ok]
    overhead = None
    if done:
        overhead = feedback_overhead(done[0].n_s, done[0].M, 1, spec.C_a, spec.C_p)
    report = RunReport(spec=spec, drops=drops, bound_check=check_error_bounds(terms),
                       overhead=overhead, wall_clock=time.perf_counter() - start)
    if report.flagged:
        log.warning("%s: %d of %d drops failed", spec.scenario_id, report.n_failed, spec.drops)
    return report

"""Invariant suite behind ``jadd selftest``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..angledelay import dense_transform, project_vector
from ..channel import ClusterSpec, PathParams, PathSet
from ..pencil import estimate_poles, hankel_pair
from ..sysconfig import SPEED_OF_LIGHT, GridIndex, SystemConfig, grid_to_angles, grid_to_flat
from ..ul2dl import basis_matrix
from .metrics import PASS
from .runner import RunReport, ScenarioSpec, run_scenario


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def fine_grid_config(N_f: int = 32) -> SystemConfig:
    """4x4 single-polarized array at half the UL wavelength; every vertical bin is on-region."""
    lam = SPEED_OF_LIGHT / 1.92e9
    return SystemConfig(N_v=4, N_h=4, P_t=1, l_v=lam / 2, l_h=lam / 2, N_f=N_f)


def on_grid_paths(cfg: SystemConfig, rng: np.random.Generator, n_paths: int,
                  speed_kmh: float = 350.0) -> PathSet:
    """Paths sitting exactly on distinct on-region angle-delay grid points."""
    points = []
    for i_h in range(1, cfg.N_h + 1):
        for i_v in range(1, cfg.N_v + 1):
            g = GridIndex(0, 0, 0, i_h, i_v)
            try:
                points.append(grid_to_angles(g, cfg))
            except ValueError:
                continue
    picks = rng.choice(len(points) * cfg.N_f, size=n_paths, replace=False)
    paths = []
    for k in picks:
        theta, phi = points[k % len(points)]
        delay = (k // len(points)) / (cfg.N_f * cfg.f_delta)
        beta = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
        paths.append(PathParams(beta, beta * np.exp(2j * np.pi * rng.uniform()), theta, phi,
                                delay, rng.uniform(-1, 1)))
    return PathSet.from_paths(paths, speed=speed_kmh / 3.6)


def bound_scenarios(seed: int = 0) -> list[ScenarioSpec]:
    """Noise-configured runs covered by the sandwich check (600 drops in total)."""
    rng = np.random.default_rng(seed)
    fine = fine_grid_config()
    model = tuple([on_grid_paths(fine, rng, 6)])
    small = SystemConfig(N_v=2, N_h=2, P_t=1, N_f=8)
    return [
        ScenarioSpec(cfg=fine, fixed_paths=model, N_L=2, L=1, n_s=6, N_d=10, pilot_snr_db=10.0,
                     drops=200, seed=seed, scenario_id="bounds-model-class"),
        ScenarioSpec(cfg=small, cluster=ClusterSpec(n_clusters=2, rays_per_cluster=20),
                     speed_kmh=60.0, N_L=2, L=1, n_s=small.dim, N_d=0, pilot_snr_db=0.0,
                     drops=200, seed=seed + 1, scenario_id="bounds-full-support"),
        ScenarioSpec(cfg=SystemConfig(N_f=24), cluster=ClusterSpec(n_clusters=2, rays_per_cluster=20),
                     speed_kmh=60.0, N_L=10, L=2, n_s=64, pilot_snr_db=10.0,
                     drops=200, seed=seed + 2, scenario_id="bounds-clustered"),
    ]


def _isometry(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = SystemConfig(N_v=2, N_h=4, P_t=2, N_f=16)
    h = rng.standard_normal((100, cfg.dim)) + 1j * rng.standard_normal((100, cfg.dim))
    g = project_vector(h, cfg)
    iso = np.max(np.abs(np.linalg.norm(g, axis=1) / np.linalg.norm(h, axis=1) - 1))
    dense = np.max(np.abs(g - h @ dense_transform(cfg).conj()))
    return CheckResult("transform isometry", bool(iso < 1e-12 and dense < 1e-12),
                       f"norm error {iso:.1e}, dense mismatch {dense:.1e}")


def _pencil(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    z = np.exp(1j * np.array([0.2, -0.3, 1.1]))
    g = (rng.standard_normal(3) * z[None, :] ** np.arange(8)[:, None]).sum(axis=1)
    est = estimate_poles(*hankel_pair(g, 3), 3)
    err = max(np.min(np.abs(est - zk)) for zk in z)
    return CheckResult("pencil exact recovery", bool(err < 1e-8), f"pole error {err:.1e}")


def _orthogonality(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = SystemConfig()
    idx = rng.choice(cfg.dim, size=100, replace=False) + 1
    D = basis_matrix(idx, cfg)
    err = np.max(np.abs(D.conj().T @ D - np.eye(idx.size)))
    return CheckResult("DL basis orthonormality", bool(err < 1e-10), f"Gram error {err:.1e}")


def _determinism(seed: int, threads: int) -> CheckResult:
    spec = ScenarioSpec(cfg=SystemConfig(N_f=12), cluster=ClusterSpec(n_clusters=2, rays_per_cluster=5),
                        N_L=6, L=2, n_s=16, pilot_snr_db=10.0, drops=4, seed=seed)
    a = run_scenario(spec, threads=1)
    b = run_scenario(spec, threads=max(threads, 2))
    same = all(x == y for x, y in zip(a.drops, b.drops))
    return CheckResult("determinism across thread counts", same, "bit-identical" if same else "reports differ")


def _bounds(spec: ScenarioSpec, threads: int) -> tuple[CheckResult, RunReport]:
    report = run_scenario(spec, threads=threads)
    b = report.bound_check
    detail = (f"{len(report.completed)} drops, E[nmse]={b.mean_nmse:.4g} "
              f"in [{b.lower:.4g}, {b.upper:.4g}] ± {b.allowance:.2g}")
    return CheckResult(f"sandwich bound ({spec.scenario_id})", b.outcome == PASS, detail), report


def run_selftest(seed: int = 0, threads: int = 1,
                 progress: Callable[[CheckResult], None] | None = None):
    """Run every check; returns the results and the reports of the bound-check runs."""
    results, reports = [], []
    checks = [lambda: _isometry(seed), lambda: _pencil(seed), lambda: _orthogonality(seed),
              lambda: _determinism(seed, threads)]
    for check in checks:
        results.append(check())
        if progress:
            progress(results[-1])
    for spec in bound_scenarios(seed):
        res, rep = _bounds(spec, threads)
        results.append(res)
        reports.append(rep)
        if progress:
            progress(res)
    return results, reports

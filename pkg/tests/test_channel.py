import math

import numpy as np
import pytest

from jadd.channel import (Band, ChannelSnapshot, ClusterSpec, PathParams, PathSet, add_sample_noise,
                          channel_at, channel_series, delay_vector, steering_vector, synth_paths)
from jadd.sysconfig import SPEED_OF_LIGHT, ConfigError, SystemConfig


def single(theta=math.pi / 2, phi=0.0, tau=0.0, cos_speed=1.0, speed=0.0, beta=1.0 + 0j):
    return PathSet.from_paths([PathParams(beta, beta, theta, phi, tau, cos_speed)], speed=speed)


def test_steering_broadside_is_flat(table_cfg):
    a = steering_vector(math.pi / 2, 0.3, table_cfg.f_u, table_cfg)
    assert a.shape == (16,)
    assert np.allclose(a, 1.0, atol=1e-15)


def test_steering_half_wave_endfire():
    f = 2e9
    cfg = SystemConfig(N_v=1, N_h=2, P_t=1, l_h=SPEED_OF_LIGHT / (2 * f), N_f=1)
    assert np.allclose(steering_vector(0.0, 0.0, f, cfg), [1, -1], atol=1e-15)


def test_steering_unit_modulus_and_first_element(table_cfg, rng):
    a = steering_vector(rng.uniform(0, np.pi, 50), rng.uniform(-np.pi, np.pi, 50), table_cfg.f_d, table_cfg)
    assert np.max(np.abs(np.abs(a) - 1)) < 1e-14
    assert np.all(a[:, 0] == 1)


def test_delay_vector():
    cfg = SystemConfig(N_f=16)
    assert np.allclose(delay_vector(0.0, cfg), 1.0)
    c = delay_vector(1 / (cfg.N_f * cfg.f_delta), cfg)
    assert c.shape == (16,)
    assert np.allclose(c[1:] / c[:-1], np.exp(-2j * np.pi / 16))
    assert np.max(np.abs(np.abs(c) - 1)) < 1e-14


def test_synth_path_count_and_determinism():
    spec = ClusterSpec()
    a = synth_paths(spec, np.random.default_rng(3))
    b = synth_paths(spec, np.random.default_rng(3))
    assert len(a) == 460
    for name in ("beta_u", "beta_d", "theta", "phi", "tau", "cos_speed_angle"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert np.all(np.abs(a.beta_u) == pytest.approx(np.abs(a.beta_d)))


def test_degenerate_cluster_sits_at_centre():
    spec = ClusterSpec(n_clusters=1, rays_per_cluster=1, azimuth_spread_deg=0, elevation_spread_deg=0,
                       ray_azimuth_spread_deg=0, ray_elevation_spread_deg=0, mean_azimuth_deg=30,
                       mean_elevation_deg=20, shadowing_std_db=0)
    p = synth_paths(spec, np.random.default_rng(0))
    assert len(p) == 1
    assert p.phi[0] == pytest.approx(math.radians(30))
    assert p.theta[0] == pytest.approx(math.radians(20))
    assert p.tau[0] == 0.0


def test_geometric_doppler_follows_direction():
    spec = ClusterSpec(n_clusters=3, rays_per_cluster=4, doppler="geometric")
    p = synth_paths(spec, np.random.default_rng(1))
    assert np.all(np.abs(p.cos_speed_angle) <= np.cos(p.theta) + 1e-12)
    with pytest.raises(ConfigError):
        ClusterSpec(doppler="sideways")


def test_cluster_spec_validation():
    with pytest.raises(ConfigError):
        ClusterSpec(n_clusters=0)
    with pytest.raises(ConfigError):
        ClusterSpec(delay_spread=-1.0)


def test_average_energy_normalization():
    cfg = SystemConfig(N_f=8)
    rng = np.random.default_rng(7)
    spec = ClusterSpec(n_clusters=4, rays_per_cluster=5)
    energy = [np.sum(np.abs(channel_at(synth_paths(spec, rng), 0, Band.UL, cfg).h) ** 2)
              for _ in range(200)]
    assert np.mean(energy) / cfg.dim == pytest.approx(1.0, abs=0.05)


def test_static_flat_channel():
    cfg = SystemConfig(N_f=4)
    paths = single(beta=0.5 - 0.2j, cos_speed=1.0, speed=0.0)
    h0 = channel_at(paths, 0, Band.UL, cfg).h
    h9 = channel_at(paths, 9, Band.UL, cfg).h
    assert np.allclose(h0, 0.5 - 0.2j)
    assert np.array_equal(h0, h9)


def test_doppler_per_slot():
    cfg = SystemConfig(N_f=1)
    paths = single(speed=350 / 3.6)
    w = paths.doppler(cfg.f_u, cfg.c)[0]
    assert w / (2 * np.pi) == pytest.approx(350 / 3.6 * 1.92e9 / SPEED_OF_LIGHT)
    assert w / (2 * np.pi) == pytest.approx(622.6, abs=0.1)
    h = channel_series(paths, [0, 1], Band.UL, cfg)
    step = np.angle(h[1, 0] / h[0, 0])
    assert step == pytest.approx(np.angle(np.exp(1j * w * cfg.T_srs)))
    assert w * cfg.T_srs / (2 * np.pi) == pytest.approx(0.3113, abs=1e-4)


def test_static_dl_is_time_invariant(table_cfg, rng):
    paths = synth_paths(ClusterSpec(n_clusters=2, rays_per_cluster=3, speed_kmh=0), rng)
    assert np.array_equal(channel_at(paths, 0, Band.DL, table_cfg).h, channel_at(paths, 5, Band.DL, table_cfg).h)


def test_reciprocity_of_doppler(rng):
    paths = synth_paths(ClusterSpec(n_clusters=2, rays_per_cluster=3), rng)
    c = SPEED_OF_LIGHT
    assert np.allclose(paths.doppler(2.11e9, c), paths.doppler(1.92e9, c) * 2.11 / 1.92)


def test_dl_phase_includes_band_offset():
    cfg = SystemConfig(N_v=1, N_h=1, P_t=1, N_f=1)
    tau = 17e-9
    paths = single(theta=math.pi / 2, tau=tau)
    h = channel_at(paths, 0, Band.DL, cfg).h[0]
    expected = (np.exp(-2j * np.pi * cfg.f_d * tau) * np.exp(-2j * np.pi * (cfg.f_d - cfg.f_u) * tau)
                * np.exp(-2j * np.pi * cfg.f_u * cfg.f_delta * tau))
    assert h == pytest.approx(expected)


def test_dual_polarization_blocks():
    cfg = SystemConfig(N_v=2, N_h=2, P_t=2, N_f=1)
    p = PathParams(1.0, 1.0, 0.4, 0.2, 0.0, 0.0, pol_phase=(1.0 + 0j, 1j))
    h = channel_at(PathSet.from_paths([p]), 0, Band.UL, cfg).h
    assert np.allclose(h[4:], 1j * h[:4])


def test_path_validation():
    with pytest.raises(ValueError):
        PathParams(1, 1, 0.1, 0.1, -1e-9, 0.0)
    with pytest.raises(ValueError):
        PathParams(1, 1, 0.1, 0.1, 0.0, 1.5)
    with pytest.raises(ValueError):
        PathSet.from_paths([])
    with pytest.raises(ValueError):
        ChannelSnapshot(0, Band.UL, np.array([np.nan + 0j]))


def test_sample_noise_levels(rng):
    snap = ChannelSnapshot(0, Band.UL, np.exp(2j * np.pi * rng.uniform(size=100_000)))
    assert add_sample_noise(snap, math.inf, rng) is snap
    noisy = add_sample_noise(snap, 0.0, rng)
    ratio = np.mean(np.abs(noisy.h - snap.h) ** 2) / np.mean(np.abs(snap.h) ** 2)
    assert 0.9 <= ratio <= 1.1
    a = add_sample_noise(snap, 10.0, np.random.default_rng(5)).h
    b = add_sample_noise(snap, 10.0, np.random.default_rng(5)).h
    assert np.array_equal(a, b)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costsched.channel import (Mpc, assemble_channel, cluster_attenuation, cluster_delay,
                               draw_fading, dump_channel, load_channel, mpc_amplitude,
                               path_gain, path_loss_db, steering, truncated_gaussian,
                               visibility_gain)
from costsched.config import C0, ScenarioConfig
from costsched.drop import generate_drop
from costsched.scenario import BS_OWNER, Point3, User, bs_position
from costsched.scheduler import activity_sets, build_v_matrix

from conftest import LOCAL, make_cluster


def test_path_loss_oracle():
    lam = 0.15
    assert path_loss_db(1.0, lam) == pytest.approx(20 * math.log10(4 * math.pi / lam))
    assert path_loss_db(100.0, lam) - path_loss_db(10.0, lam) == pytest.approx(26.0)
    assert path_gain(10.0, lam) == pytest.approx(10 ** (-path_loss_db(10.0, lam) / 10))
    with pytest.raises(ValueError):
        path_loss_db(0.0, lam)


def test_attenuation_decay_and_floor():
    k, t0, tb = 2e6, 1e-6, 2.5e-6
    assert cluster_attenuation(t0, k, t0, tb) == pytest.approx(1.0)
    assert cluster_attenuation(t0 + 0.5e-6, k, t0, tb) == pytest.approx(math.exp(-1.0))
    floor = math.exp(-k * (tb - t0))
    assert cluster_attenuation(10e-6, k, t0, tb) == pytest.approx(floor)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 5e-6), st.floats(0, 5e-6))
def test_attenuation_non_increasing(a, b):
    lo, hi = sorted((a, b))
    assert cluster_attenuation(lo, 2e6, 0.0, 1.5e-6) >= cluster_attenuation(hi, 2e6, 0.0, 1.5e-6)


def test_truncated_gaussian_bounds():
    x = truncated_gaussian(10_000, 0)
    assert np.abs(x).max() <= 2.0
    assert x.mean() == pytest.approx(0.0, abs=0.03)


def test_fading_power():
    g = draw_fading(2000, 6, 0)
    assert np.mean(np.sum(np.abs(g) ** 2, axis=1)) == pytest.approx(1.0, rel=0.03)


def test_steering_vector():
    a = steering([0.0, 0.5], 8, 0.5)
    assert a.shape == (8, 2)
    np.testing.assert_allclose(np.abs(a), 1.0)
    np.testing.assert_allclose(a[:, 0], 1.0)
    np.testing.assert_allclose(a[3, 1], np.exp(-1j * math.pi * 3 * 0.5))


def test_visibility_rules():
    cfg = ScenarioConfig()
    u0, u1 = User(0, Point3(100, 0, 1.5)), User(1, Point3(300, 0, 1.5))
    own = make_cluster(0, (100, 0, 1.5), (100, 0), kind=LOCAL, owner=0)
    bs_local = make_cluster(1, (0, 0, 5), (0, 0), kind=LOCAL, owner=BS_OWNER)
    far = make_cluster(2, (200, 50, 3), (110, 0))
    assert visibility_gain(own, u0, cfg) == 1.0 and visibility_gain(own, u1, cfg) == 0.0
    assert visibility_gain(bs_local, u1, cfg) == 1.0
    assert visibility_gain(far, u0, cfg) > 0.99
    assert visibility_gain(far, u1, cfg) == 0.0


def test_cluster_delay_single():
    c = make_cluster(0, (30, 40, 5), (0, 0))
    bs = Point3(0, 0, 5)
    ms = Point3(30, 40 + 12, 5 - 5)
    assert cluster_delay(c, ms, bs) == pytest.approx((50 + 13) / C0)


def test_vectorized_channel_matches_per_mpc_reference():
    cfg = ScenarioConfig(k_users=12, m_antennas=16, k_selected=4, cell_size=200)
    drop = generate_drop(cfg, 0, seed=2)
    sets = activity_sets(build_v_matrix(drop), cfg.activity_threshold)
    fading = draw_fading(drop.n_clusters, cfg.n_mpc, 9)
    h = assemble_channel(drop, range(cfg.k_users), sets, fading)
    bs = bs_position(cfg)
    for k in range(cfg.k_users):
        col = np.zeros(cfg.m_antennas, dtype=complex)
        for j in sets[k]:
            c = drop.clusters[j]
            for i in range(cfg.n_mpc):
                mpc = Mpc(Point3.of(drop.mpc_bs[j, i]), Point3.of(drop.mpc_ms[j, i]),
                          float(drop.mpc_azimuth[j, i]), float(drop.mpc_elevation[j, i]))
                amp = mpc_amplitude(drop.users[k], c, mpc, cfg, fading[j, i])
                col += amp * steering(math.sin(mpc.azimuth), cfg.m_antennas, 0.5)[:, 0]
        np.testing.assert_allclose(h[:, k], col, rtol=1e-9, atol=1e-18)
    assert bs.z == cfg.h_bs


@pytest.mark.parametrize("suffix", [".csv", ".bin"])
def test_channel_dump_roundtrip(tmp_path, suffix):
    rng = np.random.default_rng(0)
    h = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    path = tmp_path / f"h{suffix}"
    dump_channel(h, path, seed=42)
    back, seed = load_channel(path)
    assert seed == 42
    np.testing.assert_array_equal(back, h)

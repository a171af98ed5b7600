import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iarzf.system_model import (
    ConfigError,
    GeometricScenario,
    GeometrySpec,
    NormMode,
    SystemConfig,
    build_geometric_config,
    build_wyner_config,
    draw_channels,
    estimate_csi,
    load_scenario,
    place_users,
    scenario_to_dict,
    square_geometry,
    tau_from_distance,
    trial_seed,
    two_bs_geometry,
)


def test_wyner_config_fields():
    cfg = build_wyner_config(160, 40, 0.7, 0.5, 0.0, 10.0, 1.0)
    assert cfg.L == 2
    assert np.allclose(cfg.c, 0.25)
    assert np.all(cfg.chi[0][0] == 1.0) and np.all(cfg.chi[0][1] == 0.7)
    assert cfg.tau[0, 1] == 0.5 and cfg.tau[1, 1] == 0.0


def test_wyner_zero_cross_gain():
    cfg = build_wyner_config(4, 4, 0.0, 0.3, 0.0, 1.0, 1.0)
    assert np.all(cfg.chi[0][1] == 0) and np.all(cfg.chi[1][0] == 0)


@pytest.mark.parametrize("kw", [
    dict(N=4, K=8, eps=0.5, tau_inter=0.1, tau_intra=0.0, P=1.0, xi=1.0),
    dict(N=4, K=2, eps=0.5, tau_inter=0.1, tau_intra=0.0, P=0.0, xi=1.0),
    dict(N=4, K=2, eps=0.5, tau_inter=0.1, tau_intra=0.0, P=1.0, xi=-1.0),
    dict(N=4, K=2, eps=0.5, tau_inter=1.5, tau_intra=0.0, P=1.0, xi=1.0),
    dict(N=4, K=2, eps=-0.5, tau_inter=0.1, tau_intra=0.0, P=1.0, xi=1.0),
])
def test_wyner_rejects_invalid(kw):
    with pytest.raises(ConfigError):
        build_wyner_config(**kw)


def test_draw_channels_deterministic():
    cfg = build_wyner_config(8, 3, 0.7, 0.5, 0.1, 10.0)
    a = draw_channels(cfg, trial_seed(7, 3))
    b = draw_channels(cfg, trial_seed(7, 3))
    c = draw_channels(cfg, trial_seed(7, 4))
    for m in range(2):
        for l in range(2):
            assert np.array_equal(a.H[m][l], b.H[m][l])
            assert not np.array_equal(a.H[m][l], c.H[m][l])


def test_channel_norm_concentration():
    # ||h||^2 ~ Gamma(N, 1/N); P(|.-1| > 0.1) ~ 1.6e-3 at N=1000
    N = 1000
    cfg = SystemConfig((N,), (1,), [[1.0]], [[0.0]], 1.0, 1.0)
    norms = [np.sum(np.abs(draw_channels(cfg, trial_seed(0, t)).H[0][0]) ** 2) for t in range(2000)]
    norms = np.array(norms)
    assert np.mean((norms > 0.9) & (norms < 1.1)) >= 0.995
    assert abs(np.mean(norms) - 1) < 0.02


def test_entry_variance_and_circularity():
    cfg = SystemConfig((100,), (100,), [[1.0]], [[0.0]], 1.0, 1.0)
    H = np.concatenate([draw_channels(cfg, trial_seed(1, t)).H[0][0].ravel() for t in range(100)])
    assert H.size == 10**6
    assert abs(np.var(H) * 100 - 1) < 0.01
    assert abs(np.var(H.real) / np.var(H.imag) - 1) < 0.01
    assert abs(np.mean(H.real * H.imag)) * 100 < 0.01


def test_csi_tau_zero_is_scaled_channel():
    cfg = SystemConfig((6, 6), (2, 3), [[np.array([0.3, 2.0]), 0.5], [0.7, np.array([1.0, 4.0, 9.0])]],
                       [[0.0, 0.0], [0.0, 0.0]], 1.0, 1.0)
    ch = draw_channels(cfg, trial_seed(0, 0))
    csi = estimate_csi(cfg, ch, trial_seed(0, 0))
    for m in range(2):
        for l in range(2):
            assert np.array_equal(csi.Hhat[m][l], ch.H[m][l] * np.sqrt(cfg.chi[m][l]))


def test_csi_decomposition_exact():
    cfg = build_wyner_config(10, 4, 0.7, 0.6, 0.2, 1.0)
    ch = draw_channels(cfg, trial_seed(5, 1))
    csi = estimate_csi(cfg, ch, trial_seed(5, 1))
    for m in range(2):
        for l in range(2):
            s = np.sqrt(cfg.chi[m][l])
            t = cfg.tau[m, l]
            lhs = csi.Hhat[m][l] - s * np.sqrt(1 - t**2) * ch.H[m][l]
            assert np.allclose(lhs, s * t * csi.Htilde[m][l], atol=1e-14, rtol=0)


def test_csi_tau_one_uncorrelated():
    cfg = SystemConfig((1,), (1,), [[1.0]], [[1.0]], 1.0, 1.0)
    h, hh = [], []
    for t in range(20_000):
        ts = trial_seed(2, t)
        ch = draw_channels(cfg, ts)
        h.append(ch.H[0][0][0, 0])
        hh.append(estimate_csi(cfg, ch, ts).Hhat[0][0][0, 0])
    h, hh = np.array(h), np.array(hh)
    corr = abs(np.vdot(h, hh)) / np.sqrt(np.vdot(h, h).real * np.vdot(hh, hh).real)
    # 1/sqrt(2e4) ~ 0.007 standard error
    assert corr < 0.03


def test_csi_power_matches_gain():
    cfg = SystemConfig((50,), (50,), [[0.7]], [[0.5]], 1.0, 1.0)
    p = [np.mean(np.sum(np.abs(estimate_csi(cfg, draw_channels(cfg, trial_seed(4, t)),
                                            trial_seed(4, t)).Hhat[0][0]) ** 2, axis=0))
         for t in range(200)]
    assert abs(np.mean(p) / 0.7 - 1) < 0.02


def test_gain_under_bs():
    geom = GeometrySpec(np.array([[0.0, 0.0]]), cluster_radius=1e-12)
    cfg = build_geometric_config(geom, [3], 1.0, 1.0, 0, [4])
    assert np.allclose(cfg.chi[0][0], 0.1 ** -2.8, rtol=1e-9)
    assert abs(0.1 ** -2.8 - 630.957) < 1e-3


def test_placement_area_uniform():
    geom = GeometrySpec(np.array([[0.0, 0.0]]))
    u = place_users(geom, [200_000], 9)[0]
    r = np.hypot(u[:, 0], u[:, 1])
    assert r.max() <= 1.0
    # area-uniform: P(r < 1/2) = 1/4
    assert abs(np.mean(r < 0.5) - 0.25) < 0.005


def test_tau_rule_square():
    g = square_geometry((0.1, 0.3, 0.4))
    tau = g.tau()
    assert np.allclose(np.diag(tau), 0.1)
    assert tau[0, 1] == 0.3 and tau[0, 3] == 0.3 and tau[0, 2] == 0.4 and tau[1, 3] == 0.4
    with pytest.raises(ConfigError):
        tau_from_distance(g.bs_positions[:, :2], (0.1, 0.2))


def test_two_bs_geometry_gain():
    cfg = build_geometric_config(two_bs_geometry(0.0, 0.4), [40, 40], 10.0, 1.0, 3, [160, 160])
    assert cfg.tau[0, 1] == 0.4 and cfg.tau[0, 0] == 0.0
    # own-cell users are within radius 1, so their own gain is at least (1 + 0.01) ** -1.4
    assert np.all(cfg.chi[0][0] >= 1.01 ** -1.4 - 1e-12)
    assert cfg.norm_mode is NormMode.PER_USER_POWER


def test_square_mirror_symmetry():
    # mirroring every drop across x = 1/2 maps BS0<->BS1, BS2<->BS3
    sc = GeometricScenario(square_geometry(), (8,) * 4, (4,) * 4, 1.0)
    cfg = sc.config(11)
    users = place_users(sc.geom, sc.K, 11)
    perm = [1, 0, 3, 2]
    mirrored = [np.column_stack([1.0 - users[perm[l]][:, 0], users[perm[l]][:, 1], users[perm[l]][:, 2]])
                for l in range(4)]
    bs = sc.geom.bs_positions + np.array([0, 0, 0.1])
    chi_m = np.array([[np.mean(np.linalg.norm(mirrored[l] - bs[m], axis=1) ** -2.8) for l in range(4)]
                      for m in range(4)])
    assert np.allclose(sorted(chi_m.ravel()), sorted(cfg.eps().ravel()), rtol=1e-12)
    assert np.allclose(chi_m, cfg.eps()[np.ix_(perm, perm)], rtol=1e-12)


def test_scenario_roundtrip(tmp_path):
    cfg = build_wyner_config(8, 2, 0.7, 0.5, 0.1, 3.0, 2.0)
    d = scenario_to_dict(cfg, {"master": 1})
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    back = load_scenario(p)
    assert back.N == cfg.N and np.array_equal(back.tau, cfg.tau) and np.array_equal(back.xi, cfg.xi)
    assert all(np.array_equal(a, b) for ra, rb in zip(back.chi, cfg.chi) for a, b in zip(ra, rb))
    sc = GeometricScenario(square_geometry(), (8,) * 4, (2,) * 4, 1.0)
    back = load_scenario(json.loads(json.dumps(scenario_to_dict(sc))))
    assert isinstance(back, GeometricScenario) and back.geom.tau_rule == (0.1, 0.3, 0.4)
    with pytest.raises(ConfigError):
        load_scenario({"cells": {"N": [2]}})


@settings(max_examples=30, deadline=None)
@given(N=st.integers(1, 12), K=st.integers(1, 12), seed=st.integers(0, 2**32 - 1),
       tau=st.floats(0, 1), eps=st.floats(0, 10))
def test_property_shapes_and_reproducibility(N, K, seed, tau, eps):
    K = min(K, N)
    cfg = build_wyner_config(N, K, eps, tau, tau / 2, 1.0)
    ch = draw_channels(cfg, seed)
    a = estimate_csi(cfg, ch, seed)
    b = estimate_csi(cfg, draw_channels(cfg, seed), seed)
    for m in range(2):
        for l in range(2):
            assert ch.H[m][l].shape == (N, K)
            assert np.array_equal(a.Hhat[m][l], b.Hhat[m][l])

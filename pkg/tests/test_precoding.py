import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iarzf.precoding import (
    Baseline,
    RankDeficientError,
    WeightMatrix,
    baseline_direction,
    baseline_precoder,
    heuristic_iazf_precoder,
    iarzf_direction,
    iarzf_precoder,
    limit_precoder_alpha_inf,
    limit_precoder_beta_inf,
    normalize,
    normalize_matrix,
    orthogonal_projector,
)
from iarzf.system_model import NormMode, SystemConfig, build_wyner_config, draw_channels, estimate_csi, trial_seed

from oracles import iarzf_explicit


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2 * shape[0])


def small_csi(seed=0, N=6, K=2, tau=0.3, mode=NormMode.PER_USER_POWER):
    cfg = SystemConfig((N, N), (K, K), [[1.0, 0.4], [0.6, 1.3]], [[0.1, tau], [tau, 0.2]], (3.0, 5.0),
                       (1.0, 0.5), mode)
    ts = trial_seed(seed, 0)
    ch = draw_channels(cfg, ts)
    return cfg, ch, estimate_csi(cfg, ch, ts)


def test_weight_matrix_validation():
    with pytest.raises(ValueError):
        WeightMatrix([[1.0, np.inf], [0.0, 1.0]])
    with pytest.raises(ValueError):
        WeightMatrix([[1.0, -1.0], [0.0, 1.0]])
    assert WeightMatrix.two_cell(2.0, 3.0).alpha[0, 1] == 3.0


def test_iarzf_matches_explicit_inverse():
    cfg, _, csi = small_csi()
    w = WeightMatrix(np.array([[2.0, 0.7], [1.5, 0.3]]))
    for m in range(2):
        inv, _ = iarzf_explicit(csi.Hhat[m], w.alpha[m], cfg.xi[m])
        ref = inv @ csi.Hhat[m][m]
        assert np.allclose(iarzf_direction(csi, w, cfg, m), ref, atol=1e-10, rtol=0)


def test_iarzf_zero_weights_is_mrt():
    cfg, _, csi = small_csi()
    w = WeightMatrix(np.zeros((2, 2)))
    F = iarzf_precoder(csi, w, cfg)
    for m in range(2):
        assert np.allclose(iarzf_direction(csi, w, cfg, m), csi.Hhat[m][m] / cfg.xi[m], atol=1e-14)
        Fm, _ = normalize(csi.Hhat[m][m], cfg, m)
        assert np.allclose(F.F[m], Fm, atol=1e-12)


def test_iarzf_single_cell_rzf():
    cfg, _, csi = small_csi()
    w = WeightMatrix(np.eye(2))
    for m in range(2):
        H = csi.Hhat[m][m]
        ref = H @ np.linalg.inv(H.conj().T @ H + cfg.xi[m] * np.eye(H.shape[1]))
        assert np.allclose(iarzf_direction(csi, w, cfg, m), ref, atol=1e-12, rtol=0)


def test_iarzf_scaling_invariance():
    cfg, _, csi = small_csi()
    w = WeightMatrix(np.array([[2.0, 0.7], [1.5, 0.3]]))
    F1 = iarzf_precoder(csi, w, cfg)
    s = 7.3
    cfg2 = SystemConfig(cfg.N, cfg.K, cfg.chi, cfg.tau, cfg.P, cfg.xi * s, cfg.norm_mode)
    F2 = iarzf_precoder(csi, WeightMatrix(w.alpha * s), cfg2)
    for m in range(2):
        assert np.allclose(F1.F[m], F2.F[m], atol=1e-12, rtol=0)


def test_normalization_constraints():
    rng = np.random.default_rng(0)
    M = cn(rng, 9, 4)
    F, nu = normalize_matrix(M, 4, 3.0, NormMode.TRACE_K)
    assert abs(np.trace(F.conj().T @ F).real / 4 - 1) < 1e-12
    G, mu = normalize_matrix(M, 4, 3.0, NormMode.PER_USER_POWER)
    assert abs(np.trace(G @ G.conj().T).real / 4 / 3.0 - 1) < 1e-12
    ratio = G / F
    assert np.allclose(ratio, np.sqrt(3.0), rtol=1e-12)
    with pytest.raises(ValueError):
        normalize_matrix(np.zeros((3, 2)), 2, 1.0, NormMode.TRACE_K)


def test_zf_defining_property():
    rng = np.random.default_rng(1)
    H = cn(rng, 8, 5)
    M = baseline_direction(Baseline.ZF, H)
    assert np.allclose(H.conj().T @ M, np.eye(5), atol=1e-10)


def test_zf_rank_deficient():
    rng = np.random.default_rng(1)
    H = cn(rng, 8, 3)
    H = np.column_stack([H, H[:, 0]])
    with pytest.raises(RankDeficientError):
        baseline_direction(Baseline.ZF, H)


def test_rzf_regularization_and_mrt():
    N, K, rho = 160, 40, 10.0
    assert K / (N * rho) == 0.025
    rng = np.random.default_rng(2)
    H = cn(rng, N, K)
    M = baseline_direction(Baseline.RZF, H, rho)
    ref = H @ np.linalg.inv(H.conj().T @ H + 0.025 * np.eye(K))
    assert np.allclose(M, ref, atol=1e-10)
    F = baseline_precoder(Baseline.MRT, np.array([[1.0], [0.0]], dtype=complex))
    assert np.allclose(F.F[0], [[1.0], [0.0]])


def test_projector_properties():
    rng = np.random.default_rng(3)
    X = cn(rng, 7, 3)
    P = orthogonal_projector(X)
    assert np.allclose(P @ X, 0, atol=1e-10)
    assert np.allclose(P @ P, P, atol=1e-10)
    assert np.allclose(P, P.conj().T, atol=1e-10)
    E = np.eye(5)[:, :2].astype(complex)
    assert np.allclose(orthogonal_projector(E), np.diag([0, 0, 1, 1, 1]), atol=1e-14)
    with pytest.raises(RankDeficientError):
        orthogonal_projector(np.column_stack([X, X[:, :1]]))


def test_alpha_limit_properties():
    rng = np.random.default_rng(4)
    H, G = cn(rng, 8, 3), cn(rng, 8, 3)
    R = limit_precoder_alpha_inf(H, G, 2.0)
    assert np.allclose(H.conj().T @ R, np.eye(3), atol=1e-10)
    Z = H @ np.linalg.inv(H.conj().T @ H)
    assert np.allclose(limit_precoder_alpha_inf(H, G, 1e-12), Z, atol=1e-6)
    # alpha * M at large alpha (xi = 1)
    a = 1e8
    A = a * H @ H.conj().T + 2.0 * G @ G.conj().T + np.eye(8)
    M = a * np.linalg.solve(A, H)
    assert np.linalg.norm(M - R) / np.linalg.norm(R) < 1e-4


def test_beta_limit_properties():
    rng = np.random.default_rng(5)
    H, G = cn(rng, 8, 3), cn(rng, 8, 3)
    R = limit_precoder_beta_inf(H, G, 1.5, 0.7)
    assert np.allclose(G.conj().T @ R, 0, atol=1e-10)
    empty = np.zeros((8, 0), dtype=complex)
    ref = H @ np.linalg.inv(0.7 * np.eye(3) + 1.5 * H.conj().T @ H)
    assert np.allclose(limit_precoder_beta_inf(H, empty, 1.5, 0.7), ref, atol=1e-12)
    b = 1e8
    A = 1.5 * H @ H.conj().T + b * G @ G.conj().T + 0.7 * np.eye(8)
    M = np.linalg.solve(A, H)
    assert np.linalg.norm(M - R) / np.linalg.norm(R) < 1e-4


def test_heuristic_iazf():
    rng = np.random.default_rng(6)
    H, G = cn(rng, 10, 3), cn(rng, 10, 3)
    R0 = heuristic_iazf_precoder(H, G, 10.0, 0.25, 0.7, 0.0)
    assert np.allclose(R0, limit_precoder_alpha_inf(H, G, 10.0), atol=1e-12)
    R = heuristic_iazf_precoder(H, G, 10.0, 0.25, 0.7, 0.5)
    assert np.allclose(H.conj().T @ R, np.eye(3), atol=1e-10)
    # inner shift (P c eps tau^2 + 1) / (P (1 - tau^2)) = 1.4375 / 7.5
    assert abs(1.4375 / 7.5 - 0.19167) < 1e-5
    assert np.allclose(R, limit_precoder_alpha_inf(H, G, 7.5 / 1.4375), atol=1e-12)
    with pytest.raises(ValueError):
        heuristic_iazf_precoder(H, G, 10.0, 0.25, 0.7, 1.0)


def test_trace_column_norm_concentration():
    # TRACE_K at N=160, K=40, order-one weights: column norms concentrate at one.
    # Near-ZF weights (alpha = N rho) spread the norms more at this size.
    from iarzf.experiments import fig2_config
    inside = []
    for t in range(100):
        cfg = fig2_config(10.0, 0.5)
        ts = trial_seed(0, t)
        csi = estimate_csi(cfg, draw_channels(cfg, ts), ts)
        F = iarzf_precoder(csi, WeightMatrix.two_cell(1.0, 1.0), cfg)
        for f in F.F:
            n = np.sum(np.abs(f) ** 2, axis=0)
            inside.append((n >= 0.8) & (n <= 1.2))
    assert np.mean(np.concatenate(inside)) >= 0.99


def test_alpha_limit_zero_intra_after_normalization():
    rng = np.random.default_rng(7)
    H, G = cn(rng, 12, 4), cn(rng, 12, 4)
    F, _ = normalize_matrix(limit_precoder_alpha_inf(H, G, 3.0), 4, 1.0, NormMode.TRACE_K)
    D = H.conj().T @ F
    assert np.allclose(D - np.diag(np.diag(D)), 0, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0, 1e3), b=st.floats(0, 1e3), xi=st.floats(1e-3, 10))
def test_property_iarzf_vs_explicit(seed, a, b, xi):
    cfg = build_wyner_config(6, 3, 0.7, 0.4, 0.1, 2.0, xi)
    ts = trial_seed(seed, 0)
    csi = estimate_csi(cfg, draw_channels(cfg, ts), ts)
    w = WeightMatrix.two_cell(a, b)
    for m in range(2):
        inv, A = iarzf_explicit(csi.Hhat[m], w.alpha[m], xi)
        ref = inv @ csi.Hhat[m][m]
        got = iarzf_direction(csi, w, cfg, m)
        # residual of the linear system, scale-free
        assert np.linalg.norm(A @ got - csi.Hhat[m][m]) <= 1e-9 * np.linalg.norm(A) * np.linalg.norm(got) + 1e-14
        if np.linalg.cond(A) < 1e8:
            assert np.allclose(got, ref, rtol=1e-6, atol=1e-10 * np.abs(ref).max())

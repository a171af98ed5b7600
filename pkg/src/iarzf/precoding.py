"""Linear precoders and power normalization.

All matrix "inverses" are applied through Cholesky solves of Hermitian
positive-definite Gram matrices. Gram matrices that are only positive
semi-definite in exact arithmetic (ZF, projectors) are checked against a
relative condition-number limit first.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .system_model import CsiEstimate, NormMode, SystemConfig

__all__ = [
    "COND_LIMIT",
    "RankDeficientError",
    "Baseline",
    "WeightMatrix",
    "PrecoderSet",
    "normalize",
    "normalize_matrix",
    "iarzf_direction",
    "iarzf_precoder",
    "baseline_direction",
    "baseline_precoder",
    "orthogonal_projector",
    "limit_precoder_alpha_inf",
    "limit_precoder_beta_inf",
    "heuristic_iazf_precoder",
]

COND_LIMIT = 1e12


class RankDeficientError(np.linalg.LinAlgError):
    """A Gram matrix that must be invertible is numerically singular."""


class Baseline(str, Enum):
    MRT = "MRT"
    ZF = "ZF"
    RZF = "RZF"


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Weights ``alpha[m, l]`` that BS ``m`` puts on the channels of cell ``l``."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.alpha, dtype=float, ndmin=2)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("alpha must be a square matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("weights must be finite")
        if np.any(a < 0):
            raise ValueError("weights must be nonnegative")
        a.flags.writeable = False
        object.__setattr__(self, "alpha", a)

    @property
    def L(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def constant(cls, L: int, value: float) -> "WeightMatrix":
        return cls(np.full((L, L), float(value)))

    @classmethod
    def two_cell(cls, alpha: float, beta: float) -> "WeightMatrix":
        """Symmetric two-cell table: ``alpha`` on the own cell, ``beta`` on the other."""
        return cls(np.array([[alpha, beta], [beta, alpha]], dtype=float))


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    """Normalized precoders ``F[m]`` of shape ``(N_m, K_m)``.

    ``nu[m]`` is the scalar that maps the unnormalized direction to ``F[m]``,
    i.e. ``F[m] = sqrt(nu[m]) * M[m]``.
    """

    F: tuple
    nu: np.ndarray
    mode: NormMode

    def power_scale(self, cfg: SystemConfig) -> np.ndarray:
        """Factor applied to every received power from each BS."""
        if self.mode is NormMode.TRACE_K:
            return np.asarray(cfg.P, dtype=float)
        return np.ones(cfg.L)


# ---------------------------------------------------------------------------
# helpers


def _hpd_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return cho_solve(cho_factor(A, lower=True, check_finite=False), B, check_finite=False)


def _checked_gram(X: np.ndarray) -> np.ndarray:
    G = X.conj().T @ X
    if G.shape[0] and np.linalg.cond(G) > COND_LIMIT:
        raise RankDeficientError(f"Gram matrix of shape {G.shape} is rank deficient")
    return G


def _right_pinv(X: np.ndarray) -> np.ndarray:
    """``X (X^H X)^{-1}``."""
    return _hpd_solve(_checked_gram(X).T, X.T).T if X.shape[1] else X.copy()


def normalize_matrix(M: np.ndarray, K: int, P: float, mode: NormMode) -> tuple[np.ndarray, float]:
    """Scale ``M`` to the trace (``TRACE_K``) or per-user power constraint."""
    t = np.vdot(M, M).real
    if not t > 0:
        raise ValueError("cannot normalize a zero precoder")
    nu = (K if NormMode(mode) is NormMode.TRACE_K else P * K) / t
    return np.sqrt(nu) * M, nu


def normalize(M: np.ndarray, cfg: SystemConfig, m: int) -> tuple[np.ndarray, float]:
    """Normalize the precoder of cell ``m`` according to ``cfg.norm_mode``.

    Returns
    -------
    F : ndarray
        Normalized precoder.
    nu : float
        Applied power scalar, ``F = sqrt(nu) M``.
    """
    return normalize_matrix(M, cfg.K[m], cfg.P[m], cfg.norm_mode)


# ---------------------------------------------------------------------------
# precoders


def iarzf_direction(csi: CsiEstimate, w: WeightMatrix, cfg: SystemConfig, m: int) -> np.ndarray:
    """Unnormalized iaRZF precoder of BS ``m``.

    ``(sum_l alpha[m, l] Hhat[m][l] Hhat[m][l]^H + xi_m I)^{-1} Hhat[m][m]``
    """
    a = w.alpha[m]
    if not np.all(np.isfinite(a)):
        raise ValueError("weights must be finite")
    xi = float(cfg.xi[m])
    if not xi > 0:
        raise ValueError("xi must be positive")
    cols = [np.sqrt(a[l]) * csi.Hhat[m][l] for l in range(cfg.L) if a[l] > 0]
    A = xi * np.eye(cfg.N[m], dtype=complex)
    if cols:
        B = np.hstack(cols)
        A += B @ B.conj().T
    return _hpd_solve(A, csi.Hhat[m][m])


def iarzf_precoder(csi: CsiEstimate, w: WeightMatrix, cfg: SystemConfig) -> PrecoderSet:
    """Interference-aware RZF precoders for all cells, normalized per ``cfg``."""
    if w.L != cfg.L:
        raise ValueError("weight matrix does not match the number of cells")
    F, nu = [], []
    for m in range(cfg.L):
        f, n = normalize(iarzf_direction(csi, w, cfg, m), cfg, m)
        F.append(f)
        nu.append(n)
    return PrecoderSet(tuple(F), np.array(nu), cfg.norm_mode)


def baseline_direction(kind: Baseline, H: np.ndarray, rho: float | None = None) -> np.ndarray:
    """Unnormalized single-cell MRT, ZF or RZF precoder.

    RZF uses the regularization ``K / (N rho)``.
    """
    kind = Baseline(kind)
    if kind is Baseline.MRT:
        return H.copy()
    if kind is Baseline.ZF:
        return _right_pinv(H)
    N, K = H.shape
    if rho is None or not rho > 0:
        raise ValueError("RZF needs a positive rho")
    G = H.conj().T @ H + (K / (N * rho)) * np.eye(K)
    return _hpd_solve(G.T, H.T).T


def baseline_precoder(kind: Baseline, H: np.ndarray, rho: float | None = None,
                      cfg: SystemConfig | None = None, m: int = 0) -> PrecoderSet:
    """Single-cell baseline precoder normalized as cell ``m`` of ``cfg``.

    Without ``cfg`` the trace normalization ``tr(F^H F) = K`` is used.
    """
    M = baseline_direction(kind, H, rho)
    if cfg is None:
        F, nu = normalize_matrix(M, H.shape[1], 1.0, NormMode.TRACE_K)
        mode = NormMode.TRACE_K
    else:
        F, nu = normalize(M, cfg, m)
        mode = cfg.norm_mode
    return PrecoderSet((F,), np.array([nu]), mode)


def orthogonal_projector(X: np.ndarray) -> np.ndarray:
    """Projector ``I - X (X^H X)^{-1} X^H`` onto the orthogonal complement of ``X``."""
    N = X.shape[0]
    if X.shape[1] == 0:
        return np.eye(N, dtype=complex)
    P = -_right_pinv(X) @ X.conj().T
    P[np.diag_indices(N)] += 1.0
    return 0.5 * (P + P.conj().T)


def _project_out(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``P_X^perp Y`` without forming the projector."""
    if X.shape[1] == 0:
        return Y.copy()
    return Y - _right_pinv(X) @ (X.conj().T @ Y)


def limit_precoder_alpha_inf(H: np.ndarray, G: np.ndarray, beta: float) -> np.ndarray:
    """Limit of ``alpha * M`` as the own-cell weight ``alpha`` grows (``xi = 1``).

    ``H (H^H H)^{-1} - Pp G (beta^{-1} I + G^H Pp G)^{-1} G^H H (H^H H)^{-1}``
    with ``Pp`` the projector orthogonal to ``H``. ``beta = 0`` gives ZF.
    """
    Z = _right_pinv(H)
    if beta == 0 or G.shape[1] == 0:
        return Z
    if not beta > 0:
        raise ValueError("beta must be nonnegative")
    PG = _project_out(H, G)
    inner = G.conj().T @ PG + (1.0 / beta) * np.eye(G.shape[1])
    inner = 0.5 * (inner + inner.conj().T)
    return Z - PG @ _hpd_solve(inner, G.conj().T @ Z)


def limit_precoder_beta_inf(H: np.ndarray, G: np.ndarray, alpha: float, xi: float = 1.0) -> np.ndarray:
    """Limit of the precoder as the cross-cell weight grows.

    ``Hc (xi I + alpha Hc^H Hc)^{-1}`` with ``Hc`` the projection of ``H``
    orthogonal to ``G``. An empty ``G`` gives single-cell RZF on ``H``.
    """
    if not xi > 0:
        raise ValueError("xi must be positive")
    Hc = _project_out(G, H)
    A = xi * np.eye(H.shape[1]) + alpha * (Hc.conj().T @ Hc)
    A = 0.5 * (A + A.conj().T)
    return _hpd_solve(A.T, Hc.T).T


def heuristic_iazf_precoder(H: np.ndarray, Ghat: np.ndarray, P: float, c: float, eps: float,
                            tau: float) -> np.ndarray:
    """Zero-forcing precoder that regularizes toward the other cell's channels.

    Same structure as :func:`limit_precoder_alpha_inf` with the inverse cross
    weight replaced by ``(P c eps tau^2 + 1) / (P (1 - tau^2))``.
    """
    if tau >= 1.0:
        raise ValueError("tau = 1 removes the cross-cell term; use plain ZF")
    shift = (P * c * eps * tau**2 + 1.0) / (P * (1.0 - tau**2))
    return limit_precoder_alpha_inf(H, Ghat, 1.0 / shift)

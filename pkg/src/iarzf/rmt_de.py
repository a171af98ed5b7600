r"""Large-system deterministic equivalents of the iaRZF SINR.

For every BS :math:`m` the scalar :math:`e_m` is the unique positive root of

.. math::

    e_m = \Big(\xi_m + \frac{1}{N_m}\sum_{l,k}
          \frac{\alpha^m_l \chi^m_{l,k}}{1 + \alpha^m_l \chi^m_{l,k} e_m}\Big)^{-1},

from which the derivative :math:`e'_m = \partial e_m / \partial \xi_m`, the
power term :math:`g_m`, the normalization :math:`\bar\nu_m` and the per-user
signal and interference powers follow in closed form.

The module also carries the symmetric two-cell specialization and its
limits for very large weights. These are coded from their own scalar
equations, not by calling the general engine, so the two can check each
other.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .precoding import WeightMatrix
from .system_model import SystemConfig

__all__ = [
    "ConvergenceError",
    "DEQuantities",
    "DeSinrReport",
    "fixed_point",
    "solve_e",
    "solve_e_prime",
    "de_quantities",
    "de_sinr",
    "row_terms",
    "SimpleDE",
    "simple_de",
    "limit_de_alpha_inf",
    "limit_de_beta_inf",
    "both_inf_sinr",
]

TOL = 1e-13
MAX_ITER = 10_000
BRACKET = (1e-300, 1e6)


class ConvergenceError(RuntimeError):
    """Fixed-point solve failed; ``history`` holds the residual trail."""

    def __init__(self, msg: str, history):
        super().__init__(msg)
        self.history = list(history)


# ---------------------------------------------------------------------------
# scalar fixed point, batched


def _s1(e, a, w):
    return np.sum(w * a / (1.0 + a * e[:, None]), axis=1)


def fixed_point(a, w, xi, e0=None, tol: float = TOL, max_iter: int = MAX_ITER):
    r"""Solve ``e = 1/(xi + sum_i w_i a_i / (1 + a_i e))`` for a batch.

    Parameters
    ----------
    a : array_like, shape (B, n)
        Nonnegative products ``alpha * chi``.
    w : array_like, shape (n,) or (B, n)
        Nonnegative multiplicities, ``1/N`` per user in the general system.
    xi : array_like, shape (B,)
        Positive regularization.
    e0 : array_like, optional
        Starting point; defaults to ``1/xi``.

    Returns
    -------
    e : ndarray, shape (B,)
    residual : ndarray, shape (B,)
        ``|Phi(e) - e| / e`` at the returned point.
    history : list of float
        Largest relative step per Picard iteration.

    Notes
    -----
    Picard iteration first, damped by one half once consecutive steps change
    sign. Entries that miss the tolerance within ``max_iter`` steps are
    finished by bisection on ``e (xi + S(e)) - 1``, which is increasing in
    ``e``, over ``log e``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    B = a.shape[0]
    w = np.broadcast_to(np.asarray(w, dtype=float), a.shape)
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (B,)).astype(float)
    if np.any(~(xi > 0)):
        raise ValueError("xi must be positive")
    if np.any(~np.isfinite(a)) or np.any(a < 0):
        raise ValueError("weights must be finite and nonnegative")
    e = 1.0 / xi if e0 is None else np.broadcast_to(np.asarray(e0, dtype=float), (B,)).copy()
    if np.any(~(e > 0)):
        raise ValueError("starting point must be positive")

    step_prev = np.zeros(B)
    damp = np.ones(B)
    active = np.ones(B, dtype=bool)
    history = []
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ei = e[idx]
        step = 1.0 / (xi[idx] + _s1(ei, a[idx], w[idx])) - ei
        damp[idx] = np.where(step * step_prev[idx] < 0, 0.5, damp[idx])
        e[idx] = ei + damp[idx] * step
        step_prev[idx] = step
        rel = np.abs(step) / ei
        history.append(float(rel.max()))
        active[idx[rel < tol]] = False

    res = np.abs(1.0 / (xi + _s1(e, a, w)) - e) / e
    bad = np.flatnonzero(active | ~(res < 10 * tol) | ~(e > 0))
    if bad.size:
        e[bad] = _bisect(a[bad], w[bad], xi[bad])
        res = np.abs(1.0 / (xi + _s1(e, a, w)) - e) / e
    if np.any(~np.isfinite(e)) or np.any(~(res < 1e-12)):
        raise ConvergenceError(f"fixed point did not converge (residual {np.nanmax(res):.3e})", history)
    return e, res, history


def _bisect(a, w, xi, n_iter: int = 200):
    lo = np.full(len(xi), np.log(BRACKET[0]))
    hi = np.full(len(xi), np.log(BRACKET[1]))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        em = np.exp(mid)
        r = em * (xi + _s1(em, a, w)) - 1.0
        pos = r > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo < 1e-16):
            break
    return np.exp(0.5 * (lo + hi))


# ---------------------------------------------------------------------------
# general system


@dataclass(frozen=True, eq=False)
class DEQuantities:
    """Per-BS fixed-point solution and derived terms.

    ``y[m][l]`` holds ``1/(1 + alpha[m, l] chi[m][l] e[m])`` per user of cell
    ``l``. ``e_prime``, ``g`` and ``nu_bar`` are ``None`` until
    :func:`solve_e_prime` has run.
    """

    e: np.ndarray
    y: tuple
    residual: np.ndarray
    e_prime: np.ndarray | None = None
    g: np.ndarray | None = None
    nu_bar: np.ndarray | None = None


def _products(cfg: SystemConfig, w: WeightMatrix, m: int) -> np.ndarray:
    return np.concatenate([w.alpha[m, l] * cfg.chi[m][l] for l in range(cfg.L)])


def solve_e(cfg: SystemConfig, w: WeightMatrix, e0=None, tol: float = TOL,
            max_iter: int = MAX_ITER) -> DEQuantities:
    """Fixed-point solution ``e_m`` and the factors ``y`` for every BS."""
    if w.L != cfg.L:
        raise ValueError("weight matrix does not match the number of cells")
    e = np.empty(cfg.L)
    res = np.empty(cfg.L)
    for m in range(cfg.L):
        a = _products(cfg, w, m)
        start = None if e0 is None else np.atleast_1d(e0)[m % np.size(e0)]
        em, rm, _ = fixed_point(a[None, :], 1.0 / cfg.N[m], cfg.xi[m], start, tol, max_iter)
        e[m], res[m] = em[0], rm[0]
    y = tuple(tuple(1.0 / (1.0 + w.alpha[m, l] * cfg.chi[m][l] * e[m]) for l in range(cfg.L))
              for m in range(cfg.L))
    return DEQuantities(e, y, res)


def solve_e_prime(cfg: SystemConfig, w: WeightMatrix, de: DEQuantities) -> DEQuantities:
    """Add ``e'_m``, ``g_m`` and ``nu_bar_m`` to a solved fixed point.

    Uses ``e' = -e^2 / (1 - e^2 (1/N) sum (a y)^2)``, which equals the inverse
    of the derivative bracket but stays accurate for small ``e``.
    """
    L = cfg.L
    ep, g, nu = np.empty(L), np.empty(L), np.empty(L)
    for m in range(L):
        a = _products(cfg, w, m)
        y = np.concatenate(de.y[m])
        s2 = np.sum((a * y) ** 2) / cfg.N[m]
        denom = 1.0 - de.e[m] ** 2 * s2
        if not denom > 0:
            raise ConvergenceError(f"BS {m}: derivative bracket is not negative", [denom])
        ep[m] = -de.e[m] ** 2 / denom
        g[m] = -np.sum(cfg.chi[m][m] * ep[m] * de.y[m][m] ** 2) / cfg.N[m]
        nu[m] = cfg.P[m] * cfg.K[m] / (cfg.N[m] * g[m])
    return replace(de, e_prime=ep, g=g, nu_bar=nu)


def de_quantities(cfg: SystemConfig, w: WeightMatrix) -> DEQuantities:
    return solve_e_prime(cfg, w, solve_e(cfg, w))


@dataclass(frozen=True, eq=False)
class DeSinrReport:
    """Per-user deterministic equivalents.

    ``int_by_source[l]`` has shape ``(L, K_l)``: row ``m`` is the power
    received from BS ``m`` (row ``l`` is the own-cell interference).
    """

    sig_bar: tuple
    int_by_source: tuple
    de: DEQuantities

    @property
    def int_bar(self) -> tuple:
        return tuple(t.sum(axis=0) for t in self.int_by_source)

    @property
    def sinr_bar(self) -> tuple:
        return tuple(s / (1.0 + i) for s, i in zip(self.sig_bar, self.int_bar))

    @property
    def rate_bar(self) -> tuple:
        return tuple(np.log2(1.0 + s) for s in self.sinr_bar)

    @property
    def sum_rate(self) -> float:
        return float(sum(r.sum() for r in self.rate_bar))

    @property
    def mean_rate(self) -> float:
        return self.sum_rate / sum(len(r) for r in self.rate_bar)


def de_sinr(cfg: SystemConfig, w: WeightMatrix, de: DEQuantities | None = None) -> DeSinrReport:
    """Deterministic equivalents of signal, interference and SINR of every user."""
    if de is None or de.g is None:
        de = de_quantities(cfg, w)
    L = cfg.L
    sig, ints = [], []
    for l in range(L):
        y = de.y[l][l]
        chi = cfg.chi[l][l]
        sig.append(de.nu_bar[l] * chi**2 * de.e[l] ** 2 * (1.0 - cfg.tau[l, l] ** 2) * y**2)
        rows = []
        for m in range(L):
            chi = cfg.chi[m][l]
            a = w.alpha[m, l]
            x = a * chi * cfg.tau[m, l] ** 2
            em = de.e[m]
            rows.append(de.nu_bar[m] * (1.0 + 2.0 * x * em + a * chi * x * em**2)
                        * chi * de.g[m] * de.y[m][l] ** 2)
        ints.append(np.array(rows))
    return DeSinrReport(tuple(sig), tuple(ints), de)


def row_terms(cfg: SystemConfig, m: int, alpha_rows, max_iter: int = MAX_ITER):
    """Everything BS ``m`` contributes, for a batch of weight rows.

    The deterministic equivalents of BS ``m`` depend on the weights only
    through row ``m`` of the weight table, which makes weight searches
    separable across base stations.

    Parameters
    ----------
    alpha_rows : array_like, shape (B, L)

    Returns
    -------
    sig : ndarray, shape (B, K_m)
        Signal power of the users of cell ``m``.
    intf : ndarray, shape (B, sum(K))
        Interference caused at every user of every cell, cells in order.
    """
    A = np.atleast_2d(np.asarray(alpha_rows, dtype=float))
    L = cfg.L
    chi = np.concatenate([cfg.chi[m][l] for l in range(L)])
    tau = np.concatenate([np.full(cfg.K[l], cfg.tau[m, l]) for l in range(L)])
    cell = np.repeat(np.arange(L), cfg.K)
    own = cell == m
    a = A[:, cell] * chi                                     # (B, sumK)
    Nm = cfg.N[m]
    e, _, _ = fixed_point(a, 1.0 / Nm, np.full(len(A), cfg.xi[m]), max_iter=max_iter)
    y = 1.0 / (1.0 + a * e[:, None])
    ep = -e**2 / (1.0 - e**2 * np.sum((a * y) ** 2, axis=1) / Nm)
    g = -ep * np.sum(chi[own] * y[:, own] ** 2, axis=1) / Nm
    nu = cfg.P[m] * cfg.K[m] / (Nm * g)
    sig = (nu * e**2 * (1.0 - cfg.tau[m, m] ** 2))[:, None] * chi[own] ** 2 * y[:, own] ** 2
    x = a * tau**2
    ec = e[:, None]
    intf = (nu * g)[:, None] * (1.0 + 2.0 * x * ec + a * x * ec**2) * chi * y**2
    return sig, intf


# ---------------------------------------------------------------------------
# symmetric two-cell system


class SimpleDE(NamedTuple):
    sig: float
    int_own: float
    int_other: float
    sinr: float

    @property
    def rate(self) -> float:
        return float(np.log2(1.0 + self.sinr))


def _root(h, lo: float = 0.0, hi: float = 1.0) -> float:
    """Root of an increasing scalar function on ``(lo, hi]``."""
    a = lo if lo > 0 else 1e-300
    if not (h(a) < 0 < h(hi) or h(hi) == 0):
        raise ConvergenceError("root is not bracketed", [h(a), h(hi)])
    if h(hi) == 0:
        return hi
    return brentq(h, a, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def simple_de(P: float, c: float, eps: float, tau: float, alpha: float, beta: float) -> SimpleDE:
    """Deterministic equivalents of the symmetric two-cell system (``xi = 1``).

    Own-cell CSI is perfect, cross-cell CSI has error ``tau``, the cross gain
    is ``eps`` and both cells share power ``P`` and load ``c``.
    """
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    ab = beta * eps

    def h(e):
        return e * (1.0 + c * alpha / (1.0 + alpha * e) + c * ab / (1.0 + ab * e)) - 1.0

    e = _root(h)
    ua = alpha * e / (1.0 + alpha * e)
    ub = ab * e / (1.0 + ab * e)
    sig = P * (1.0 - c * ua**2 - c * ub**2)
    int_own = P * c / (1.0 + alpha * e) ** 2
    t2 = tau * tau
    int_other = P * c * eps * (1.0 + 2.0 * ab * t2 * e + ab * ab * t2 * e * e) / (1.0 + ab * e) ** 2
    return SimpleDE(sig, int_own, int_other, sig / (1.0 + int_own + int_other))


def limit_de_alpha_inf(P: float, c: float, eps: float, tau: float, beta: float):
    """Two-cell deterministic equivalents as the own-cell weight grows.

    Returns ``(sig, int, sinr)``; the own-cell interference has vanished.
    """
    if not c < 1:
        raise ValueError("the own-cell limit needs c < 1")
    ab = beta * eps

    def h(e):
        return e + c + c * ab * e / (1.0 + ab * e) - 1.0

    e = _root(h)
    u = ab * e / (1.0 + ab * e)
    sig = P * (1.0 - c - c * u**2)
    t2 = tau * tau
    intf = P * c * eps * (1.0 + 2.0 * ab * t2 * e + ab * ab * t2 * e * e) / (1.0 + ab * e) ** 2
    return sig, intf, sig / (1.0 + intf)


def limit_de_beta_inf(P: float, c: float, eps: float, tau: float, alpha: float) -> SimpleDE:
    """Two-cell deterministic equivalents as the cross-cell weight grows."""
    if not c < 1:
        raise ValueError("the cross-cell limit needs c < 1")

    def h(e):
        return e + c * alpha * e / (1.0 + alpha * e) + c - 1.0

    e = _root(h)
    u = alpha * e / (1.0 + alpha * e)
    sig = P * (1.0 - c * u**2 - c)
    int_own = P * c / (1.0 + alpha * e) ** 2
    int_other = P * c * tau * tau * eps
    return SimpleDE(sig, int_own, int_other, sig / (1.0 + int_own + int_other))


def both_inf_sinr(P: float, c: float, eps: float, tau: float) -> float:
    """Two-cell SINR with both weights unbounded."""
    return P * (1.0 - 2.0 * c) / (P * c * eps * tau * tau + 1.0)

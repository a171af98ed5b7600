"""Weight selection for the iaRZF precoder.

Closed-form weights of the symmetric two-cell system in its large-weight
limits, the general heuristic table, and numeric searches over the
deterministic-equivalent (or Monte-Carlo) sum rate.

The deterministic equivalents of BS ``m`` depend only on row ``m`` of the
weight table. The searches exploit this: each row is evaluated on its own
grid and the per-user interference is assembled from the per-row tables, so a
grid of ``n`` points on each of ``L`` rows costs ``L n`` fixed-point solves
instead of ``n ** L``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .performance import monte_carlo
from .precoding import WeightMatrix
from .rmt_de import ConvergenceError, row_terms, simple_de
from .strategies import IaRZF
from .system_model import GeometricScenario, SystemConfig, trial_seed

__all__ = [
    "beta_opt_alpha_inf",
    "alpha_opt_beta_inf",
    "heuristic_weights",
    "scaled_power_weights",
    "effective_weight",
    "beta_opt_numeric",
    "Objective",
    "WeightGridSpec",
    "SearchResult",
    "placement_configs",
    "de_sum_rate",
    "grid_search",
    "coordinate_search",
]


# ---------------------------------------------------------------------------
# closed forms


def beta_opt_alpha_inf(P: float, c: float, eps: float, tau: float) -> float:
    """Best cross-cell weight when the own-cell weight is unbounded."""
    return P * (1.0 - tau**2) / (P * c * eps * tau**2 + 1.0)


def alpha_opt_beta_inf(P: float, c: float, eps: float, tau: float) -> float:
    """Best own-cell weight when the cross-cell weight is unbounded."""
    return P / (P * c * eps * tau**2 + 1.0)


def heuristic_weights(cfg: SystemConfig, load: str = "source") -> WeightMatrix:
    """Heuristic weight table for general layouts.

    ``alpha[a, b] = P_a (1 - tau_ab^2) / (P_b c eps_ab tau_ab^2 + 1)`` with
    ``eps_ab`` the mean gain from BS ``a`` to the users of cell ``b``.

    Parameters
    ----------
    load : {"source", "target"}
        Whether ``c`` is the load of the weighting cell ``a`` or of the
        weighted cell ``b``. Identical for homogeneous loads.
    """
    c = cfg.c
    if load == "source":
        cc = c[:, None]
    elif load == "target":
        cc = c[None, :]
    else:
        raise ValueError("load must be 'source' or 'target'")
    t2 = cfg.tau**2
    P = cfg.P
    A = P[:, None] * (1.0 - t2) / (P[None, :] * cc * cfg.eps() * t2 + 1.0)
    return WeightMatrix(A)


def scaled_power_weights(cfg: SystemConfig) -> WeightMatrix:
    """``alpha[a, b] = P_a (1 - tau_ab^2)``, the heuristic without the gain term."""
    return WeightMatrix(cfg.P[:, None] * (1.0 - cfg.tau**2))


def effective_weight(alpha_tilde, eps):
    """Weight actually seen by an interfering channel, ``alpha * eps``."""
    return np.multiply(alpha_tilde, eps)


def beta_opt_numeric(P: float, c: float, eps: float, tau: float, alpha: float | None = None,
                     bounds=(-6.0, 6.0)) -> float:
    """Cross-cell weight maximizing the two-cell DE rate, by bounded search on ``log10 beta``.

    ``alpha`` defaults to :func:`alpha_opt_beta_inf`.
    """
    if alpha is None:
        alpha = alpha_opt_beta_inf(P, c, eps, tau)
    res = minimize_scalar(lambda lb: -simple_de(P, c, eps, tau, alpha, 10.0**lb).sinr,
                          bounds=bounds, method="bounded", options={"xatol": 1e-10})
    return float(10.0 ** res.x)


# ---------------------------------------------------------------------------
# search


class Objective(str, Enum):
    DE_SUMRATE = "DE_SUMRATE"
    MC_SUMRATE = "MC_SUMRATE"


@dataclass(frozen=True)
class WeightGridSpec:
    """Grid over selected entries of the weight table.

    Parameters
    ----------
    free : sequence of (m, l)
        Entries searched, in the order used for tie-breaking.
    values : sequence of array_like
        Candidate values per free entry.
    base : array_like, optional
        Values of the entries that are not searched (default zeros).
    objective : Objective
    rounds : int
        Refinement rounds after the first pass.
    halfwidth : float
        Half-width in decades of the first refinement grid. Each later round
        shrinks it by ``shrink``.
    mc_trials : int
        Trials per point for ``MC_SUMRATE``.
    """

    free: tuple
    values: tuple
    base: np.ndarray | None = None
    objective: Objective = Objective.DE_SUMRATE
    rounds: int = 2
    halfwidth: float = 1.0
    shrink: float = 0.2
    mc_trials: int = 50

    def __post_init__(self) -> None:
        free = tuple((int(m), int(l)) for m, l in self.free)
        vals = tuple(np.unique(np.asarray(v, dtype=float)) for v in self.values)
        if len(free) != len(vals) or not free:
            raise ValueError("need one nonempty value list per free entry")
        if len(set(free)) != len(free):
            raise ValueError("free entries must be distinct")
        for v in vals:
            if v.size == 0 or np.any(~(v > 0)) or np.any(~np.isfinite(v)):
                raise ValueError("grid values must be positive and finite")
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "objective", Objective(self.objective))

    @classmethod
    def log_grid(cls, free: Sequence, n: int = 20, lo: float = 1e-3, hi: float = 1e3, **kw) -> "WeightGridSpec":
        v = np.logspace(np.log10(lo), np.log10(hi), n)
        return cls(tuple(free), tuple(v for _ in free), **kw)

    def base_matrix(self, L: int) -> np.ndarray:
        return np.zeros((L, L)) if self.base is None else np.array(self.base, dtype=float)


@dataclass
class SearchResult:
    weights: WeightMatrix
    objective: float
    trace: list = field(default_factory=list)
    failures: int = 0

    def trace_rows(self, free: Sequence) -> list:
        """Rows ``{alpha_m_l: ..., objective, incumbent}`` for CSV output."""
        names = [f"alpha_{m}_{l}" for m, l in free]
        return [dict(zip(names, pt), objective=obj, incumbent=inc) for pt, obj, inc in self.trace]


Scenario = Union[SystemConfig, GeometricScenario]


def placement_configs(scenario: Scenario, seed: int, n_placements: int) -> list:
    """Fixed configurations over which a search objective is averaged."""
    if isinstance(scenario, GeometricScenario):
        return [scenario.config(trial_seed(seed, i)) for i in range(n_placements)]
    return [scenario]


def de_sum_rate(cfgs: Sequence[SystemConfig], w: WeightMatrix) -> float:
    """DE sum rate averaged over configurations, via the per-row tables."""
    tot = 0.0
    for cfg in cfgs:
        S, T = _tables(cfg, [w.alpha[m][None, :] for m in range(cfg.L)])
        tot += float(_sum_rate_combine(cfg, S, T).ravel()[0])
    return tot / len(cfgs)


def _row_safe(cfg: SystemConfig, m: int, R: np.ndarray, max_iter: int = 2000):
    """:func:`row_terms` with rows whose fixed point fails set to NaN."""
    try:
        return row_terms(cfg, m, R, max_iter=max_iter)
    except (ConvergenceError, FloatingPointError, ValueError):
        s = np.full((len(R), cfg.K[m]), np.nan)
        t = np.full((len(R), cfg.total_users), np.nan)
        for i, r in enumerate(R):
            try:
                a, b = row_terms(cfg, m, r[None, :], max_iter=max_iter)
                s[i], t[i] = a[0], b[0]
            except (ConvergenceError, FloatingPointError, ValueError):
                pass
        return s, t


def _tables(cfg: SystemConfig, rows: Sequence[np.ndarray]):
    """Per-BS signal and interference tables for candidate rows."""
    out = [_row_safe(cfg, m, R) for m, R in enumerate(rows)]
    return [o[0] for o in out], [o[1] for o in out]


def _sum_rate_combine(cfg: SystemConfig, S, T) -> np.ndarray:
    """Sum rate over the outer product of per-row candidates.

    The result has one axis per BS, of length that BS's candidate count.
    """
    L = cfg.L
    counts = [len(s) for s in S]
    off = np.concatenate([[0], np.cumsum(cfg.K)])
    out = np.zeros(counts)
    # iterate over the first axis to bound memory
    for i0 in range(counts[0]):
        intf = T[0][i0]
        acc = intf.reshape((1,) * (L - 1) + (-1,))
        for m in range(1, L):
            shp = [1] * (L - 1) + [-1]
            shp[m - 1] = counts[m]
            acc = acc + T[m].reshape(shp)
        tot = np.zeros(counts[1:])
        for l in range(L):
            sig = S[l][i0] if l == 0 else S[l].reshape([counts[l] if j == l - 1 else 1 for j in range(L - 1)] + [-1])
            sinr = sig / (1.0 + acc[..., off[l]:off[l + 1]])
            tot = tot + np.log2(1.0 + sinr).sum(axis=-1)
        out[i0] = tot
    return out


def _de_objective_grid(cfgs, spec: WeightGridSpec, values) -> np.ndarray:
    """DE sum rate on the full grid, axes in ``spec.free`` order."""
    L = cfgs[0].L
    base = spec.base_matrix(L)
    by_row = [[d for d, (m, _) in enumerate(spec.free) if m == r] for r in range(L)]
    rows = []
    for r in range(L):
        dims = by_row[r]
        combos = list(itertools.product(*[values[d] for d in dims])) if dims else [()]
        R = np.repeat(base[r][None, :], len(combos), axis=0)
        for j, d in enumerate(dims):
            R[:, spec.free[d][1]] = [c[j] for c in combos]
        rows.append(R)
    acc = None
    for cfg in cfgs:
        S, T = _tables(cfg, rows)
        o = _sum_rate_combine(cfg, S, T)
        acc = o if acc is None else acc + o
    acc /= len(cfgs)
    # axes: per row, that row's free dims in order -> reorder to spec order
    shape, order = [], []
    for r in range(L):
        for d in by_row[r]:
            shape.append(len(values[d]))
            order.append(d)
    acc = acc.reshape(shape) if shape else acc.reshape(())
    return np.transpose(acc, np.argsort(order))


def _mc_objective_grid(scenario, spec: WeightGridSpec, values, seed: int) -> np.ndarray:
    L = len(scenario.N)
    base = spec.base_matrix(L)
    out = np.full([len(v) for v in values], np.nan)
    for idx in itertools.product(*[range(len(v)) for v in values]):
        A = base.copy()
        for d, i in enumerate(idx):
            A[spec.free[d]] = values[d][i]
        try:
            out[idx] = monte_carlo(scenario, IaRZF(WeightMatrix(A)), spec.mc_trials, seed).sum_rate
        except Exception:  # noqa: BLE001 - failed points are skipped
            pass
    return out


def grid_search(scenario: Scenario, spec: WeightGridSpec, seed: int = 0, n_placements: int = 20,
                keep_trace: bool = True) -> SearchResult:
    """Exhaustive grid search of the weight table with refinement.

    The objective is the sum rate (DE by default) averaged over
    ``n_placements`` user drops derived from ``seed`` for geometric
    scenarios. Ties go to the lexicographically smallest weight vector.
    Grid points whose evaluation fails are skipped.
    """
    if spec.objective is Objective.DE_SUMRATE:
        cfgs = placement_configs(scenario, seed, n_placements)
        L = cfgs[0].L
    else:
        L = len(scenario.N)
    values = list(spec.values)
    best_pt, best_obj = None, -np.inf
    trace, failures = [], 0
    hw = spec.halfwidth
    for rnd in range(spec.rounds + 1):
        if spec.objective is Objective.DE_SUMRATE:
            obj = _de_objective_grid(cfgs, spec, values)
        else:
            obj = _mc_objective_grid(scenario, spec, values, seed)
        ok = np.isfinite(obj)
        failures += int(np.size(obj) - ok.sum())
        if not ok.any():
            if best_pt is None:
                raise RuntimeError("objective failed at every grid point")
            break
        flat = np.where(ok, obj, -np.inf).ravel()
        i = int(np.argmax(flat))
        idx = np.unravel_index(i, obj.shape)
        pt = tuple(values[d][j] for d, j in enumerate(idx))
        if flat[i] > best_obj or (flat[i] == best_obj and pt < best_pt):
            best_pt, best_obj = pt, float(flat[i])
        if keep_trace:
            for j, o in enumerate(flat):
                k = np.unravel_index(j, obj.shape)
                trace.append((tuple(values[d][kk] for d, kk in enumerate(k)), float(o), j == i))
        if rnd == spec.rounds:
            break
        n = [len(v) for v in spec.values]
        values = [np.logspace(np.log10(v) - hw, np.log10(v) + hw, max(nn, 2)) if nn > 1 else np.array([v])
                  for v, nn in zip(best_pt, n)]
        hw *= spec.shrink
    A = spec.base_matrix(L)
    for d, v in enumerate(best_pt):
        A[spec.free[d]] = v
    return SearchResult(WeightMatrix(A), best_obj, trace, failures)


def coordinate_search(cfg: SystemConfig, start: WeightMatrix, free: Sequence | None = None,
                      factors=None, sweeps: int = 6, tol: float = 1e-9) -> SearchResult:
    """Cyclic coordinate search of the DE sum rate from a starting table.

    Every free entry in turn is multiplied by each of ``factors`` (plus an
    entry of zero) and the best value is kept. The factor set narrows after
    each sweep without improvement. Intended for tables too large for an
    exhaustive grid.
    """
    L = cfg.L
    free = [(m, l) for m in range(L) for l in range(L)] if free is None else [tuple(f) for f in free]
    factors = np.logspace(-1.0, 1.0, 9) if factors is None else np.asarray(factors, dtype=float)
    A = start.alpha.copy()
    S, T = _tables(cfg, [A[m][None, :] for m in range(L)])
    S = [s[0] for s in S]
    T = [t[0] for t in T]
    off = np.concatenate([[0], np.cumsum(cfg.K)])

    def total(Sl, Tsum):
        return sum(np.log2(1.0 + Sl[l] / (1.0 + Tsum[off[l]:off[l + 1]])).sum() for l in range(L))

    Tsum = np.sum(T, axis=0)
    best = total(S, Tsum)
    trace = [(tuple(A[f] for f in free), best, True)]
    span = 1.0
    for _ in range(sweeps):
        improved = False
        for (m, l) in free:
            cand = np.unique(np.concatenate([[0.0], A[m, l] * factors ** span])) if A[m, l] > 0 else \
                np.unique(np.concatenate([[0.0], np.logspace(-3, 3, 13)]))
            R = np.repeat(A[m][None, :], len(cand), axis=0)
            R[:, l] = cand
            s, t = _row_safe(cfg, m, R)
            objs = np.full(len(cand), -np.inf)
            for i in range(len(cand)):
                if not np.all(np.isfinite(s[i])):
                    continue
                Sl = list(S)
                Sl[m] = s[i]
                objs[i] = total(Sl, Tsum - T[m] + t[i])
            i = int(np.argmax(objs))
            if objs[i] > best * (1.0 + tol):
                best = float(objs[i])
                A[m, l] = cand[i]
                S[m] = s[i]
                Tsum = Tsum - T[m] + t[i]
                T[m] = t[i]
                improved = True
                trace.append((tuple(A[f] for f in free), best, True))
        if not improved:
            span *= 0.5
            if span < 1e-3:
                break
    return SearchResult(WeightMatrix(A), best, trace)

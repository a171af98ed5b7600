"""Exact SINR of drawn channels and the Monte-Carlo rate engine."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .precoding import PrecoderSet
from .system_model import (
    ChannelRealization,
    CsiEstimate,
    GeometricScenario,
    SystemConfig,
    draw_channels,
    estimate_csi,
    trial_seed,
)

__all__ = [
    "SinrBreakdown",
    "RateReport",
    "TrialError",
    "user_sinr",
    "cell_sinr",
    "trial_rates",
    "monte_carlo",
    "thread_count",
]

Strategy = Callable[[SystemConfig, CsiEstimate], PrecoderSet]
Scenario = Union[SystemConfig, GeometricScenario]


class TrialError(RuntimeError):
    """A Monte-Carlo trial failed; ``trial`` is its index."""

    def __init__(self, trial: int, exc: BaseException):
        super().__init__(f"trial {trial}: {type(exc).__name__}: {exc}")
        self.trial = trial


@dataclass(frozen=True)
class SinrBreakdown:
    """Signal, interference split and SINR of one user or one cell's users.

    ``int_inter`` has one entry per BS (axis 0); the entry of the own BS is 0
    because own-cell interference is reported in ``int_intra``.
    """

    sig: np.ndarray
    int_intra: np.ndarray
    int_inter: np.ndarray

    @property
    def interference(self) -> np.ndarray:
        return self.int_intra + np.sum(self.int_inter, axis=0)

    @property
    def sinr(self) -> np.ndarray:
        return self.sig / (1.0 + self.interference)

    @property
    def rate(self) -> np.ndarray:
        return np.log2(1.0 + self.sinr)


def user_sinr(cfg: SystemConfig, ch: ChannelRealization, F: PrecoderSet, l: int, k: int) -> SinrBreakdown:
    """SINR of user ``k`` in cell ``l`` under precoders ``F``.

    Own-cell interference uses the normalized precoder of cell ``l`` with
    column ``k`` removed, so the power scalar is the full-precoder one.
    """
    if not (0 <= l < cfg.L and 0 <= k < cfg.K[l]):
        raise IndexError(f"no user {k} in cell {l}")
    scale = F.power_scale(cfg)
    inter = np.zeros(cfg.L)
    sig = intra = 0.0
    for m in range(cfg.L):
        h = ch.H[m][l][:, k]
        chi = cfg.chi[m][l][k]
        if m == l:
            sig = scale[m] * chi * abs(np.vdot(h, F.F[m][:, k])) ** 2
            loo = np.delete(F.F[m], k, axis=1)
            intra = scale[m] * chi * np.sum(np.abs(h.conj() @ loo) ** 2)
        else:
            inter[m] = scale[m] * chi * np.sum(np.abs(h.conj() @ F.F[m]) ** 2)
    return SinrBreakdown(np.float64(sig), np.float64(intra), inter)


def cell_sinr(cfg: SystemConfig, ch: ChannelRealization, F: PrecoderSet) -> tuple:
    """Vectorized :func:`user_sinr` for every user, one breakdown per cell."""
    scale = F.power_scale(cfg)
    out = []
    for l in range(cfg.L):
        inter = np.zeros((cfg.L, cfg.K[l]))
        for m in range(cfg.L):
            pw = np.abs(ch.H[m][l].conj().T @ F.F[m]) ** 2
            pw *= (scale[m] * cfg.chi[m][l])[:, None]
            if m == l:
                sig = np.diagonal(pw).copy()
                np.fill_diagonal(pw, 0.0)
                intra = pw.sum(axis=1)
            else:
                inter[m] = pw.sum(axis=1)
        out.append(SinrBreakdown(sig, intra, inter))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class RateReport:
    """Aggregated Monte-Carlo rates in bit/s/Hz.

    ``per_user_rates`` is the trial average of each user's rate, cells
    concatenated. ``ci95_halfwidth`` is the normal-approximation half-width
    of the mean over per-trial user-averaged rates.
    """

    per_user_rates: np.ndarray
    trial_means: np.ndarray
    trials: int
    seed: int
    strategy: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.trial_means))

    @property
    def sum_rate(self) -> float:
        return self.mean_rate * len(self.per_user_rates)

    @property
    def ci95_halfwidth(self) -> float:
        if self.trials < 2:
            return float("nan")
        return float(1.96 * np.std(self.trial_means, ddof=1) / np.sqrt(self.trials))

    def to_row(self, scenario_id: str, P_dB: float, tau_params: str) -> dict:
        return {
            "scenario_id": scenario_id,
            "strategy": self.strategy,
            "P_dB": P_dB,
            "tau_params": tau_params,
            "trials": self.trials,
            "seed": self.seed,
            "mean_rate": self.mean_rate,
            "ci95": self.ci95_halfwidth,
        }


def thread_count(requested: int | None = None) -> int:
    """Worker threads, capped by the ``IARZF_THREADS`` environment variable."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("IARZF_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def trial_rates(scenario: Scenario, strategy: Strategy, master_seed: int, t: int) -> np.ndarray:
    """User rates of trial ``t``, cells concatenated."""
    ts = trial_seed(master_seed, t)
    try:
        cfg = scenario.config(ts) if isinstance(scenario, GeometricScenario) else scenario
        ch = draw_channels(cfg, ts)
        csi = estimate_csi(cfg, ch, ts)
        F = strategy(cfg, csi)
        return np.concatenate([b.rate for b in cell_sinr(cfg, ch, F)])
    except Exception as exc:  # noqa: BLE001 - re-raised with the trial index
        raise TrialError(t, exc) from exc


def monte_carlo(scenario: Scenario, strategy: Strategy, trials: int, master_seed: int,
                threads: int | None = None) -> RateReport:
    """Average user rate over independent trials.

    Each trial redraws the user placement (geometric scenarios), the
    channels and the CSI errors from substreams of ``(master_seed, t)``, so
    the report does not depend on the number of threads.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    n = thread_count(threads)
    args = range(trials)
    run = lambda t: trial_rates(scenario, strategy, master_seed, t)  # noqa: E731
    if n == 1:
        rates = [run(t) for t in args]
    else:
        with ThreadPoolExecutor(n) as ex:
            rates = list(ex.map(run, args))
    R = np.vstack(rates)
    return RateReport(R.mean(axis=0), R.mean(axis=1), trials, master_seed, getattr(strategy, "name", ""))

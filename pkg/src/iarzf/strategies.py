"""Precoder recipes for the Monte-Carlo engine.

A strategy is a callable ``(cfg, csi) -> PrecoderSet`` with a ``name``.
Weights may be fixed or computed from the drawn scenario, which matters when
users are re-placed every trial.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .precoding import Baseline, PrecoderSet, WeightMatrix, baseline_direction, iarzf_precoder, normalize
from .system_model import CsiEstimate, SystemConfig

__all__ = ["IaRZF", "SingleCell", "WeightRule"]

WeightRule = Callable[[SystemConfig], WeightMatrix]


@dataclass(frozen=True)
class IaRZF:
    """iaRZF with a fixed weight table or a rule evaluated per scenario."""

    weights: Union[WeightMatrix, WeightRule]
    name: str = "iaRZF"

    def weights_for(self, cfg: SystemConfig) -> WeightMatrix:
        return self.weights if isinstance(self.weights, WeightMatrix) else self.weights(cfg)

    def __call__(self, cfg: SystemConfig, csi: CsiEstimate) -> PrecoderSet:
        return iarzf_precoder(csi, self.weights_for(cfg), cfg)


@dataclass(frozen=True)
class SingleCell:
    """Each BS runs a baseline precoder on its own-cell estimate only.

    RZF is regularized with ``K/(N rho)`` where ``rho = P K / N``, which is
    ``1/P`` in terms of the per-user power.
    """

    kind: Baseline
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Baseline(self.kind))
        if not self.name:
            object.__setattr__(self, "name", self.kind.value)

    def __call__(self, cfg: SystemConfig, csi: CsiEstimate) -> PrecoderSet:
        F, nu = [], []
        for m in range(cfg.L):
            rho = cfg.P[m] * cfg.K[m] / cfg.N[m]
            f, n = normalize(baseline_direction(self.kind, csi.Hhat[m][m], rho), cfg, m)
            F.append(f)
            nu.append(n)
        return PrecoderSet(tuple(F), np.array(nu), cfg.norm_mode)

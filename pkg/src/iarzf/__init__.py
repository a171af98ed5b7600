"""Interference-aware RZF precoding for multi-cell MIMO downlinks.

Modules
-------
system_model
    Scenarios, channel draws and Gauss-Markov CSI.
precoding
    iaRZF, baselines, projection and limit precoders, normalization.
performance
    Exact SINR and the Monte-Carlo rate engine.
rmt_de
    Large-system deterministic equivalents.
weights
    Closed-form and heuristic weights, grid and coordinate searches.
experiments, cli
    Figure pipelines, plan runner and the ``iarzf`` command.
"""
from .performance import RateReport, SinrBreakdown, cell_sinr, monte_carlo, user_sinr
from .precoding import (
    Baseline,
    PrecoderSet,
    RankDeficientError,
    WeightMatrix,
    baseline_precoder,
    heuristic_iazf_precoder,
    iarzf_precoder,
    limit_precoder_alpha_inf,
    limit_precoder_beta_inf,
    normalize,
    orthogonal_projector,
)
from .rmt_de import (
    ConvergenceError,
    DEQuantities,
    DeSinrReport,
    de_sinr,
    limit_de_alpha_inf,
    limit_de_beta_inf,
    simple_de,
    solve_e,
    solve_e_prime,
)
from .strategies import IaRZF, SingleCell
from .system_model import (
    ChannelRealization,
    ConfigError,
    CsiEstimate,
    GeometricScenario,
    GeometrySpec,
    NormMode,
    SystemConfig,
    build_geometric_config,
    build_wyner_config,
    draw_channels,
    estimate_csi,
    load_scenario,
)
from .weights import (
    WeightGridSpec,
    alpha_opt_beta_inf,
    beta_opt_alpha_inf,
    coordinate_search,
    effective_weight,
    grid_search,
    heuristic_weights,
)

__version__ = "0.1.0"

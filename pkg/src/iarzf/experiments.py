"""Figure pipelines and plan-driven sweeps producing CSV series.

Every series is a list of rows with columns ``x_value, method, mean_rate,
ci95, trials, seed``. Deterministic-equivalent rows carry ``trials = 0`` and
an empty ``ci95``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .performance import monte_carlo
from .precoding import Baseline, WeightMatrix
from .rmt_de import de_sinr, limit_de_alpha_inf, limit_de_beta_inf, simple_de
from .strategies import IaRZF, SingleCell
from .system_model import (
    GeometricScenario,
    NormMode,
    SystemConfig,
    build_wyner_config,
    load_scenario,
    scenario_to_dict,
    square_geometry,
    two_bs_geometry,
)
from .weights import (
    WeightGridSpec,
    alpha_opt_beta_inf,
    beta_opt_alpha_inf,
    beta_opt_numeric,
    coordinate_search,
    grid_search,
    heuristic_weights,
    placement_configs,
    scaled_power_weights,
)

__all__ = [
    "COLUMNS",
    "FIGURES",
    "ExperimentPlan",
    "PlanError",
    "db_to_linear",
    "fig2_config",
    "fig2",
    "fig3",
    "fig4",
    "fig6",
    "fig7",
    "run_figure",
    "run_plan",
    "optimize_plan",
    "write_series",
    "resolve_strategy",
]

COLUMNS = ("x_value", "method", "mean_rate", "ci95", "trials", "seed")

# simple two-cell system
N_SIMPLE, K_SIMPLE, EPS_SIMPLE = 160, 40, 0.7
# large-weight stand-in where a closed-form limit is not available
LARGE_WEIGHT = 1e10


class PlanError(ValueError):
    """Invalid experiment plan."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    if n < 1:
        raise PlanError("empty sweep")
    return np.round(start + step * np.arange(n), 10)


def _mc_row(x, rep) -> dict:
    return {"x_value": float(x), "method": "MC", "mean_rate": rep.mean_rate,
            "ci95": rep.ci95_halfwidth, "trials": rep.trials, "seed": rep.seed}


def _de_row(x, rate, seed="") -> dict:
    return {"x_value": float(x), "method": "DE", "mean_rate": float(rate), "ci95": "", "trials": 0, "seed": seed}


def write_series(out: Path, prefix: str, series: Mapping[str, list], columns=COLUMNS) -> list:
    """Write one CSV per series; returns the paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, rows in series.items():
        p = out / f"{prefix}_{name}.csv"
        cols = columns if rows and set(columns) <= set(rows[0]) else tuple(rows[0]) if rows else columns
        with p.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(cols), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# two-cell system, power sweep


def fig2_config(rho_db: float, tau: float, N: int = N_SIMPLE, K: int = K_SIMPLE,
                eps: float = EPS_SIMPLE) -> SystemConfig:
    """Two-cell configuration of the power sweep at symbol SNR ``rho``.

    The symbol vector carries power ``rho`` per transmit antenna, so each
    user stream gets ``rho N / K``; that is the symbol power of the trace
    normalization.
    """
    rho = db_to_linear(rho_db)
    return build_wyner_config(N, K, eps, tau, 0.0, rho * N / K, 1.0, NormMode.TRACE_K)


FIG2_IARZF_TAUS = (0.0, 0.5, 1.0)


def fig2(trials: int = 500, seed: int = 0, de_only: bool = False, x_db: Sequence[float] | None = None,
         threads: int | None = None) -> dict:
    """Two-cell average rate versus symbol SNR.

    iaRZF uses ``alpha = beta = N rho`` and ``xi = 1`` at three CSI levels;
    the baselines are single-cell RZF, ZF and MRT.
    """
    x_db = _grid(-15, 15, 1) if x_db is None else np.asarray(x_db, float)
    out: dict = {}
    for tau in FIG2_IARZF_TAUS:
        rows = []
        for x in x_db:
            cfg = fig2_config(x, tau)
            w = WeightMatrix.two_cell(N_SIMPLE * db_to_linear(x), N_SIMPLE * db_to_linear(x))
            if de_only:
                rows.append(_de_row(x, de_sinr(cfg, w).mean_rate))
            else:
                rows.append(_mc_row(x, monte_carlo(cfg, IaRZF(w), trials, seed, threads)))
        out[f"iarzf_tau{tau:g}"] = rows
    c = K_SIMPLE / N_SIMPLE
    for kind in (Baseline.RZF, Baseline.ZF, Baseline.MRT):
        rows = []
        for x in x_db:
            cfg = fig2_config(x, 0.0)
            P = float(cfg.P[0])
            if de_only:
                if kind is Baseline.ZF:
                    rate = np.log2(1.0 + limit_de_alpha_inf(P, c, EPS_SIMPLE, 0.0, 0.0)[2])
                else:
                    a = P if kind is Baseline.RZF else 0.0
                    rate = simple_de(P, c, EPS_SIMPLE, 0.0, a, 0.0).rate
                rows.append(_de_row(x, rate))
            else:
                rows.append(_mc_row(x, monte_carlo(cfg, SingleCell(kind), trials, seed, threads)))
        out[kind.value.lower()] = rows
    return out


# ---------------------------------------------------------------------------
# two-cell system, CSI sweep


def _argmax_log(f: Callable[[float], float], lo: float = -4.0, hi: float = 4.0) -> float:
    r = minimize_scalar(lambda t: -f(10.0**t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(10.0**r.x)


def fig3(P_db: float = 10.0, taus: Sequence[float] | None = None, grid_points: int = 20,
         seed: int = 0) -> dict:
    """Two-cell DE rate versus cross-cell CSI error for adaptive weights.

    Series: the full 4-weight grid optimum, the closed-form pair, each
    closed form with the other weight unbounded, and single-cell RZF with
    the best own weight. A further series traces the best cross weight.
    """
    taus = _grid(0, 1, 0.05) if taus is None else np.asarray(taus, float)
    P, c, e = db_to_linear(P_db), K_SIMPLE / N_SIMPLE, EPS_SIMPLE
    a0 = _argmax_log(lambda a: simple_de(P, c, e, 0.0, a, 0.0).sinr)
    rzf_rate = simple_de(P, c, e, 0.0, a0, 0.0).rate
    out = {k: [] for k in ("grid_search", "closed_form", "alpha_inf_beta_opt", "alpha_opt_beta_inf",
                           "single_cell_rzf")}
    trace = []
    spec = WeightGridSpec.log_grid([(0, 0), (1, 1), (0, 1), (1, 0)], n=grid_points)
    for t in taus:
        a, b = alpha_opt_beta_inf(P, c, e, t), beta_opt_alpha_inf(P, c, e, t)
        cfg = build_wyner_config(N_SIMPLE, K_SIMPLE, e, t, 0.0, P, 1.0)
        res = grid_search(cfg, spec, seed, keep_trace=False)
        out["grid_search"].append(_de_row(t, res.objective / cfg.total_users))
        out["closed_form"].append(_de_row(t, simple_de(P, c, e, t, a, b).rate))
        out["alpha_inf_beta_opt"].append(_de_row(t, np.log2(1.0 + limit_de_alpha_inf(P, c, e, t, b)[2])))
        out["alpha_opt_beta_inf"].append(_de_row(t, limit_de_beta_inf(P, c, e, t, a).rate))
        out["single_cell_rzf"].append(_de_row(t, rzf_rate))
        trace.append({"x_value": float(t), "method": "DE", "beta_opt": b,
                      "beta_numeric": beta_opt_numeric(P, c, e, t, a)})
    out["beta_opt_trace"] = trace
    return out


FIG4_BETAS = (1.0, 5.0, 10.0, 100.0)


def fig4(P_db: float = 10.0, taus: Sequence[float] | None = None) -> dict:
    """Two-cell DE rate versus CSI error for constant cross weights.

    The own weight follows its closed form for an unbounded cross weight.
    """
    taus = _grid(0, 1, 0.05) if taus is None else np.asarray(taus, float)
    P, c, e = db_to_linear(P_db), K_SIMPLE / N_SIMPLE, EPS_SIMPLE
    out: dict = {"beta_opt": []}
    for b in FIG4_BETAS:
        out[f"beta{b:g}"] = []
    for t in taus:
        a = alpha_opt_beta_inf(P, c, e, t)
        out["beta_opt"].append(_de_row(t, simple_de(P, c, e, t, a, beta_opt_alpha_inf(P, c, e, t)).rate))
        for b in FIG4_BETAS:
            out[f"beta{b:g}"].append(_de_row(t, simple_de(P, c, e, t, a, b).rate))
    return out


# ---------------------------------------------------------------------------
# geometric layouts


FIG6_CASES = {
    "a": dict(tau=(0.0, 0.4), N=(160, 160), K=(40, 40)),
    "b": dict(tau=(0.1, 0.5), N=(160, 160), K=(40, 40)),
    "c": dict(tau=(0.1, 0.5), N=(160, 60), K=(40, 20)),
}


def fig6_scenario(case: str, P: float = 1.0) -> GeometricScenario:
    p = FIG6_CASES[case]
    return GeometricScenario(two_bs_geometry(*p["tau"]), p["N"], p["K"], P)


def fig7_scenario(P: float = 1.0) -> GeometricScenario:
    return GeometricScenario(square_geometry((0.1, 0.3, 0.4)), (160,) * 4, (40,) * 4, P)


def _mean_de(cfgs, rule) -> float:
    return float(np.mean([de_sinr(cfg, rule(cfg)).mean_rate for cfg in cfgs]))


def fig6_point(case: str, P_db: float, seed: int = 0, n_placements: int = 20, grid_points: int = 20):
    """Heuristic and grid-optimal DE rates at one power, plus the optimal table."""
    sc = fig6_scenario(case, db_to_linear(P_db))
    cfgs = placement_configs(sc, seed, n_placements)
    spec = WeightGridSpec.log_grid([(0, 0), (0, 1), (1, 0), (1, 1)], n=grid_points)
    res = grid_search(sc, spec, seed, n_placements, keep_trace=False)
    heur = _mean_de(cfgs, heuristic_weights)
    return heur, res.objective / sum(sc.K), res.weights


def fig6(trials: int = 500, seed: int = 0, de_only: bool = False, cases: Sequence[str] = ("a", "b", "c"),
         x_db: Sequence[float] | None = None, mc_db: Sequence[float] | None = None,
         n_placements: int = 20, threads: int | None = None) -> dict:
    """Two-BS geometric layout: heuristic weights versus grid-optimal weights.

    DE rows are averages over ``n_placements`` user drops; the grid optimum
    is one weight table per power shared by those drops. MC rows redraw the
    drop every trial.
    """
    x_db = _grid(-15, 20, 1) if x_db is None else np.asarray(x_db, float)
    mc_db = _grid(-15, 20, 5) if mc_db is None else np.asarray(mc_db, float)
    out: dict = {}
    for case in cases:
        heur_rows, opt_rows, best = [], [], {}
        for x in x_db:
            h, o, w = fig6_point(case, x, seed, n_placements)
            best[float(x)] = w
            heur_rows.append(_de_row(x, h, seed))
            opt_rows.append(_de_row(x, o, seed))
        if not de_only:
            for x in mc_db:
                sc = fig6_scenario(case, db_to_linear(x))
                w = best.get(float(x)) or fig6_point(case, x, seed, n_placements)[2]
                heur_rows.append(_mc_row(x, monte_carlo(sc, IaRZF(heuristic_weights, "heuristic"), trials, seed,
                                                        threads)))
                opt_rows.append(_mc_row(x, monte_carlo(sc, IaRZF(w, "optimal"), trials, seed, threads)))
        out[f"case{case}_heuristic"] = heur_rows
        out[f"case{case}_optimal"] = opt_rows
    return out


def _constant(v: float):
    return lambda cfg: WeightMatrix.constant(cfg.L, v)


def _rzf_weights(cfg: SystemConfig) -> WeightMatrix:
    # single-cell RZF with regularization 1/P equals iaRZF with alpha_mm = P
    return WeightMatrix(np.diag(cfg.P))


FIG7_RULES = {
    "heuristic": heuristic_weights,
    "scaled_power": scaled_power_weights,
    "constant0.1": _constant(0.1),
}


def fig7(trials: int = 500, seed: int = 0, de_only: bool = False, x_db: Sequence[float] | None = None,
         mc_db: Sequence[float] | None = None, n_placements: int = 20, threads: int | None = None) -> dict:
    """Four-BS square layout: weight rules, single-cell RZF and a numeric search.

    The numeric series runs a coordinate search of all sixteen weights per
    user drop, started from the heuristic table; it is DE only.
    """
    x_db = _grid(-15, 20, 1) if x_db is None else np.asarray(x_db, float)
    mc_db = _grid(-15, 20, 5) if mc_db is None else np.asarray(mc_db, float)
    out: dict = {k: [] for k in ("numeric", *FIG7_RULES, "rzf")}
    for x in x_db:
        cfgs = placement_configs(fig7_scenario(db_to_linear(x)), seed, n_placements)
        for name, rule in FIG7_RULES.items():
            out[name].append(_de_row(x, _mean_de(cfgs, rule), seed))
        out["rzf"].append(_de_row(x, _mean_de(cfgs, _rzf_weights), seed))
        num = np.mean([coordinate_search(cfg, heuristic_weights(cfg)).objective / cfg.total_users for cfg in cfgs])
        out["numeric"].append(_de_row(x, num, seed))
    if not de_only:
        for x in mc_db:
            sc = fig7_scenario(db_to_linear(x))
            for name, rule in FIG7_RULES.items():
                out[name].append(_mc_row(x, monte_carlo(sc, IaRZF(rule, name), trials, seed, threads)))
            out["rzf"].append(_mc_row(x, monte_carlo(sc, SingleCell(Baseline.RZF), trials, seed, threads)))
    return out


FIGURES = {"fig2": fig2, "fig3": fig3, "fig4": fig4, "fig6": fig6, "fig7": fig7}


def run_figure(fig_id: str, out: Path, trials: int = 500, seed: int = 0, de_only: bool = False,
               threads: int | None = None) -> list:
    """Run a built-in figure pipeline and write its CSV files."""
    if fig_id not in FIGURES:
        raise PlanError(f"unknown figure id {fig_id!r}; choose from {sorted(FIGURES)}")
    if fig_id in ("fig3", "fig4"):
        series = FIGURES[fig_id]() if fig_id == "fig4" else fig3(seed=seed)
    else:
        series = FIGURES[fig_id](trials=trials, seed=seed, de_only=de_only, threads=threads)
    trace = series.pop("beta_opt_trace", None)
    paths = write_series(out, fig_id, series)
    if trace is not None:
        paths += write_series(out, fig_id, {"beta_opt_trace": trace},
                              columns=("x_value", "method", "beta_opt", "beta_numeric"))
    return paths


# ---------------------------------------------------------------------------
# custom plans


def resolve_strategy(spec) -> tuple:
    """Map a strategy spec to ``(name, mc_strategy, weight_rule)``.

    Accepted names: ``heuristic``, ``heuristic_target``, ``scaled_power``,
    ``constant:<v>``, ``iarzf`` (with an ``alpha`` table), ``rzf``, ``zf``,
    ``mrt``. ``weight_rule`` maps a configuration to the iaRZF weights whose
    DE describes the strategy, or is ``None`` when no DE applies.
    """
    if isinstance(spec, Mapping):
        name = spec.get("name")
        params = spec
    else:
        name, params = str(spec), {}
    if not name:
        raise PlanError("strategy without a name")
    key, _, arg = name.partition(":")
    key = key.lower()
    if key == "heuristic":
        rule = heuristic_weights
    elif key == "heuristic_target":
        rule = lambda cfg: heuristic_weights(cfg, "target")  # noqa: E731
    elif key == "scaled_power":
        rule = scaled_power_weights
    elif key == "constant":
        try:
            rule = _constant(float(arg or params["value"]))
        except (KeyError, ValueError) as exc:
            raise PlanError(f"constant strategy needs a value: {name!r}") from exc
    elif key == "iarzf":
        if "alpha" not in params:
            raise PlanError("iarzf strategy needs an alpha table")
        W = WeightMatrix(np.asarray(params["alpha"], float))
        rule = lambda cfg: W  # noqa: E731
    elif key in ("rzf", "zf", "mrt"):
        kind = Baseline(key.upper())
        if kind is Baseline.RZF:
            de_rule = _rzf_weights
        elif kind is Baseline.MRT:
            de_rule = lambda cfg: WeightMatrix(np.zeros((cfg.L, cfg.L)))  # noqa: E731
        else:
            de_rule = lambda cfg: WeightMatrix(np.eye(cfg.L) * LARGE_WEIGHT)  # noqa: E731
        return name, SingleCell(kind, name), de_rule
    else:
        raise PlanError(f"unknown strategy {name!r}")
    return name, IaRZF(rule, name), rule


@dataclass
class ExperimentPlan:
    """A figure id, or a scenario with a one-variable sweep and strategies.

    ``sweep`` has ``variable`` (``P_dB``, ``tau`` or ``beta``), ``start``,
    ``stop`` and ``step``. ``method`` is ``MC``, ``DE`` or ``both``.
    """

    figure: str | None = None
    scenario: dict | None = None
    sweep: dict = field(default_factory=dict)
    strategies: list = field(default_factory=list)
    trials: int = 500
    master_seed: int = 0
    output: str = "results"
    method: str = "MC"
    n_placements: int = 20
    de_only: bool = False

    @classmethod
    def from_json(cls, src) -> "ExperimentPlan":
        d = json.loads(Path(src).read_text()) if not isinstance(src, Mapping) else dict(src)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise PlanError(f"unknown plan keys {sorted(extra)}")
        return cls(**d)

    def validate(self) -> None:
        if self.figure is not None:
            if self.figure not in FIGURES:
                raise PlanError(f"unknown figure id {self.figure!r}")
            return
        if self.scenario is None:
            raise PlanError("plan needs a figure id or a scenario")
        if not self.strategies:
            raise PlanError("strategy list is empty")
        for s in self.strategies:
            resolve_strategy(s)
        v = self.sweep.get("variable")
        if v not in ("P_dB", "tau", "beta"):
            raise PlanError("sweep variable must be P_dB, tau or beta")
        try:
            _grid(float(self.sweep["start"]), float(self.sweep["stop"]), float(self.sweep["step"]))
        except KeyError as exc:
            raise PlanError(f"sweep is missing {exc}") from exc
        if self.method not in ("MC", "DE", "both"):
            raise PlanError("method must be MC, DE or both")
        if self.trials < 1:
            raise PlanError("trials must be positive")


def _at(scenario, variable: str, x: float):
    if variable == "P_dB":
        return scenario.with_power(db_to_linear(x))
    if variable == "tau":
        if isinstance(scenario, GeometricScenario):
            rule = (scenario.geom.tau_rule[0],) + (x,) * (len(scenario.geom.tau_rule) - 1)
            return replace(scenario, geom=replace(scenario.geom, tau_rule=rule))
        tau = np.array(scenario.tau)
        off = ~np.eye(scenario.L, dtype=bool)
        tau[off] = x
        return replace(scenario, tau=tau)
    return scenario


def _with_beta(rule, x):
    def r(cfg):
        A = np.array(rule(cfg).alpha)
        A[~np.eye(cfg.L, dtype=bool)] = x
        return WeightMatrix(A)
    return r


def run_plan(plan: ExperimentPlan, threads: int | None = None) -> list:
    """Execute a plan and write its CSV files plus a JSON run record."""
    plan.validate()
    out = Path(plan.output)
    if plan.figure is not None:
        return run_figure(plan.figure, out, plan.trials, plan.master_seed, plan.de_only, threads)
    base = load_scenario(plan.scenario)
    var = plan.sweep["variable"]
    xs = _grid(float(plan.sweep["start"]), float(plan.sweep["stop"]), float(plan.sweep["step"]))
    method = "DE" if plan.de_only else plan.method
    series = {}
    for spec in plan.strategies:
        name, strat, rule = resolve_strategy(spec)
        rows = []
        for x in xs:
            sc = _at(base, var, x)
            if var == "beta":
                rule_x = _with_beta(rule, x)
                strat_x = IaRZF(rule_x, name)
            else:
                rule_x, strat_x = rule, strat
            if method in ("DE", "both") and rule_x is not None:
                cfgs = placement_configs(sc, plan.master_seed, plan.n_placements)
                rows.append(_de_row(x, _mean_de(cfgs, rule_x), plan.master_seed))
            if method in ("MC", "both"):
                rows.append(_mc_row(x, monte_carlo(sc, strat_x, plan.trials, plan.master_seed, threads)))
        series[name.replace(":", "_")] = rows
    paths = write_series(out, "run", series)
    record = {"plan": plan.__dict__, "scenario": scenario_to_dict(base, {"master": plan.master_seed}),
              "rng": "SeedSequence(master_seed, spawn_key=(trial, stream, m, l)) -> PCG64; "
                     "streams: 0 placement, 1 channel, 2 csi"}
    (out / "run_record.json").write_text(json.dumps(record, indent=2, sort_keys=True, default=str))
    return paths + [out / "run_record.json"]


def optimize_plan(src) -> list:
    """Grid-search the weights of a scenario; writes the trace and the optimum.

    Plan keys: ``scenario``, ``grid`` (``free``, ``n``, ``lo``, ``hi``,
    ``rounds``, ``objective``, ``base``), ``P_dB`` (optional), ``master_seed``,
    ``n_placements`` and ``output``.
    """
    d = json.loads(Path(src).read_text()) if not isinstance(src, Mapping) else dict(src)
    try:
        sc = load_scenario(d["scenario"])
        g = dict(d["grid"])
    except KeyError as exc:
        raise PlanError(f"optimize plan is missing {exc}") from exc
    if "P_dB" in d:
        sc = sc.with_power(db_to_linear(float(d["P_dB"])))
    free = [tuple(f) for f in g.pop("free")]
    spec = WeightGridSpec.log_grid(free, n=int(g.pop("n", 20)), lo=float(g.pop("lo", 1e-3)),
                                   hi=float(g.pop("hi", 1e3)), **g)
    seed = int(d.get("master_seed", 0))
    res = grid_search(sc, spec, seed, int(d.get("n_placements", 20)))
    out = Path(d.get("output", "results"))
    rows = res.trace_rows(free)
    paths = write_series(out, "optimize", {"trace": rows}, columns=tuple(rows[0]))
    best = {"alpha": res.weights.alpha.tolist(), "objective": res.objective, "failures": res.failures}
    (out / "optimize_best.json").write_text(json.dumps(best, indent=2))
    return paths + [out / "optimize_best.json"]

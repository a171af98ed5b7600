"""Scenario description, channel draws and imperfect CSI.

A scenario is either a fixed :class:`SystemConfig` (all large-scale gains
known) or a :class:`GeometricScenario` that places users at random around
each base station and derives the gains from distance.

Random numbers are drawn from counter-based substreams of a master seed so
that any matrix of any trial can be regenerated in isolation::

    master_seed -> trial t -> stream (placement | channel | csi) -> (m, l)

The derivation is ``numpy.random.SeedSequence(master_seed,
spawn_key=(t, stream, m, l))`` feeding a PCG64 generator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "ConfigError",
    "NormMode",
    "SystemConfig",
    "GeometrySpec",
    "GeometricScenario",
    "ChannelRealization",
    "CsiEstimate",
    "PLACEMENT_STREAM",
    "CHANNEL_STREAM",
    "CSI_STREAM",
    "trial_seed",
    "substream",
    "build_wyner_config",
    "build_geometric_config",
    "place_users",
    "tau_from_distance",
    "two_bs_geometry",
    "square_geometry",
    "draw_channels",
    "estimate_csi",
    "load_scenario",
    "scenario_to_dict",
]

PLACEMENT_STREAM = 0
CHANNEL_STREAM = 1
CSI_STREAM = 2

Seed = Union[int, np.random.SeedSequence]


class ConfigError(ValueError):
    """Raised for scenario parameters outside their valid domain."""


class NormMode(str, Enum):
    """Precoder power normalization convention.

    ``TRACE_K`` scales each precoder to ``tr(F^H F) = K`` and carries the
    transmit power in the symbol covariance, so received powers are multiplied
    by ``P`` of the transmitting cell. ``PER_USER_POWER`` puts the power into
    the precoder, ``tr(F F^H) / K = P``, with unit-variance symbols.
    """

    TRACE_K = "TRACE_K"
    PER_USER_POWER = "PER_USER_POWER"


# ---------------------------------------------------------------------------
# seeds


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Seed of trial ``trial`` under ``master_seed``."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(trial),))


def substream(seed: Seed, *key: int) -> np.random.Generator:
    """Independent generator for the counter ``key`` below ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _seed_record(seed: Seed) -> dict:
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": int(seed.entropy), "spawn_key": [int(k) for k in seed.spawn_key]}
    return {"entropy": int(seed), "spawn_key": []}


def _complex_normal(rng: np.random.Generator, shape: tuple, var: float) -> np.ndarray:
    # circular symmetric: Re and Im each N(0, var/2)
    z = rng.standard_normal(shape + (2,))
    return np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Complete multi-cell downlink scenario.

    Parameters
    ----------
    N : sequence of int
        Transmit antennas of each base station.
    K : sequence of int
        Single-antenna users of each cell.
    chi : nested sequence
        ``chi[m][l]`` holds the large-scale gains from BS ``m`` to the ``K[l]``
        users of cell ``l``. A scalar is broadcast over the users.
    tau : array_like, shape (L, L)
        CSI error level ``tau[m][l]`` of BS ``m`` towards cell ``l``.
    P : array_like, shape (L,)
        Per-user transmit power of each BS, relative to unit noise.
    xi : array_like, shape (L,)
        Regularization of each BS.
    norm_mode : NormMode
        Power normalization convention.
    """

    N: tuple
    K: tuple
    chi: tuple
    tau: np.ndarray
    P: np.ndarray
    xi: np.ndarray
    norm_mode: NormMode = NormMode.PER_USER_POWER

    def __post_init__(self) -> None:
        N = tuple(int(n) for n in self.N)
        K = tuple(int(k) for k in self.K)
        L = len(N)
        if L == 0 or len(K) != L:
            raise ConfigError("N and K must be nonempty and of equal length")
        if any(k < 1 for k in K) or any(n < 1 for n in N):
            raise ConfigError("antenna and user counts must be positive")
        for l in range(L):
            if K[l] > N[l]:
                raise ConfigError(f"cell {l}: K={K[l]} exceeds N={N[l]}")
        if len(self.chi) != L:
            raise ConfigError("chi must have one row per BS")
        chi = []
        for m in range(L):
            if len(self.chi[m]) != L:
                raise ConfigError("chi must be L x L")
            row = []
            for l in range(L):
                v = np.broadcast_to(np.asarray(self.chi[m][l], dtype=float), (K[l],)).copy()
                if not np.all(np.isfinite(v)) or np.any(v < 0):
                    raise ConfigError("chi must be finite and nonnegative")
                v.flags.writeable = False
                row.append(v)
            chi.append(tuple(row))
        tau = np.broadcast_to(np.asarray(self.tau, dtype=float), (L, L)).copy()
        if np.any(~np.isfinite(tau)) or np.any(tau < 0) or np.any(tau > 1):
            raise ConfigError("tau must lie in [0, 1]")
        P = np.broadcast_to(np.asarray(self.P, dtype=float), (L,)).copy()
        xi = np.broadcast_to(np.asarray(self.xi, dtype=float), (L,)).copy()
        if np.any(~(P > 0)) or np.any(~np.isfinite(P)):
            raise ConfigError("P must be positive and finite")
        if np.any(~(xi > 0)) or np.any(~np.isfinite(xi)):
            raise ConfigError("xi must be positive and finite")
        for a in (tau, P, xi):
            a.flags.writeable = False
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "chi", tuple(chi))
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "norm_mode", NormMode(self.norm_mode))

    @property
    def L(self) -> int:
        return len(self.N)

    @property
    def c(self) -> np.ndarray:
        """Load ratio ``K_l / N_l`` of each cell."""
        return np.asarray(self.K, dtype=float) / np.asarray(self.N, dtype=float)

    @property
    def total_users(self) -> int:
        return int(sum(self.K))

    def eps(self) -> np.ndarray:
        """Average gains ``eps[a, b] = mean_k chi[a][b][k]``."""
        return np.array([[self.chi[a][b].mean() for b in range(self.L)] for a in range(self.L)])

    def with_power(self, P) -> "SystemConfig":
        return replace(self, P=P)


def build_wyner_config(
    N: int,
    K: int,
    eps: float,
    tau_inter: float,
    tau_intra: float,
    P: float,
    xi: float = 1.0,
    norm_mode: NormMode = NormMode.TRACE_K,
) -> SystemConfig:
    """Symmetric two-cell scenario with a single cross gain.

    Own-cell gains are 1 and cross-cell gains ``eps``.

    Examples
    --------
    >>> cfg = build_wyner_config(160, 40, 0.7, 0.5, 0.0, 10.0, 1.0)
    >>> float(cfg.c[0])
    0.25
    """
    if eps < 0:
        raise ConfigError("eps must be nonnegative")
    chi = [[1.0, eps], [eps, 1.0]]
    tau = [[tau_intra, tau_inter], [tau_inter, tau_intra]]
    return SystemConfig((N, N), (K, K), chi, tau, (P, P), (xi, xi), norm_mode)


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class GeometrySpec:
    """Base-station layout and large-scale propagation parameters.

    Parameters
    ----------
    bs_positions : array_like, shape (L, 2) or (L, 3)
        Ground coordinates of the base stations. A third coordinate is an
        extra elevation added to ``bs_height``.
    bs_height, ut_height : float
        Antenna heights above ground.
    cluster_radius : float
        Radius of the disc in which each cell's users are dropped.
    pathloss_exponent : float
        Gain is ``distance ** -pathloss_exponent``.
    tau_rule : sequence of float
        CSI error levels indexed by the rank of the BS-to-BS distance:
        entry 0 for the own cell, entry 1 for the nearest other BS, and so on.
    """

    bs_positions: np.ndarray
    bs_height: float = 0.1
    ut_height: float = 0.0
    cluster_radius: float = 1.0
    pathloss_exponent: float = 2.8
    tau_rule: tuple = (0.0,)

    def __post_init__(self) -> None:
        pos = np.atleast_2d(np.asarray(self.bs_positions, dtype=float))
        if pos.shape[1] == 2:
            pos = np.column_stack([pos, np.zeros(len(pos))])
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ConfigError("bs_positions must be (L, 2) or (L, 3)")
        if not self.cluster_radius > 0:
            raise ConfigError("cluster_radius must be positive")
        if not self.pathloss_exponent > 0:
            raise ConfigError("pathloss_exponent must be positive")
        rule = tuple(float(t) for t in self.tau_rule)
        if any(t < 0 or t > 1 for t in rule):
            raise ConfigError("tau_rule levels must lie in [0, 1]")
        object.__setattr__(self, "bs_positions", pos)
        object.__setattr__(self, "tau_rule", rule)

    @property
    def L(self) -> int:
        return len(self.bs_positions)

    def tau(self) -> np.ndarray:
        return tau_from_distance(self.bs_positions[:, :2], self.tau_rule)


def tau_from_distance(ground: np.ndarray, levels: Sequence[float], decimals: int = 9) -> np.ndarray:
    """Assign CSI error levels by BS-to-BS distance rank.

    Distances that agree to ``decimals`` places share a rank; rank 0 is the
    zero distance of a BS to itself.
    """
    d = np.linalg.norm(ground[:, None, :] - ground[None, :, :], axis=-1)
    d = np.round(d, decimals)
    uniq = np.unique(d)
    if len(uniq) > len(levels):
        raise ConfigError(f"tau_rule has {len(levels)} levels but the layout has {len(uniq)} distances")
    rank = np.searchsorted(uniq, d)
    return np.asarray(levels, dtype=float)[rank]


def two_bs_geometry(tau_own: float, tau_other: float, spacing: float = 1.5, **kw) -> GeometrySpec:
    """Two base stations on a line."""
    return GeometrySpec(np.array([[0.0, 0.0], [spacing, 0.0]]), tau_rule=(tau_own, tau_other), **kw)


def square_geometry(levels=(0.1, 0.3, 0.4), edge: float = 1.0, **kw) -> GeometrySpec:
    """Four base stations on the corners of a square."""
    pos = edge * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return GeometrySpec(pos, tau_rule=tuple(levels), **kw)


def place_users(geom: GeometrySpec, K_per_cell: Sequence[int], placement_seed: Seed) -> list:
    """Drop users uniformly over the disc area around each BS.

    Returns
    -------
    list of ndarray
        Entry ``l`` has shape ``(K_l, 3)`` with ground coordinates and height.
    """
    if len(K_per_cell) != geom.L:
        raise ConfigError("every cell needs a user count")
    out = []
    for l, K in enumerate(K_per_cell):
        rng = substream(placement_seed, PLACEMENT_STREAM, l)
        r = geom.cluster_radius * np.sqrt(rng.random(K))
        phi = 2.0 * np.pi * rng.random(K)
        x = geom.bs_positions[l, 0] + r * np.cos(phi)
        y = geom.bs_positions[l, 1] + r * np.sin(phi)
        out.append(np.column_stack([x, y, np.full(K, geom.ut_height)]))
    return out


def build_geometric_config(
    geom: GeometrySpec,
    K_per_cell: Sequence[int],
    P,
    xi,
    placement_seed: Seed,
    N: Sequence[int],
    norm_mode: NormMode = NormMode.PER_USER_POWER,
) -> SystemConfig:
    """Scenario from a random user drop.

    The gain from BS ``m`` to user ``(l, k)`` is ``d ** -exponent`` with ``d``
    the 3D distance between the BS antenna and the user. Because the BS
    antenna is elevated, ``d`` never vanishes.

    Examples
    --------
    A user right under its BS sees ``0.1 ** -2.8``, about 630.957.
    """
    users = place_users(geom, K_per_cell, placement_seed)
    bs = geom.bs_positions + np.array([0.0, 0.0, geom.bs_height])
    chi = [[np.linalg.norm(users[l] - bs[m], axis=1) ** (-geom.pathloss_exponent)
            for l in range(geom.L)] for m in range(geom.L)]
    return SystemConfig(tuple(N), tuple(K_per_cell), chi, geom.tau(), P, xi, norm_mode)


@dataclass(frozen=True)
class GeometricScenario:
    """Scenario whose users are re-dropped for every placement seed."""

    geom: GeometrySpec
    N: tuple
    K: tuple
    P: Any
    xi: Any = 1.0
    norm_mode: NormMode = NormMode.PER_USER_POWER

    def config(self, placement_seed: Seed) -> SystemConfig:
        return build_geometric_config(self.geom, self.K, self.P, self.xi, placement_seed, self.N, self.norm_mode)

    def with_power(self, P) -> "GeometricScenario":
        return replace(self, P=P)


# ---------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Small-scale channels ``H[m][l]`` of shape ``(N_m, K_l)``, gains not applied."""

    H: tuple
    seed: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class CsiEstimate:
    """Estimated channels ``Hhat[m][l]`` (gains applied) and error draws ``Htilde``."""

    Hhat: tuple
    Htilde: tuple


def draw_channels(cfg: SystemConfig, trial_seed: Seed) -> ChannelRealization:
    """Draw i.i.d. CN(0, 1/N_m) channels for every BS and cell."""
    H = tuple(
        tuple(_complex_normal(substream(trial_seed, CHANNEL_STREAM, m, l), (cfg.N[m], cfg.K[l]), 1.0 / cfg.N[m])
              for l in range(cfg.L))
        for m in range(cfg.L)
    )
    return ChannelRealization(H, _seed_record(trial_seed))


def estimate_csi(cfg: SystemConfig, ch: ChannelRealization, trial_seed: Seed) -> CsiEstimate:
    """Gauss-Markov channel estimates.

    ``hhat = sqrt(chi) * (sqrt(1 - tau^2) h + tau htilde)`` with a fresh
    error draw ``htilde`` distributed like ``h``.
    """
    Hhat, Ht = [], []
    for m in range(cfg.L):
        rh, rt = [], []
        for l in range(cfg.L):
            h = ch.H[m][l]
            t = cfg.tau[m, l]
            ht = _complex_normal(substream(trial_seed, CSI_STREAM, m, l), h.shape, 1.0 / cfg.N[m])
            s = np.sqrt(cfg.chi[m][l])
            if t == 0.0:
                est = h * s
            else:
                est = (np.sqrt(1.0 - t * t) * h + t * ht) * s
            rh.append(est)
            rt.append(ht)
        Hhat.append(tuple(rh))
        Ht.append(tuple(rt))
    return CsiEstimate(tuple(Hhat), tuple(Ht))


# ---------------------------------------------------------------------------
# scenario files


def _per_cell(v, L: int, name: str) -> np.ndarray:
    if isinstance(v, Mapping):
        v = v.get(name, v.get("values"))
    return np.broadcast_to(np.asarray(v, dtype=float), (L,)).copy()


def load_scenario(src: Union[str, Path, Mapping]) -> Union[SystemConfig, GeometricScenario]:
    """Read a scenario from a JSON file or an already parsed mapping.

    Keys: ``cells`` (``N``, ``K`` and, without geometry, ``chi``),
    ``geometry`` (optional, fields of :class:`GeometrySpec`), ``tau``
    (optional with geometry), ``powers`` (``P``), ``xi``, ``norm_mode`` and
    ``seeds``.
    """
    if not isinstance(src, Mapping):
        src = json.loads(Path(src).read_text())
    try:
        cells = src["cells"]
        N = tuple(int(n) for n in cells["N"])
        K = tuple(int(k) for k in cells["K"])
        L = len(N)
        P = _per_cell(src["powers"], L, "P")
        xi = _per_cell(src.get("xi", 1.0), L, "xi")
        mode = NormMode(src.get("norm_mode", NormMode.PER_USER_POWER.value))
        if src.get("geometry") is not None:
            g = dict(src["geometry"])
            if "tau" in src and "tau_rule" not in g:
                raise ConfigError("geometric scenarios take tau from geometry.tau_rule")
            geom = GeometrySpec(**g)
            if geom.L != L:
                raise ConfigError("geometry and cells disagree on L")
            return GeometricScenario(geom, N, K, P, xi, mode)
        return SystemConfig(N, K, cells["chi"], src["tau"], P, xi, mode)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed scenario: {exc!r}") from exc


def scenario_to_dict(sc: Union[SystemConfig, GeometricScenario], seeds: Mapping | None = None) -> dict:
    """Inverse of :func:`load_scenario`."""
    d: dict = {"cells": {"N": list(sc.N), "K": list(sc.K)}}
    if isinstance(sc, GeometricScenario):
        g = sc.geom
        d["geometry"] = {
            "bs_positions": g.bs_positions.tolist(),
            "bs_height": g.bs_height,
            "ut_height": g.ut_height,
            "cluster_radius": g.cluster_radius,
            "pathloss_exponent": g.pathloss_exponent,
            "tau_rule": list(g.tau_rule),
        }
        d["tau"] = g.tau().tolist()
    else:
        d["cells"]["chi"] = [[v.tolist() for v in row] for row in sc.chi]
        d["tau"] = sc.tau.tolist()
    L = len(sc.N)
    d["powers"] = {"P": np.broadcast_to(np.asarray(sc.P, float), (L,)).tolist()}
    d["xi"] = np.broadcast_to(np.asarray(sc.xi, float), (L,)).tolist()
    d["norm_mode"] = NormMode(sc.norm_mode).value
    d["seeds"] = dict(seeds or {})
    return d

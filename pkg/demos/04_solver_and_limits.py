"""
The fixed point behind the deterministic equivalents
====================================================

Each base station has one scalar ``e`` solving a monotone fixed-point
equation. Large weights push the precoder toward its projection limits.
"""

# %%
import numpy as np

from iarzf import WeightMatrix, build_wyner_config
from iarzf.rmt_de import both_inf_sinr, limit_de_alpha_inf, simple_de, solve_e

cfg = build_wyner_config(160, 40, 0.7, 0.5, 0.0, 10.0)
for a in (0.0, 1.0, 1e3, 1e6):
    d = solve_e(cfg, WeightMatrix.two_cell(a, 2.0))
    print(f"alpha={a:8.0e}  e={d.e[0]:.6e}  alpha*e={a * d.e[0]:.4e}  residual={d.residual[0]:.1e}")

# %% [markdown]
# With the own weight unbounded, intra-cell interference disappears; with
# both unbounded, the precoder nulls every estimated channel.

# %%
P, c, eps, tau = 10.0, 0.25, 0.7, 0.5
print("alpha=1e8      ", simple_de(P, c, eps, tau, 1e8, 2.0).sinr)
print("alpha limit    ", limit_de_alpha_inf(P, c, eps, tau, 2.0)[2])
print("both 1e8       ", simple_de(P, c, eps, tau, 1e8, 1e8).sinr)
print("both limit     ", both_inf_sinr(P, c, eps, tau))

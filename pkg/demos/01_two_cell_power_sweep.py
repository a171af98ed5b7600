"""
Two-cell power sweep
====================

Two base stations with 160 antennas each serve 40 users apiece. Every user
also hears the other cell through a gain of 0.7. We compare iaRZF at three
levels of cross-cell CSI quality against per-cell RZF, ZF and MRT.
"""

# %%
import numpy as np

from iarzf import WeightMatrix, de_sinr, monte_carlo
from iarzf.experiments import N_SIMPLE, db_to_linear, fig2, fig2_config
from iarzf.strategies import IaRZF

# %% [markdown]
# The deterministic equivalents are cheap, so the full sweep runs in a second.

# %%
de = fig2(de_only=True, x_db=np.arange(-15, 16, 5.0))
names = list(de)
print("SNR dB " + " ".join(f"{n:>13s}" for n in names))
for i, x in enumerate(np.arange(-15, 16, 5.0)):
    print(f"{x:6.0f} " + " ".join(f"{de[n][i]['mean_rate']:13.3f}" for n in names))

# %% [markdown]
# A short Monte-Carlo run at 10 dB shows how close the large-system
# prediction already is at N = 160.

# %%
rho = db_to_linear(10.0)
for tau in (0.0, 0.5, 1.0):
    cfg = fig2_config(10.0, tau)
    w = WeightMatrix.two_cell(N_SIMPLE * rho, N_SIMPLE * rho)
    mc = monte_carlo(cfg, IaRZF(w), trials=50, master_seed=1)
    print(f"tau={tau:3.1f}  MC {mc.mean_rate:.3f} +- {mc.ci95_halfwidth:.3f}   DE {de_sinr(cfg, w).mean_rate:.3f}")

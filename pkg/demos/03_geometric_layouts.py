"""
Geometric layouts and the heuristic weight table
================================================

Users are dropped uniformly in a disc around each base station and the gains
follow a distance power law. The heuristic table needs only the powers, the
loads, the mean gains and the CSI levels.
"""

# %%
import numpy as np

from iarzf import de_sinr, heuristic_weights
from iarzf.experiments import fig7_scenario
from iarzf.weights import coordinate_search, placement_configs, scaled_power_weights

cfg = placement_configs(fig7_scenario(10.0), seed=0, n_placements=1)[0]
np.set_printoptions(precision=3, suppress=True)
print("mean gains\n", cfg.eps())
print("CSI levels\n", cfg.tau)
print("heuristic weights\n", heuristic_weights(cfg).alpha)

# %% [markdown]
# A coordinate search over all sixteen weights, started at the heuristic,
# measures how much the table leaves on the table for this drop.

# %%
h = de_sinr(cfg, heuristic_weights(cfg)).mean_rate
s = de_sinr(cfg, scaled_power_weights(cfg)).mean_rate
best = coordinate_search(cfg, heuristic_weights(cfg))
print(f"heuristic {h:.3f}  scaled power {s:.3f}  searched {best.objective / cfg.total_users:.3f}")

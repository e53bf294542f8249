# %% [markdown]
# # Quickstart
#
# One CRA-DL run on the full-size synthetic regression problem: 100 devices,
# 1000 data subsets of dimension 100, each device holding 40 subsets.
# A fifth of the devices send their coded gradient multiplied by -2.

# %%
import numpy as np
import matplotlib.pyplot as plt

from cradl import problem, trainer
from cradl.adversary import AttackSpec
from cradl.aggregation import RbaRuleSpec
from cradl.trainer import FixedSchedule, RunConfig

data = problem.generate_dataset(m=1000, D=100, sigma_h=0.0, seed=0)
cfg = RunConfig(method="CRA-DL", N=100, r=40, rule=RbaRuleSpec("median"),
                attack=AttackSpec("signflip", -2.0), alpha=0.2, schedule=FixedSchedule(0.001), T=500, seed=0)
traj = trainer.run(cfg, data)
print(traj.config.label, "final loss", traj.final_loss)

# %% [markdown]
# The least-squares optimum gives the floor no method can beat.

# %%
x_star = problem.optimum(data)
print("F(x*) =", problem.total_loss(x_star, data))

# %%
fig, ax = plt.subplots()
ax.semilogy(traj.losses, label=traj.config.label)
ax.axhline(problem.total_loss(x_star, data), color="k", ls=":", label="optimum")
ax.set_xlabel("iteration")
ax.set_ylabel("F(x)")
ax.legend()
fig.savefig("quickstart.svg")

# %% [markdown]
# Each record also carries the aggregation error ||g_hat - g_bar|| and the
# honest spread, so the robustness inequality can be watched during training.

# %%
agg = traj.column("agg_error")
spread = traj.column("spread")
print("max agg_error / sqrt(spread):", np.nanmax(agg / np.sqrt(spread)))

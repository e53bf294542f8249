# %% [markdown]
# # Baselines under three attacks
#
# All five methods see the same data, the same Byzantine identities and the
# same attack randomness for a given seed.  Set `SEEDS = range(5)` for the
# full reproduction; a single seed keeps this under a minute.

# %%
import matplotlib.pyplot as plt

from cradl import harness

SEEDS = (0,)

# %%
results = {}
for fig in ("fig2a", "fig2b", "fig2c"):
    exp = harness.figure_experiment(fig, seeds=SEEDS)
    res = harness.run_sweep(exp)
    harness.write_sweep(res, f"{fig}.csv")
    results[fig] = harness.mean_curves(res.rows)
    print(fig, "skipped:", [s["reason"] for s in res.skipped])

# %%
for fig, curves in results.items():
    print(fig)
    for key, curve in sorted(curves.items(), key=lambda kv: kv[1][-1]):
        print(f"  {curve[-1]:12.4g}  {key}")

# %%
fig, axes = plt.subplots(1, 3, figsize=(15, 4))
for ax, (name, curves) in zip(axes, results.items()):
    for key, curve in curves.items():
        ax.semilogy(curve, label=key.split()[0])
    ax.set_title(name)
    ax.set_xlabel("iteration")
axes[0].set_ylabel("F(x)")
axes[-1].legend(fontsize=7)
fig.savefig("baselines.svg")

# %% [markdown]
# # How much redundancy helps
#
# CRA-DL with the coordinate-wise median under sign flipping.  First the
# final loss as the per-device load r grows, then the loss as the Byzantine
# fraction grows at r = 0.4M.

# %%
import numpy as np
import matplotlib.pyplot as plt

from cradl import harness

SEEDS = (0, 1)


def final_by(res, field):
    last = {}
    for row in res.rows:
        last[row.run_id] = row
    out = {}
    for row in last.values():
        out.setdefault((getattr(row, field), row.alpha), []).append(row.loss)
    return {k: float(np.mean(v)) for k, v in sorted(out.items())}


# %%
res = harness.run_sweep(harness.figure_experiment("fig3", seeds=SEEDS))
by_r = final_by(res, "r")
for (r, alpha), loss in by_r.items():
    print(f"alpha={alpha:<4} r={r:<5} final loss {loss:.3f}")

# %%
fig, ax = plt.subplots()
for alpha in (0.2, 0.4):
    rs = [r for (r, a) in by_r if a == alpha]
    ax.plot(rs, [by_r[(r, alpha)] for r in rs], "o-", label=f"alpha={alpha}")
ax.set_xlabel("r")
ax.set_ylabel("final F(x)")
ax.legend()
fig.savefig("redundancy_r.svg")

# %%
res = harness.run_sweep(harness.figure_experiment("fig4", seeds=SEEDS))
for (_, alpha), loss in final_by(res, "r").items():
    print(f"alpha={alpha:<5} final loss {loss:.3f}")

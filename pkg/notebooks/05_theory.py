# %% [markdown]
# # Bounds against simulation
#
# Constants are computed for a toy problem (10 devices, 20 subsets) where the
# convergence condition holds, and the fixed-step bound is compared with the
# observed time-averaged squared gradient norm.

# %%
import math
from dataclasses import replace

import numpy as np

from cradl import allocation as al
from cradl import problem, theory, trainer
from cradl.aggregation import RbaRuleSpec
from cradl.trainer import FixedSchedule, RunConfig

data = problem.generate_dataset(20, 5, 0.0, seed=0)
f_star = problem.total_loss(problem.optimum(data), data)
lam = 0.002

# %%
for kind, r in (("trimmed", 16), ("median", 18), ("median", 20)):
    alloc = al.allocate_balanced_random(10, 20, r, seed=0)
    for T in (10, 100, 500):
        cfg = RunConfig(N=10, r=r, rule=RbaRuleSpec(kind), T=T, schedule=FixedSchedule(trainer.lr_fixed(lam, T)))
        runs = [trainer.run(replace(cfg, seed=s), data, allocation=alloc, keep_models=True) for s in range(5)]
        c = theory.constants_for(data, alloc, kind, 0.2, [x for t in runs for x in t.models], f_star=f_star)
        observed = np.mean([np.mean(t.grad_norms ** 2) for t in runs])
        try:
            bound = theory.theorem1_bound(T, lam, c, problem.total_loss(runs[0].models[0], data))
        except ValueError as exc:
            bound = f"n/a ({exc})"
        print(f"{kind:8} r={r:<3} T={T:<4} observed {observed:10.4g}  bound {bound}")

# %% [markdown]
# The asymptotic error shrinks as r grows and vanishes at full replication.

# %%
big = problem.generate_dataset(1000, 100, 0.0, seed=0)
L = theory.estimate_L(big)
beta = theory.estimate_beta(big, np.zeros(100))
from cradl.aggregation import c_alpha_sq

c2 = c_alpha_sq("trimmed", 0.03, 100, 100)
for r in (100, 200, 400, 800, 1000):
    c = theory.make_constants(L, beta, 0.03, 100, 1000, r, 100 * r // 1000, c2)
    print(f"r={r:<5} rho1={c.rho1:.4g} limit={theory.asymptotic_error_fixed(c, approximate=True):.4g}")

# %% [markdown]
# At the full-scale allocation the condition fails for the median.

# %%
A = al.allocate_uniform_random(100, 1000, 40, seed=0)
lhs, rhs = theory.condition_sides(math.sqrt(c_alpha_sq("median", 0.2, 100, 100)), A.d_min, 1000, 100, 40)
print(f"C_alpha = {lhs:.3f}, needs < {rhs:.4f}")

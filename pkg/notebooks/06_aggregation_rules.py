# %% [markdown]
# # Aggregation rules side by side
#
# Eight honest messages around a centre and two Byzantine ones far away.
# Every rule is checked against its robustness constant.

# %%
import numpy as np

from cradl import aggregation as ag
from cradl.aggregation import RbaRuleSpec

rng = np.random.default_rng(0)
honest = rng.normal(loc=1.0, scale=0.5, size=(8, 5))
byz = rng.normal(scale=100.0, size=(2, 5))
messages = np.vstack([honest, byz])

# %%
for kind in ag.KINDS:
    rule = RbaRuleSpec(kind)
    try:
        ag.check_feasible(rule, 10, 0.2)
    except ag.InfeasibleRule as exc:
        print(f"{kind:10} infeasible: {exc}")
        continue
    out = ag.aggregate(rule, messages, 0.2)
    rep = ag.robust_bound_check(rule, honest, byz, 0.2)
    print(f"{kind:10} error {np.linalg.norm(out - honest.mean(axis=0)):9.4g}  "
          f"C^2 = {ag.c_alpha_sq(kind, 0.2, 10, 5):8.4g}  within bound: {rep.satisfied}")

# %% [markdown]
# # Screening out sign-flipped learners
#
# Fifty learners share one linear model. Some of learners 1..49 have their
# responses negated. Learner 50 wants to pool data, but only with honest
# peers. Clustering with K=2 separates "attacked" from "intact".

# %%
import numpy as np

from metacluster.bench import AdversarialConfig, run_adversarial

cfg = AdversarialConfig(attack_counts=(0, 5, 20, 45), reps=3, menu=("lasso",))
report = run_adversarial(cfg)
print(report.summary_table())

# %% [markdown]
# Pooling with everyone gets worse as more learners are attacked. The SEC
# arm keeps only learner 50's cluster and matches the oracle, which pools
# exactly the intact learners. With no attack (k=0) the forced K=2 split
# cuts honest learners apart, so "recovered" is 0 there, but learner 50's
# half still fits nearly as well as the full pool.

# %%
for k in cfg.attack_counts:
    recs = report.select(k=k)
    print(f"k={k:2d}  recovered {sum(r['recovered'] for r in recs)}/{len(recs)}  "
          f"all {report.mean('mse_all', k=k):7.3f}  sec {report.mean('mse_sec', k=k):.3f}  "
          f"oracle {report.mean('mse_oracle', k=k):.3f}  alone {report.mean('mse_alone', k=k):.3f}")

# %% [markdown]
# # Placing a newcomer
#
# A learner arriving after clustering fits its own model, exchanges
# cross-losses with every clustered learner, and joins the cluster with the
# largest summed similarity. Here each learner's intercept is shifted by c*S_i for a hidden
# continuous S_i, so clusters group learners with similar shifts.

# %%
import numpy as np

from metacluster import SyntheticConfig
from metacluster.collaborate import assign_new_learner, group_similarity
from metacluster.dataset import gen_fairness
from metacluster.exchange import Learner
from metacluster.sec import run_sec

cfg = SyntheticConfig("fairness", n_learners=40, n_per_learner=50, dim=4, fairness_c=4.0,
                      n_train_learners=30, seed=11)
data = gen_fairness(cfg)
out = run_sec(data.train, ["forest", "ols"], seed=0, standardize_data=False)
print("K =", out.k)
for lab, ids in sorted(out.result.members().items()):
    print(f"cluster {lab}: {len(ids)} learners, mean S {np.mean([data.sensitive[i] for i in ids]):+.2f}")

# %% [markdown]
# Each test learner uses only its first half to be placed.

# %%
for first in data.test_first[:5]:
    host = Learner(first)
    info = host.publish(["forest", "ols"])
    scores = group_similarity(info, host, out.result, out.infos, out.learners, out.similarity.bandwidth)
    lab = assign_new_learner(info, host, out.result, out.infos, out.learners, out.similarity.bandwidth,
                             scores=scores)
    pretty = {k: round(v, 2) for k, v in scores.items()}
    print(f"learner {first.learner_id} (S={data.sensitive[first.learner_id]:+.2f}) -> cluster {lab}  {pretty}")

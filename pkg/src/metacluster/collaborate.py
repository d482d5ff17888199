"""After clustering: weighted ensemble prediction inside a cluster, and
placement of a newcomer into an existing cluster."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exchange import dissimilarity
from .models import SharedInfo
from .spectral import ClusterResult


@dataclass(frozen=True)
class ClusterEnsemble:
    """Members of one cluster, weighted by sample size ``n_i / sum(n)``."""

    cluster_id: int
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError(f"cluster {self.cluster_id} has no members")
        dims = {m.n_features for m in members}
        if len(dims) != 1:
            raise ValueError(f"cluster {self.cluster_id} mixes feature dimensions {sorted(dims)}")
        object.__setattr__(self, "members", members)

    @property
    def weights(self) -> np.ndarray:
        n = np.array([m.n for m in self.members], dtype=float)
        return n / n.sum()

    @property
    def learner_ids(self) -> list:
        return [m.learner_id for m in self.members]

    @property
    def n_features(self) -> int:
        return self.members[0].n_features


def aggregate_predict(ens: ClusterEnsemble, x, original_scale: bool = True):
    """``sum_i w_i f_i(x)`` over the cluster's members.

    With ``original_scale`` each member maps raw features to raw responses
    through its own recorded scaler; otherwise the predictors are applied to
    ``x`` as given. ``x`` may be one row (returns a float) or a matrix.
    """
    X = np.asarray(x, dtype=float)
    if X.shape[-1] != ens.n_features:
        raise ValueError(
            f"input has dimension {X.shape[-1]} but cluster {ens.cluster_id} "
            f"predictors expect {ens.n_features}"
        )
    total = 0.0
    for w, m in zip(ens.weights, ens.members):
        out = m.predict_original(X) if original_scale else m.predictor.predict(X)
        total = total + w * np.asarray(out, dtype=float)
    return float(total) if X.ndim == 1 else total


def ensembles_from_result(result: ClusterResult, infos: Sequence[SharedInfo]) -> dict:
    """Cluster label -> :class:`ClusterEnsemble` built from the published infos."""
    by_id = {info.learner_id: info for info in infos}
    return {
        label: ClusterEnsemble(label, tuple(by_id[lid] for lid in ids))
        for label, ids in sorted(result.members().items())
    }


def group_similarity(
    info_new: SharedInfo,
    host_new,
    result: ClusterResult,
    infos: Sequence[SharedInfo],
    hosts: Sequence,
    a: float,
) -> dict:
    """Summed similarity ``sum_j exp(-a v(new, j))`` of the newcomer to each cluster."""
    if not a > 0:
        raise ValueError(f"bandwidth must be positive, got {a}")
    ids = list(result.learner_ids or range(1, len(result.labels) + 1))
    by_id = {info.learner_id: (info, host) for info, host in zip(infos, hosts)}
    missing = [lid for lid in ids if lid not in by_id]
    if missing:
        raise ValueError(f"no shared info for clustered learners {missing}")
    scores = {int(lab): 0.0 for lab in np.unique(result.labels)}
    for lid, lab in zip(ids, result.labels):
        info, host = by_id[lid]
        v = dissimilarity(info_new, info, host_new, host)
        scores[int(lab)] += math.exp(-a * v)
    return scores


def assign_new_learner(
    info_new: SharedInfo,
    host_new,
    result: ClusterResult,
    infos: Sequence[SharedInfo],
    hosts: Sequence,
    a: float,
    scores: Optional[dict] = None,
) -> int:
    """Cluster whose members have the largest summed similarity to the newcomer.

    The sum (not the mean) favours larger clusters. Ties go to the lowest
    cluster label.
    """
    if scores is None:
        scores = group_similarity(info_new, host_new, result, infos, hosts, a)
    best = max(scores.values())
    return min(lab for lab, s in scores.items() if s == best)

"""End-to-end Select-Exchange-Cluster on a list of learners."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ._seeding import derive_seed
from .dataset import SubDataset, check_same_dimension, standardize
from .exchange import DissimilarityMatrix, Learner, SimilarityMatrix, build_similarity
from .models import SharedInfo, parse_menu
from .spectral import ClusterResult, sec_cluster


@dataclass
class SECOutcome:
    learners: list  # Learner handles, one per input sub-dataset
    infos: list  # SharedInfo per learner
    similarity: SimilarityMatrix
    dissimilarity: DissimilarityMatrix
    result: ClusterResult

    @property
    def labels(self):
        return self.result.labels

    @property
    def k(self) -> int:
        return self.result.k

    def cluster_of(self, learner_id) -> list:
        """Learner ids sharing ``learner_id``'s cluster (including itself)."""
        lab = self.result.label_of(learner_id)
        return [lid for lid, l in zip(self.result.learner_ids, self.result.labels) if l == lab]


def publish_all(learners: Sequence[Learner], menu, seed=0) -> list[SharedInfo]:
    menu = parse_menu(menu)
    return [h.publish(menu, derive_seed(seed, "select", h.learner_id)) for h in learners]


def run_sec(
    data: Sequence[SubDataset],
    menu,
    seed=0,
    K: Optional[int] = None,
    selection: str = "gap",
    k_grid: Optional[Sequence[int]] = None,
    lam: Optional[float] = None,
    bandwidth: Optional[float] = None,
    standardize_data: bool = True,
    n_jobs: int = 1,
    gap_rule: Optional[str] = None,
) -> SECOutcome:
    """Run all three steps.

    Each learner standardizes its own rows (unless ``standardize_data`` is
    false), picks a method from ``menu`` by half-half CV and publishes it;
    learners then cross-evaluate each other's predictors and the resulting
    similarity matrix is spectrally clustered.
    """
    check_same_dimension(data)
    if standardize_data:
        data = [standardize(d) for d in data]
    hosts = [Learner(d) for d in data]
    infos = publish_all(hosts, menu, seed)
    S, V = build_similarity(infos, hosts, a=bandwidth, n_jobs=n_jobs)
    kwargs = {} if gap_rule is None else {"gap_rule": gap_rule}
    result = sec_cluster(S, K=K, method=selection, k_grid=k_grid, lam=lam,
                         seed=derive_seed(seed, "cluster"), **kwargs)
    return SECOutcome(hosts, infos, S, V, result)

"""Meta-clustering of distributed learners by their regression function.

Each learner selects a model on its own data, learners exchange fitted
predictors and score them on each other's data, and the resulting
similarity matrix is spectrally clustered (Select-Exchange-Cluster).
"""

from .bench import (
    AdversarialConfig,
    ExperimentReport,
    FairnessConfig,
    Sim1Config,
    Sim2Config,
    clustering_accuracy,
    run_adversarial,
    run_fairness,
    run_sim1,
    run_sim2,
)
from .collaborate import ClusterEnsemble, aggregate_predict, assign_new_learner, ensembles_from_result
from .dataset import (
    StandardizationParams,
    SubDataset,
    SyntheticConfig,
    generate,
    read_learners_csv,
    split_half,
    standardize,
    write_learners_csv,
)
from .exchange import Learner, build_similarity, cross_loss, dissimilarity
from .models import MethodSpec, SharedInfo, fit, parse_menu, select_method
from .sec import SECOutcome, run_sec
from .spectral import ClusterResult, embed, kmeans, normalized_laplacian, sec_cluster, select_k, sym_eig

__version__ = "0.1.0"

__all__ = [
    "AdversarialConfig", "ClusterEnsemble", "ClusterResult", "ExperimentReport", "FairnessConfig",
    "Learner", "MethodSpec", "SECOutcome", "SharedInfo", "Sim1Config", "Sim2Config",
    "StandardizationParams", "SubDataset", "SyntheticConfig", "aggregate_predict",
    "assign_new_learner", "build_similarity", "clustering_accuracy", "cross_loss", "dissimilarity",
    "embed", "ensembles_from_result", "fit", "generate", "kmeans", "normalized_laplacian",
    "parse_menu", "read_learners_csv", "run_adversarial", "run_fairness", "run_sec", "run_sim1",
    "run_sim2", "sec_cluster", "select_k", "select_method", "split_half", "standardize",
    "sym_eig", "write_learners_csv",
]

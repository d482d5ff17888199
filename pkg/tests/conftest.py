import numpy as np
import pytest

from metacluster.dataset import SubDataset


def block_similarity(sizes, across=1e-6, within=1.0):
    """Block-constant similarity matrix and the matching 1-based labels."""
    L = sum(sizes)
    S = np.full((L, L), across)
    labels = np.empty(L, dtype=int)
    start = 0
    for k, m in enumerate(sizes, start=1):
        S[start:start + m, start:start + m] = within
        labels[start:start + m] = k
        start += m
    np.fill_diagonal(S, 1.0)
    return S, labels


def linear_learner(learner_id, beta, n=40, sigma=0.0, seed=0, intercept=0.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, len(beta)))
    y = X @ np.asarray(beta, float) + intercept + sigma * rng.standard_normal(n)
    return SubDataset(learner_id, X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metacluster.bench import clustering_accuracy
from metacluster.spectral import (
    ClusterResult,
    embed,
    gap_choice,
    gap_statistic,
    kmeans,
    normalized_laplacian,
    numerical_rank,
    penalized_objective,
    sec_cluster,
    select_k,
    sym_eig,
    within_dispersion,
)

from conftest import block_similarity


def _random_similarity(rng, L):
    A = rng.random((L, L))
    S = (A + A.T) / 2
    np.fill_diagonal(S, 1.0)
    return S


def brute_force_bipartition(X):
    """Best 2-partition objective over all 2^(L-1) - 1 splits."""
    L = len(X)
    best = np.inf
    for mask in range(1, 2 ** (L - 1)):
        labels = np.array([(mask >> i) & 1 for i in range(L)])
        best = min(best, within_dispersion(X, labels))
    return best


# ---------------------------------------------------------------- sym_eig


def test_sym_eig_trivial_cases():
    e = sym_eig(np.eye(4))
    assert np.all(e.values == 1.0)
    e = sym_eig(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(e.values, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(e.vectors), [[0, 1], [1, 0]])


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ValueError, match="max asymmetry 1"):
        sym_eig(np.array([[1.0, 2.0], [1.0, 1.0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_sym_eig_matches_eigh_and_is_orthonormal(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    M = (A + A.T) / 2
    e = sym_eig(M)
    np.testing.assert_allclose(e.values, np.linalg.eigvalsh(M)[::-1], atol=1e-10)
    np.testing.assert_allclose(e.vectors.T @ e.vectors, np.eye(n), atol=1e-8)
    for k in range(n):
        assert np.linalg.norm(M @ e.vectors[:, k] - e.values[k] * e.vectors[:, k]) <= 1e-8
        v = e.vectors[:, k]
        assert v[np.argmax(np.abs(v))] > 0


# ---------------------------------------------------------------- Laplacian


def test_laplacian_examples():
    np.testing.assert_array_equal(normalized_laplacian(np.eye(3)), np.eye(3))
    L2 = normalized_laplacian(np.ones((2, 2)))
    np.testing.assert_allclose(L2, 0.5 * np.ones((2, 2)))
    np.testing.assert_allclose(sym_eig(L2).values, [1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("sizes", [(2, 3), (3, 3, 4), (1, 2, 2, 5)])
def test_block_diagonal_eigenvalue_one_multiplicity(sizes):
    S, _ = block_similarity(sizes, across=0.0)
    vals = sym_eig(normalized_laplacian(S)).values
    assert np.sum(np.abs(vals - 1.0) <= 1e-10) == len(sizes)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 15))
def test_laplacian_spectrum_bounds(seed, L):
    S = _random_similarity(np.random.default_rng(seed), L)
    M = normalized_laplacian(S)
    e = sym_eig(M)
    assert e.values[0] == pytest.approx(1.0, abs=1e-8)
    assert np.all(e.values <= 1 + 1e-8) and np.all(e.values >= -1 - 1e-8)
    d = np.sqrt(S.sum(axis=1))
    np.testing.assert_allclose(M @ d, d, atol=1e-10)


def test_laplacian_rejects_nonpositive_rows():
    with pytest.raises(ValueError, match="non-positive"):
        normalized_laplacian(np.array([[0.0, 0.0], [0.0, 1.0]]))


# ---------------------------------------------------------------- embed


def test_embed_rows_unit_norm():
    S = _random_similarity(np.random.default_rng(0), 9)
    U = embed(S, 3)
    np.testing.assert_allclose(np.linalg.norm(U, axis=1), 1.0, atol=1e-12)


def test_embed_two_blocks_two_positions():
    S, labels = block_similarity((4, 6), across=0.0)
    U = np.round(embed(S, 2), 10)
    assert len({tuple(r) for r in U}) == 2
    assert len({tuple(r) for r in U[labels == 1]}) == 1


def test_embed_k1_all_rows_equal():
    S = _random_similarity(np.random.default_rng(1), 7)
    U = embed(S, 1)
    np.testing.assert_allclose(U, np.ones((7, 1)), atol=1e-12)


def test_embed_k_out_of_range():
    with pytest.raises(ValueError, match="K must be"):
        embed(np.eye(3), 4)
    with pytest.raises(ValueError, match="K must be"):
        embed(np.eye(3), 0)


# ---------------------------------------------------------------- kmeans


def test_kmeans_examples():
    res = kmeans(np.array([0.0, 0.0, 10.0, 10.0]), 2)
    assert res.labels.tolist() == [0, 0, 1, 1] and res.objective == 0.0
    X = np.random.default_rng(0).standard_normal((6, 2))
    res = kmeans(X, 6)
    assert res.objective == 0.0 and sorted(res.labels.tolist()) == list(range(6))


def test_kmeans_duplicate_rows_never_crash():
    X = np.array([[1.0, 1.0]] * 5 + [[2.0, 2.0]])
    res = kmeans(X, 4)
    assert len(np.unique(res.labels)) == 4


def test_kmeans_lloyd_objective_nonincreasing():
    X = np.random.default_rng(3).standard_normal((40, 3))
    res = kmeans(X, 4, n_init=10)
    for hist in res.history:
        assert np.all(np.diff(hist) <= 1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_kmeans_two_clusters_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(3, 9))
    X = rng.standard_normal((L, int(rng.integers(1, 4))))
    assert kmeans(X, 2, seed=seed).objective == pytest.approx(brute_force_bipartition(X), abs=1e-9)


def test_kmeans_matches_sklearn_objective():
    from sklearn.cluster import KMeans

    X = np.vstack([np.random.default_rng(5).normal(c, 0.3, (15, 2)) for c in (0, 3, 6)])
    ours = kmeans(X, 3, seed=0).objective
    sk = KMeans(3, n_init=20, random_state=0).fit(X).inertia_
    assert ours == pytest.approx(sk, rel=1e-9)


# ---------------------------------------------------------------- penalized objective


def test_penalized_objective_examples():
    U = np.random.default_rng(0).standard_normal((4, 2))
    assert penalized_objective(U, [0, 1, 2, 3], lam=0.0) == 0.0
    assert penalized_objective(np.array([[1.0, 2.0], [1.0, 2.0]]), [0, 0]) == 0.0
    with pytest.raises(ValueError, match="expected 3"):
        penalized_objective(U, [0, 0, 1, 1], K=3)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_penalized_objective_pairwise_equals_centroid(seed, K):
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((6 + K, 3))
    labels = np.r_[np.arange(K), rng.integers(0, K, 6)]
    lam = float(rng.random())
    assert penalized_objective(U, labels, lam=lam) == pytest.approx(within_dispersion(U, labels) + K * lam,
                                                                   abs=1e-10)


# ---------------------------------------------------------------- selecting K


@pytest.mark.parametrize("method", ["gap", "penalty"])
@pytest.mark.parametrize("sizes", [(5, 7, 8), (2, 3, 4), (3, 4, 5)])
def test_select_k_ideal_three_blocks(method, sizes):
    S, _ = block_similarity(sizes)
    assert select_k(S, range(1, 7), method=method).k_hat == 3


@pytest.mark.parametrize("sizes", [(5, 5, 5), (6, 6, 8), (2, 2, 4)])
def test_gap_ideal_symmetric_blocks(sizes):
    # Equal blocks give repeated eigenvalues; those truncations are skipped.
    S, _ = block_similarity(sizes)
    assert select_k(S, range(1, 7)).k_hat == 3


@pytest.mark.parametrize("method", ["gap", "penalty"])
def test_select_k_single_block_is_one(method):
    curve = select_k(np.ones((10, 10)), method=method)
    assert curve.k_hat == 1


def test_select_k_grid_validation():
    with pytest.raises(ValueError, match="k_grid"):
        select_k(np.eye(4), [0, 1])
    with pytest.raises(ValueError, match="k_grid"):
        select_k(np.eye(4), [5])
    with pytest.raises(ValueError, match="unknown selection"):
        select_k(np.eye(4), method="elbow")


def test_numerical_rank():
    S, _ = block_similarity((3, 4), across=0.0)
    assert numerical_rank(sym_eig(normalized_laplacian(S))) == 2
    assert numerical_rank(sym_eig(normalized_laplacian(np.ones((5, 5))))) == 1


def test_gap_statistic_prefers_true_k_on_separated_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(c, 0.05, (10, 2)) for c in ([0, 0], [1, 0], [0, 1])])
    gap, se, W = gap_statistic(X, [1, 2, 3, 4], seed=1)
    assert gap_choice([1, 2, 3, 4], gap, se) == 3
    assert np.all(se >= 0) and np.all(np.diff(W) <= 0)


def test_gap_choice_rules():
    ks = [1, 2, 3, 4]
    gap = np.array([0.0, 1.0, 0.9, 2.0])
    se = np.full(4, 0.2)
    assert gap_choice(ks, gap, se, "tibshirani") == 2
    assert gap_choice(ks, gap, se, "first-se-max") == 2
    assert gap_choice(ks, gap, se, "global-se-max") == 4
    with pytest.raises(ValueError, match="unknown gap rule"):
        gap_choice(ks, gap, se, "nope")


# ---------------------------------------------------------------- sec_cluster


def test_sec_cluster_identity_singletons():
    res = sec_cluster(np.eye(4), K=4)
    assert sorted(res.labels.tolist()) == [0, 1, 2, 3]


def test_sec_cluster_ideal_two_blocks():
    S, truth = block_similarity((6, 9))
    res = sec_cluster(S, K=2)
    assert clustering_accuracy(res.labels, truth).exact
    assert len(np.unique(res.labels)) == res.k == 2
    assert res.embedding.shape == (15, 2)


def test_given_and_selected_k_agree():
    S, _ = block_similarity((5, 7, 8))
    a = sec_cluster(S, seed=3)
    b = sec_cluster(S, K=a.k, seed=3)
    assert np.array_equal(a.labels, b.labels)


def test_label_permutation_invariance():
    rng = np.random.default_rng(4)
    S, truth = block_similarity((5, 6, 7), across=0.05)
    noise = rng.uniform(0, 0.05, S.shape)
    S = np.clip(S - (noise + noise.T) / 2, 1e-6, 1)
    np.fill_diagonal(S, 1)
    base = sec_cluster(S, K=3, seed=1)
    for _ in range(5):
        perm = rng.permutation(len(S))
        res = sec_cluster(S[np.ix_(perm, perm)], K=3, seed=1)
        # Same partition up to relabelling.
        assert clustering_accuracy(res.labels, base.labels[perm]).exact


def test_cluster_result_round_trip():
    S, _ = block_similarity((3, 4))
    res = sec_cluster(S, seed=0)
    back = ClusterResult.from_dict(res.to_dict())
    assert back.k == res.k and np.array_equal(back.labels, res.labels)
    assert back.selection.k_hat == res.selection.k_hat
    assert back.members() == res.members()

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metacluster.dataset import SubDataset, SyntheticConfig, gen_two_cluster_linear, standardize
from metacluster.exchange import (
    DissimilarityMatrix,
    Learner,
    build_similarity,
    cross_loss,
    dissimilarity,
    dissimilarity_from_losses,
    select_bandwidth,
    similarity_from_dissimilarity,
    write_matrix_csv,
)
from metacluster.models import MethodSpec, SharedInfo, fit, mse, parse_menu, select_method

from conftest import linear_learner


def _info(d, menu="ols", seed=0):
    return select_method(parse_menu(menu), d, seed)


def _dis(V):
    V = np.asarray(V, float)
    return DissimilarityMatrix(V, tuple(range(1, len(V) + 1)))


def test_cross_loss_self_is_fitted_mse():
    d = linear_learner(1, [1.0, -1.0], sigma=0.5)
    info = _info(d, "lasso,forest")
    assert cross_loss(info, d) == info.fitted_mse
    assert cross_loss(info, Learner(d)) == info.fitted_mse


def test_cross_loss_zero_for_shared_noiseless_function():
    a = linear_learner(1, [2.0, 1.0], seed=1)
    b = linear_learner(2, [2.0, 1.0], seed=2)
    assert cross_loss(_info(a), b) == pytest.approx(0.0, abs=1e-20)


def test_cross_loss_equals_models_mse():
    a = linear_learner(1, [2.0, 1.0], sigma=1, seed=1)
    b = linear_learner(2, [0.0, 1.0], sigma=1, seed=2)
    info = _info(a, "knn")
    assert cross_loss(info, b) == mse(info.predictor, b)


def test_cross_loss_dimension_mismatch_names_learners():
    a = linear_learner(1, [1.0, 2.0])
    b = linear_learner(2, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="learner 1.*learner 2"):
        cross_loss(_info(a), b)
    with pytest.raises(ValueError, match="learner 1.*learner 2"):
        cross_loss(_info(a), Learner(b))


def test_dissimilarity_hand_arithmetic():
    assert dissimilarity_from_losses(0.5, 0.2, 0.4, 0.1) == pytest.approx(0.6)


def test_dissimilarity_identical_data_is_zero_and_symmetric():
    a = linear_learner(1, [1.0, 1.0], sigma=1.0, seed=3)
    b = SubDataset(2, a.features, a.responses)
    ia, ib = _info(a, "ols,forest"), _info(b, "ols,forest")
    assert dissimilarity(ia, ib, a, b) == 0.0
    c = linear_learner(3, [-1.0, 2.0], sigma=1.0, seed=4)
    ic = _info(c, "ols,forest")
    assert dissimilarity(ia, ic, a, c) == dissimilarity(ic, ia, c, a) > 0


def test_similarity_from_zero_dissimilarity_is_all_ones():
    S = similarity_from_dissimilarity(_dis(np.zeros((4, 4))), select_bandwidth(_dis(np.zeros((4, 4)))))
    assert np.all(S.values == 1.0) and S.bandwidth == 1.0


def test_similarity_half_at_ln2_over_a():
    a = 0.8
    V = np.full((3, 3), math.log(2) / a)
    np.fill_diagonal(V, 0)
    S = similarity_from_dissimilarity(_dis(V), a)
    np.testing.assert_allclose(S.values[0, 1], 0.5, rtol=1e-15)


def test_bandwidth_median_rule_and_scale_invariance():
    V = np.full((5, 5), 3.0)
    np.fill_diagonal(V, 0)
    a = select_bandwidth(_dis(V))
    assert a == pytest.approx(math.log(2) / 3)
    rng = np.random.default_rng(0)
    W = rng.random((6, 6))
    W = W + W.T
    np.fill_diagonal(W, 0)
    s1 = similarity_from_dissimilarity(_dis(W), select_bandwidth(_dis(W)))
    s10 = similarity_from_dissimilarity(_dis(10 * W), select_bandwidth(_dis(10 * W)))
    assert select_bandwidth(_dis(10 * W)) == pytest.approx(select_bandwidth(_dis(W)) / 10)
    np.testing.assert_allclose(s10.values, s1.values, rtol=1e-12)
    assert np.median(s1.values[np.triu_indices(6, 1)]) == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 9), st.floats(0.01, 10))
def test_similarity_invariants(seed, L, a):
    rng = np.random.default_rng(seed)
    W = rng.exponential(size=(L, L))
    W = W + W.T
    np.fill_diagonal(W, 0)
    S = similarity_from_dissimilarity(_dis(W), a).values
    assert np.array_equal(S, S.T)
    assert np.all(np.diag(S) == 1.0)
    assert np.all((S > 0) & (S <= 1))
    iu = np.triu_indices(L, 1)
    v, s = W[iu], S[iu]
    order = np.argsort(v)
    # Strictly larger dissimilarity gives strictly smaller similarity unless exp underflows.
    for x, y in zip(order[:-1], order[1:]):
        if v[y] > v[x] and s[x] > np.finfo(float).tiny:
            assert s[y] < s[x]


def test_matrix_validation():
    with pytest.raises(ValueError, match="symmetric"):
        _dis([[0, 1], [2, 0]])
    with pytest.raises(ValueError, match="zero diagonal"):
        _dis([[1, 1], [1, 0]])


def test_build_similarity_needs_two_learners():
    d = linear_learner(1, [1.0])
    with pytest.raises(ValueError, match="at least two"):
        build_similarity([_info(d)], [d])


@pytest.mark.parametrize("standardized", [False, True])
def test_three_block_noiseless_design(standardized):
    betas = [[3.0, 0.0], [0.0, 3.0], [-2.0, -2.0]]
    data = [linear_learner(i + 1, betas[i // 4], n=40, seed=i) for i in range(12)]
    if standardized:
        data = [standardize(d) for d in data]
    hosts = [Learner(d) for d in data]
    infos = [h.publish(parse_menu("ols"), seed=h.learner_id) for h in hosts]
    S, V = build_similarity(infos, hosts)
    blocks = np.repeat([0, 1, 2], 4)
    same = blocks[:, None] == blocks[None, :]
    within, across = S.values[same], S.values[~same]
    # Two thirds of the pairs are across blocks, so the median rule puts a
    # typical across pair near 0.5; what holds is a clean separation.
    assert within.min() > across.max()
    assert S.bandwidth * np.median(V.off_diagonal()) == pytest.approx(math.log(2))
    if standardized:
        # Per-learner response scaling leaves small within-block losses.
        assert within.min() >= 0.95
    else:
        assert within.min() == 1.0


def test_parallel_and_serial_identical():
    learners, _ = gen_two_cluster_linear(SyntheticConfig(n_learners=8, n_per_learner=30, dim=3, seed=2))
    infos = [_info(standardize(d), "lasso,forest", seed=d.learner_id) for d in learners]
    data = [standardize(d) for d in learners]
    S1, V1 = build_similarity(infos, data)
    S4, V4 = build_similarity(infos, data, n_jobs=4)
    assert np.array_equal(S1.values, S4.values)
    assert np.array_equal(V1.values, V4.values)
    assert np.array_equal(V1.cross_losses, V4.cross_losses)


def test_pair_failure_names_pair():
    a, b = linear_learner(1, [1.0, 2.0]), linear_learner(2, [1.0, 2.0, 3.0])
    ia = _info(a)
    ib = SharedInfo(2, MethodSpec("ols"), fit(MethodSpec("ols"), b), 0.0, b.n)
    with pytest.raises(RuntimeError, match="learners 1 and 2"):
        build_similarity([ia, ib], [a, b])


class _CountingData(SubDataset):
    pass


def test_privacy_audit_counts_data_accesses():
    """Each learner's rows are touched once to publish and once per foreign
    predictor; no code path hands rows to another learner."""
    learners, _ = gen_two_cluster_linear(SyntheticConfig(n_learners=6, n_per_learner=20, dim=2, seed=0))
    hosts = [Learner(standardize(d)) for d in learners]
    infos = [h.publish(parse_menu("lasso,forest"), seed=h.learner_id) for h in hosts]
    assert all(h.evaluations == 1 for h in hosts)
    build_similarity(infos, hosts)
    L = len(hosts)
    assert [h.evaluations for h in hosts] == [1 + (L - 1)] * L
    # The only public surface of a Learner is id, sizes, publish and evaluate.
    public = {n for n in dir(hosts[0]) if not n.startswith("_")}
    assert public == {"learner_id", "n", "n_features", "evaluations", "publish", "evaluate"}
    # What crosses the boundary is a SharedInfo whose predictor exposes no training rows
    # for parametric and tree methods.
    lin = [i for i in infos if i.method.method == "lasso"]
    for info in lin:
        assert not any(isinstance(v, np.ndarray) and v.ndim == 2 for v in vars(info.predictor).values())


def test_write_matrix_csv(tmp_path):
    V = _dis([[0, 1.5], [1.5, 0]])
    p = tmp_path / "v.csv"
    write_matrix_csv(V, (7, 9), p)
    lines = p.read_text().splitlines()
    assert lines[0] == "learner_id,7,9"
    assert lines[2] == "9,1.5,0.0"

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from metacluster.dataset import (
    CSVFormatError,
    SubDataset,
    SyntheticConfig,
    attack_flip,
    benchmark_test_set,
    friedman_f1,
    friedman_f2,
    gen_adversarial,
    gen_benchmark_pair,
    gen_fairness,
    gen_two_cluster_linear,
    generate,
    read_learners_csv,
    split_half,
    standardize,
    write_learners_csv,
)
from metacluster.models import ols_coefficients


# ---------------------------------------------------------------- SubDataset


def test_subdataset_rejects_bad_shapes_and_values():
    with pytest.raises(ValueError, match="learner 3"):
        SubDataset(3, np.ones((4, 2)), np.ones(3))
    with pytest.raises(ValueError, match="at least 2 rows"):
        SubDataset(1, np.ones((1, 2)), np.ones(1))
    with pytest.raises(ValueError, match="learner 7: non-finite"):
        SubDataset(7, np.array([[1.0], [np.nan]]), np.ones(2))


def test_subdataset_arrays_are_frozen_copies():
    X = np.ones((3, 2))
    d = SubDataset(1, X, np.zeros(3))
    X[0, 0] = 5
    assert d.features[0, 0] == 1
    with pytest.raises(ValueError):
        d.features[0, 0] = 2


# ---------------------------------------------------------------- standardize


def test_standardize_two_points():
    d = standardize(SubDataset(1, np.array([[1.0], [3.0]]), np.array([0.0, 2.0])))
    s = np.std([1.0, 3.0], ddof=1)
    np.testing.assert_allclose(d.features[:, 0], [-1 / s, 1 / s])
    assert d.features[:, 0].mean() == 0.0


def test_standardize_constant_column_is_zero_and_flagged():
    X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
    d = standardize(SubDataset(1, X, np.array([1.0, 2.0, 3.0])))
    assert np.all(d.features[:, 0] == 0.0)
    assert d.scaler.x_zero_var.tolist() == [True, False]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 20), st.integers(1, 4)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)),
       st.integers(0, 2**31))
def test_standardize_moments_and_idempotence(X, seed):
    y = np.random.default_rng(seed).standard_normal(X.shape[0])
    d = standardize(SubDataset(1, X, y))
    # Columns with a tiny spread relative to their magnitude lose precision; skip them.
    ok = np.ptp(X, axis=0) > 1e-6 * np.maximum(np.abs(X).max(axis=0), 1.0)
    assert np.all(np.abs(d.features[:, ok].mean(axis=0)) <= 1e-10)
    assert np.all(np.abs(d.features[:, ok].std(axis=0, ddof=1) - 1) <= 1e-10)
    twice = standardize(d)
    np.testing.assert_allclose(twice.features[:, ok], d.features[:, ok], atol=1e-12)
    # The recorded scaler maps the raw data to the twice-standardized data.
    np.testing.assert_allclose(twice.scaler.transform_x(X)[:, ok], twice.features[:, ok], atol=1e-9)


def test_standardize_scaler_round_trips_response():
    rng = np.random.default_rng(0)
    d0 = SubDataset(1, rng.normal(3, 2, (30, 3)), rng.normal(10, 5, 30))
    d = standardize(d0)
    np.testing.assert_allclose(d.scaler.inverse_y(d.responses), d0.responses, atol=1e-12)


# ---------------------------------------------------------------- split_half


@pytest.mark.parametrize("n,sizes", [(50, (25, 25)), (5, (3, 2)), (4, (2, 2))])
def test_split_half_sizes(n, sizes):
    d = SubDataset(1, np.arange(n, dtype=float)[:, None], np.arange(n, dtype=float))
    a, b = split_half(d, 0)
    assert (a.n, b.n) == sizes
    assert sorted(np.concatenate([a.responses, b.responses]).tolist()) == list(range(n))


def test_split_half_deterministic_and_rejects_small():
    d = SubDataset(1, np.arange(10.0)[:, None], np.arange(10.0))
    assert np.array_equal(split_half(d, 7)[0].responses, split_half(d, 7)[0].responses)
    with pytest.raises(ValueError, match="learner 9"):
        split_half(SubDataset(9, np.ones((3, 1)), np.ones(3)), 0)


# ---------------------------------------------------------------- generators


def test_two_cluster_linear_shape_and_labels():
    learners, labels = gen_two_cluster_linear(SyntheticConfig(n_learners=20, n_per_learner=50, dim=5, seed=1))
    assert len(learners) == 20
    assert labels.tolist() == [1] * 10 + [2] * 10
    assert all(d.n == 50 and d.p == 5 for d in learners)


def test_two_cluster_linear_noiseless_recovers_beta():
    cfg = SyntheticConfig(n_learners=6, n_per_learner=20, dim=3, noise_var=0.0, seed=4)
    learners, labels = gen_two_cluster_linear(cfg)
    coefs = [ols_coefficients(d.features, d.responses)[0] for d in learners]
    for c, d in zip(coefs, learners):
        np.testing.assert_allclose(d.features @ c, d.responses, atol=1e-8)
    np.testing.assert_allclose(coefs[0], coefs[2], atol=1e-8)
    np.testing.assert_allclose(coefs[3], coefs[5], atol=1e-8)
    assert np.linalg.norm(coefs[0] - coefs[3]) > 1e-3


def test_two_cluster_linear_snr_convention():
    # sigma^2 = p^2 / SNR; Var(beta'X) / sigma^2 should match ||beta||^2 / sigma^2.
    cfg = SyntheticConfig(n_learners=2, n_per_learner=100_000, dim=4, snr=8.0, seed=2)
    learners, _ = gen_two_cluster_linear(cfg)
    assert cfg.sigma2 == pytest.approx(16 / 8)
    d = learners[0]
    coef, b0 = ols_coefficients(d.features, d.responses)
    signal = np.var(d.features @ coef)
    noise = np.var(d.responses - d.features @ coef - b0)
    assert noise == pytest.approx(cfg.sigma2, rel=0.1)
    assert signal / noise == pytest.approx(float(coef @ coef) / cfg.sigma2, rel=0.1)


def test_invalid_snr_rejected():
    with pytest.raises(ValueError, match="SNR"):
        SyntheticConfig(snr=0.0)


def test_friedman_functions_at_vanishing_interaction():
    # X2 X3 = 1 / (X2 X4) when X3 = 1 / (X2^2 X4).
    x2 = 40 * np.pi
    x = np.array([[1.0, x2, 1 / x2**2, 1.0]])
    assert friedman_f1(x)[0] == pytest.approx(1.0, abs=1e-12)
    assert friedman_f2(x)[0] == pytest.approx(0.0, abs=1e-12)


def test_benchmark_pair_defaults_and_desk_scale():
    cfg = SyntheticConfig("benchmark-pair")
    assert (cfg.n_learners, cfg.n_per_learner, cfg.dim) == (20, 100, 500)
    learners, labels = gen_benchmark_pair(SyntheticConfig("benchmark-pair", dim=24, seed=3))
    assert labels.tolist() == [1] * 10 + [2] * 10
    assert all(d.p == 24 and d.n == 100 for d in learners)
    X, y = benchmark_test_set(SyntheticConfig("benchmark-pair", dim=24, seed=3), 100)
    assert X.shape == (100, 24) and y.shape == (100,)


def test_fairness_design():
    data = gen_fairness(SyntheticConfig("fairness", fairness_c=2.0, seed=5))
    assert len(data.train) == 30 and len(data.test_first) == 20
    assert all(a.n == 25 and b.n == 25 for a, b in zip(data.test_first, data.test_second))
    assert all(d.p == 4 for d in data.train)
    assert set(data.sensitive) == set(range(1, 51))
    # The sensitive value is metadata only.
    d = data.train[0]
    assert d.meta["sensitive"] == data.sensitive[d.learner_id]


def test_fairness_intercept_shift():
    cfg = SyntheticConfig("fairness", fairness_c=3.0, noise_var=0.0, seed=6)
    data = gen_fairness(cfg)
    for d in data.train[:5]:
        resid = d.responses - d.features @ np.array([1.0, 2.0, -2.0, 2.0])
        np.testing.assert_allclose(resid, 3.0 * data.sensitive[d.learner_id], atol=1e-12)


def test_fairness_c0_single_function():
    data = gen_fairness(SyntheticConfig("fairness", fairness_c=0.0, noise_var=0.0, seed=1))
    for d in data.train:
        np.testing.assert_allclose(d.responses, d.features @ np.array([1.0, 2.0, -2.0, 2.0]), atol=1e-12)


def test_attack_flip():
    d = SubDataset(1, np.ones((3, 1)), np.array([1.0, -2.0, 0.0]))
    f = attack_flip(d)
    assert f.responses.tolist() == [-1.0, 2.0, 0.0]
    assert np.array_equal(f.features, d.features)
    assert f.meta["attacked"]
    back = attack_flip(f)
    assert np.array_equal(back.responses, d.responses) and not back.meta["attacked"]


def test_adversarial_marks_exactly_k():
    data = gen_adversarial(SyntheticConfig("adversarial", n_per_learner=20, attacked=[2, 5, 9], seed=3))
    flagged = {d.learner_id for d in data.learners if d.meta["attacked"]}
    assert flagged == {2, 5, 9} == set(data.attacked)
    assert len(data.intact) == 47


@pytest.mark.parametrize("scenario", ["two-cluster-linear", "benchmark-pair", "fairness", "adversarial"])
def test_generators_pure_functions_of_seed(scenario):
    kw = dict(dim=6) if scenario == "benchmark-pair" else {}
    a, la = generate(SyntheticConfig(scenario, n_per_learner=10, seed=11, **kw))
    b, lb = generate(SyntheticConfig(scenario, n_per_learner=10, seed=11, **kw))
    c, _ = generate(SyntheticConfig(scenario, n_per_learner=10, seed=12, **kw))
    assert np.array_equal(la, lb)
    assert all(np.array_equal(x.features, y.features) and np.array_equal(x.responses, y.responses)
               for x, y in zip(a, b))
    assert not np.array_equal(a[0].responses, c[0].responses)


# ---------------------------------------------------------------- CSV


def test_csv_round_trip(tmp_path):
    learners, _ = gen_two_cluster_linear(SyntheticConfig(n_learners=4, n_per_learner=6, dim=3, seed=0))
    path = tmp_path / "l.csv"
    write_learners_csv(learners, path)
    back = read_learners_csv(path)
    assert [d.learner_id for d in back] == [1, 2, 3, 4]
    for a, b in zip(learners, back):
        np.testing.assert_allclose(b.features, a.features, atol=1e-12)
        np.testing.assert_allclose(b.responses, a.responses, atol=1e-12)


def test_csv_ungrouped_rows(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("learner_id,y,x1\n2,1,0.5\n1,2,0.1\n2,3,0.7\n1,4,0.2\n")
    back = read_learners_csv(p)
    assert len(back) == 2
    assert back[0].responses.tolist() == [2.0, 4.0]
    assert back[1].features[:, 0].tolist() == [0.5, 0.7]


@pytest.mark.parametrize("text,match", [
    ("", "empty"),
    ("y,x1\n1,2\n", "learner_id"),
    ("learner_id,y,x1\n1,2\n", "line 2"),
    ("learner_id,y,x1\n1,2,3\n1,a,3\n", "line 3"),
])
def test_csv_errors(tmp_path, text, match):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(CSVFormatError, match=match):
        read_learners_csv(p)

"""Per-learner data containers, standardization, splitting, CSV I/O and
synthetic generators for the four experimental designs.

Every generator is a pure function of its :class:`SyntheticConfig`; the
config's ``seed`` fully determines the output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._seeding import derive_seed

SCENARIOS = ("two-cluster-linear", "benchmark-pair", "fairness", "adversarial")


@dataclass(frozen=True)
class StandardizationParams:
    """Column means/standard deviations used to map raw data to z-scores."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    @property
    def x_zero_var(self) -> np.ndarray:
        return self.x_std <= 0.0

    @property
    def y_zero_var(self) -> bool:
        return self.y_std <= 0.0

    def transform_x(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        scale = np.where(self.x_std > 0.0, self.x_std, 1.0)
        Z = (X - self.x_mean) / scale
        if np.any(self.x_zero_var):
            Z[..., self.x_zero_var] = 0.0
        return Z

    def transform_y(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.y_zero_var:
            return np.zeros_like(y)
        return (y - self.y_mean) / self.y_std

    def inverse_y(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        scale = self.y_std if self.y_std > 0.0 else 0.0
        return z * scale + self.y_mean

    def compose(self, inner: "StandardizationParams") -> "StandardizationParams":
        """Parameters of ``self`` applied after ``inner``, relative to raw data."""
        return StandardizationParams(
            x_mean=inner.x_mean + inner.x_std * self.x_mean,
            x_std=inner.x_std * self.x_std,
            y_mean=inner.y_mean + inner.y_std * self.y_mean,
            y_std=inner.y_std * self.y_std,
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SubDataset:
    """One learner's private sample ``(X, y)``.

    Arrays are copied and frozen on construction, so instances can be shared
    read-only between threads.
    """

    learner_id: int
    features: np.ndarray
    responses: np.ndarray
    scaler: Optional[StandardizationParams] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.responses, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or y.ndim != 1:
            raise ValueError(
                f"learner {self.learner_id}: features must be 2-D and responses 1-D, "
                f"got shapes {X.shape} and {y.shape}"
            )
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"learner {self.learner_id}: {X.shape[0]} feature rows but "
                f"{y.shape[0]} responses"
            )
        if X.shape[0] < 2:
            raise ValueError(f"learner {self.learner_id}: need at least 2 rows, got {X.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError(f"learner {self.learner_id}: non-finite values in data")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "responses", _readonly(y))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "SubDataset":
        rows = np.asarray(rows)
        return replace(self, features=self.features[rows], responses=self.responses[rows])

    def with_responses(self, y) -> "SubDataset":
        return replace(self, responses=y)

    def __repr__(self):
        return f"SubDataset(learner_id={self.learner_id}, n={self.n}, p={self.p})"


def check_same_dimension(learners: Sequence[SubDataset]) -> int:
    """Return the shared feature dimension, raising if learners disagree."""
    if not learners:
        raise ValueError("no learners given")
    dims = {d.p for d in learners}
    if len(dims) != 1:
        raise ValueError(f"learners have different feature dimensions: {sorted(dims)}")
    return dims.pop()


def standardize(sub: SubDataset) -> SubDataset:
    """Z-score every feature column and the response using only ``sub``'s rows.

    Zero-variance columns are centred (and so become exactly 0). If ``sub`` was
    already standardized, the recorded scaler is the composition, so it always
    maps the original raw scale to the returned one.
    """
    X = sub.features
    y = sub.responses
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0, ddof=1)
    y_mean = float(y.mean())
    y_std = float(y.std(ddof=1))
    # Exactly-constant columns can produce a tiny nonzero std from round-off.
    x_std = np.where(np.ptp(X, axis=0) == 0.0, 0.0, x_std)
    if np.ptp(y) == 0.0:
        y_std = 0.0
    params = StandardizationParams(x_mean=x_mean, x_std=x_std, y_mean=y_mean, y_std=y_std)
    Z = params.transform_x(X)
    zy = params.transform_y(y)
    scaler = params if sub.scaler is None else params.compose(sub.scaler)
    return replace(sub, features=Z, responses=zy, scaler=scaler)


def split_half(sub: SubDataset, seed) -> tuple[SubDataset, SubDataset]:
    """Uniformly random split into parts of sizes ceil(n/2) and floor(n/2)."""
    n = sub.n
    if n < 4:
        raise ValueError(f"learner {sub.learner_id}: half-half split needs n >= 4, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n1 = (n + 1) // 2
    return sub.subset(np.sort(perm[:n1])), sub.subset(np.sort(perm[n1:]))


def attack_flip(sub: SubDataset) -> SubDataset:
    """Sign-flip attack: negate the responses, keep the features."""
    meta = dict(sub.meta)
    meta["attacked"] = not meta.get("attacked", False)
    return replace(sub, responses=-sub.responses, meta=meta)


# --------------------------------------------------------------------------
# synthetic designs
# --------------------------------------------------------------------------

_SCENARIO_DEFAULTS = {
    "two-cluster-linear": dict(n_learners=20, n_per_learner=50, dim=5, snr=16.0),
    "benchmark-pair": dict(n_learners=20, n_per_learner=100, dim=500, noise_var=0.01),
    "fairness": dict(n_learners=50, n_per_learner=50, dim=4, noise_var=1.0,
                     fairness_c=1.0, n_train_learners=30),
    "adversarial": dict(n_learners=50, n_per_learner=160, dim=12, noise_var=1.0,
                        n_test=2000),
}


@dataclass
class SyntheticConfig:
    """Parameters of one synthetic design.

    Fields left as ``None`` take the scenario's default (see
    ``_SCENARIO_DEFAULTS``): two-cluster-linear uses L=20, n=50, p=5, SNR=16;
    benchmark-pair L=20, n=100, p=500, noise variance 0.01; fairness L=50,
    n=50, p=4, 30 training learners, c=1; adversarial L=50, n=160, p=12 with a
    2000-row test set.

    For two-cluster-linear the noise variance is ``p**2 / snr`` unless
    ``noise_var`` is given explicitly; ``noise_var=0`` gives noiseless data.
    """

    scenario: str = "two-cluster-linear"
    n_learners: Optional[int] = None
    n_per_learner: Optional[int] = None
    dim: Optional[int] = None
    snr: Optional[float] = None
    noise_var: Optional[float] = None
    beta1: Optional[Sequence[float]] = None
    beta2: Optional[Sequence[float]] = None
    min_beta_separation: float = 0.0
    n_clusters: int = 2
    fairness_c: Optional[float] = None
    n_train_learners: Optional[int] = None
    attacked: Sequence[int] = ()
    n_test: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        for key, value in _SCENARIO_DEFAULTS[self.scenario].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.n_learners < 2:
            raise ValueError(f"need at least 2 learners, got {self.n_learners}")
        if self.n_per_learner < 4:
            raise ValueError(f"need at least 4 rows per learner, got {self.n_per_learner}")
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.snr is not None and not self.snr > 0:
            raise ValueError(f"SNR must be positive, got {self.snr}")
        if self.noise_var is not None and self.noise_var < 0:
            raise ValueError(f"noise variance must be >= 0, got {self.noise_var}")
        if self.scenario == "benchmark-pair" and self.dim < 4:
            raise ValueError("benchmark-pair needs dim >= 4")
        if self.scenario == "two-cluster-linear" and not 1 <= self.n_clusters <= self.n_learners:
            raise ValueError(f"n_clusters must be in [1, {self.n_learners}]")
        if self.scenario == "fairness" and not 1 <= self.n_train_learners < self.n_learners:
            raise ValueError("n_train_learners must leave at least one test learner")
        bad = [i for i in self.attacked if not 1 <= int(i) <= self.n_learners]
        if bad:
            raise ValueError(f"attacked learner ids out of range: {bad}")

    @property
    def sigma2(self) -> float:
        if self.noise_var is not None:
            return float(self.noise_var)
        return self.dim ** 2 / self.snr


@dataclass
class FairnessData:
    """Training learners, test learners split into clustering/validation halves,
    and the per-learner sensitive values (metadata only, never in features)."""

    train: list
    test_first: list
    test_second: list
    sensitive: dict


@dataclass
class AdversarialData:
    learners: list
    attacked: frozenset
    X_test: np.ndarray
    y_test: np.ndarray
    beta: np.ndarray

    @property
    def intact(self) -> frozenset:
        return frozenset(d.learner_id for d in self.learners) - self.attacked


def _rng(cfg: SyntheticConfig, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(cfg.seed, cfg.scenario, *keys))


def _draw_betas(cfg: SyntheticConfig) -> list[np.ndarray]:
    rng = _rng(cfg, "beta")
    given = [cfg.beta1, cfg.beta2]
    betas = []
    for k in range(cfg.n_clusters):
        if k < 2 and given[k] is not None:
            b = np.asarray(given[k], dtype=float)
            if b.shape != (cfg.dim,):
                raise ValueError(f"beta{k + 1} must have length {cfg.dim}")
            betas.append(b)
            continue
        for _ in range(10_000):
            b = rng.standard_normal(cfg.dim)
            if all(np.linalg.norm(b - o) > max(cfg.min_beta_separation, 0.0) for o in betas):
                break
        else:
            raise ValueError("could not draw coefficient vectors with the requested separation")
        betas.append(b)
    for i in range(len(betas)):
        for j in range(i):
            if np.array_equal(betas[i], betas[j]):
                raise ValueError("cluster coefficient vectors must differ")
    return betas


def _cluster_sizes(L: int, K: int) -> list[int]:
    base, extra = divmod(L, K)
    return [base + (1 if k < extra else 0) for k in range(K)]


def gen_two_cluster_linear(cfg: SyntheticConfig) -> tuple[list[SubDataset], np.ndarray]:
    """Linear design: learner blocks share ``y = beta_k' x + eps``.

    With the default ``n_clusters=2`` the first half of the learners use
    ``beta1`` and the rest ``beta2``. Labels are returned 1-based.
    """
    if cfg.scenario != "two-cluster-linear":
        raise ValueError(f"config scenario is {cfg.scenario!r}, not two-cluster-linear")
    betas = _draw_betas(cfg)
    sigma = math.sqrt(cfg.sigma2)
    labels = np.repeat(np.arange(1, cfg.n_clusters + 1), _cluster_sizes(cfg.n_learners, cfg.n_clusters))
    learners = []
    for i, k in enumerate(labels, start=1):
        rng = _rng(cfg, "learner", i)
        X = rng.standard_normal((cfg.n_per_learner, cfg.dim))
        y = X @ betas[k - 1] + sigma * rng.standard_normal(cfg.n_per_learner)
        learners.append(SubDataset(i, X, y, meta={"cluster": int(k)}))
    return learners, labels


def friedman_f1(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    inner = X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])
    return np.sqrt(X[:, 0] ** 2 + inner ** 2)


def friedman_f2(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    inner = X[:, 1] * X[:, 2] - 1.0 / (X[:, 1] * X[:, 3])
    return np.arctan(inner) / X[:, 0]


def sample_benchmark_features(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    X = np.empty((n, dim))
    X[:, 0] = rng.uniform(0.0, 100.0, n)
    X[:, 1] = rng.uniform(40 * np.pi, 560 * np.pi, n)
    X[:, 2] = rng.uniform(0.0, 1.0, n)
    X[:, 3] = rng.uniform(1.0, 11.0, n)
    X[:, 4:] = rng.standard_normal((n, dim - 4))
    return X


def gen_benchmark_pair(cfg: SyntheticConfig) -> tuple[list[SubDataset], np.ndarray]:
    """Friedman-type pair: first half of learners from f1, the rest from f2.

    Columns beyond the first four are irrelevant standard Gaussians, so
    ``dim = 4 + number of irrelevant predictors``.
    """
    if cfg.scenario != "benchmark-pair":
        raise ValueError(f"config scenario is {cfg.scenario!r}, not benchmark-pair")
    sigma = math.sqrt(cfg.sigma2)
    half = cfg.n_learners // 2 + cfg.n_learners % 2
    labels = np.where(np.arange(cfg.n_learners) < half, 1, 2)
    learners = []
    for i, k in enumerate(labels, start=1):
        rng = _rng(cfg, "learner", i)
        X = sample_benchmark_features(rng, cfg.n_per_learner, cfg.dim)
        f = friedman_f1(X) if k == 1 else friedman_f2(X)
        y = f + sigma * rng.standard_normal(cfg.n_per_learner)
        learners.append(SubDataset(i, X, y, meta={"cluster": int(k)}))
    return learners, labels


def benchmark_test_set(cfg: SyntheticConfig, n: int = 100, which: int = 1):
    """Fresh rows from f1 (or f2) drawn independently of the learners."""
    rng = _rng(cfg, "test", which)
    X = sample_benchmark_features(rng, n, cfg.dim)
    f = friedman_f1(X) if which == 1 else friedman_f2(X)
    return X, f + math.sqrt(cfg.sigma2) * rng.standard_normal(n)


FAIRNESS_BETA = np.array([1.0, 2.0, -2.0, 2.0])


def gen_fairness(cfg: SyntheticConfig) -> FairnessData:
    """``Y = X1 + 2 X2 - 2 X3 + 2 X4 + c S_i + eps`` with a fixed S_i per learner.

    Learners are randomly split into ``n_train_learners`` training learners
    and the remaining test learners; each test learner is further split into
    two halves. Columns beyond the fourth (if ``dim > 4``) are irrelevant.
    """
    if cfg.scenario != "fairness":
        raise ValueError(f"config scenario is {cfg.scenario!r}, not fairness")
    beta = np.zeros(cfg.dim)
    beta[: min(4, cfg.dim)] = FAIRNESS_BETA[: min(4, cfg.dim)]
    sigma = math.sqrt(cfg.sigma2)
    rng = _rng(cfg, "sensitive")
    sensitive = {i: float(s) for i, s in enumerate(rng.standard_normal(cfg.n_learners), start=1)}
    learners = []
    for i in range(1, cfg.n_learners + 1):
        r = _rng(cfg, "learner", i)
        X = r.standard_normal((cfg.n_per_learner, cfg.dim))
        y = X @ beta + cfg.fairness_c * sensitive[i] + sigma * r.standard_normal(cfg.n_per_learner)
        learners.append(SubDataset(i, X, y, meta={"sensitive": sensitive[i]}))
    order = _rng(cfg, "split").permutation(cfg.n_learners)
    train_ids = set(order[: cfg.n_train_learners].tolist())
    train = [d for k, d in enumerate(learners) if k in train_ids]
    test = [d for k, d in enumerate(learners) if k not in train_ids]
    first, second = [], []
    for d in test:
        a, b = split_half(d, derive_seed(cfg.seed, "fairness-half", d.learner_id))
        first.append(a)
        second.append(b)
    return FairnessData(train=train, test_first=first, test_second=second, sensitive=sensitive)


def gen_adversarial(cfg: SyntheticConfig) -> AdversarialData:
    """Homogeneous linear data for ``n_learners`` learners, with the learners in
    ``cfg.attacked`` sign-flipped, plus an untouched test set."""
    if cfg.scenario != "adversarial":
        raise ValueError(f"config scenario is {cfg.scenario!r}, not adversarial")
    rng = _rng(cfg, "beta")
    beta = rng.standard_normal(cfg.dim)
    sigma = math.sqrt(cfg.sigma2)
    attacked = frozenset(int(i) for i in cfg.attacked)
    learners = []
    for i in range(1, cfg.n_learners + 1):
        r = _rng(cfg, "learner", i)
        X = r.standard_normal((cfg.n_per_learner, cfg.dim))
        y = X @ beta + sigma * r.standard_normal(cfg.n_per_learner)
        d = SubDataset(i, X, y, meta={"attacked": False})
        learners.append(attack_flip(d) if i in attacked else d)
    r = _rng(cfg, "test")
    X_test = r.standard_normal((cfg.n_test, cfg.dim))
    y_test = X_test @ beta + sigma * r.standard_normal(cfg.n_test)
    return AdversarialData(learners, attacked, X_test, y_test, beta)


def generate(cfg: SyntheticConfig):
    """Dispatch on ``cfg.scenario``; returns a flat learner list and labels.

    Fairness test learners are returned whole (both halves re-joined is not
    meaningful), so only the training learners are listed, labelled by
    learner id; adversarial labels are 1 (intact) / 2 (attacked).
    """
    if cfg.scenario == "two-cluster-linear":
        return gen_two_cluster_linear(cfg)
    if cfg.scenario == "benchmark-pair":
        return gen_benchmark_pair(cfg)
    if cfg.scenario == "fairness":
        data = gen_fairness(cfg)
        return data.train, np.array([d.learner_id for d in data.train])
    data = gen_adversarial(cfg)
    labels = np.array([2 if d.learner_id in data.attacked else 1 for d in data.learners])
    return data.learners, labels


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


class CSVFormatError(ValueError):
    """Malformed learner CSV; the message carries the offending line number."""


def read_learners_csv(path) -> list[SubDataset]:
    """Read ``learner_id,y,x1,...,xp`` rows into one SubDataset per learner id.

    Learners are returned sorted by id; within a learner, row order is file
    order.
    """
    path = Path(path)
    rows: dict[int, tuple[list, list]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise CSVFormatError(f"{path}: line 1: empty file")
        header = [h.strip() for h in header]
        if "learner_id" not in header:
            raise CSVFormatError(f"{path}: line 1: missing learner_id column")
        if "y" not in header:
            raise CSVFormatError(f"{path}: line 1: missing y column")
        id_col = header.index("learner_id")
        y_col = header.index("y")
        x_cols = [k for k in range(len(header)) if k not in (id_col, y_col)]
        if not x_cols:
            raise CSVFormatError(f"{path}: line 1: no feature columns")
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise CSVFormatError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(record)}"
                )
            try:
                raw_id = float(record[id_col])
                values = [float(c) for c in record]
            except ValueError as exc:
                raise CSVFormatError(f"{path}: line {lineno}: non-numeric cell ({exc})") from None
            if raw_id != int(raw_id):
                raise CSVFormatError(f"{path}: line {lineno}: learner_id must be an integer")
            xs, ys = rows.setdefault(int(raw_id), ([], []))
            xs.append([values[k] for k in x_cols])
            ys.append(values[y_col])
    if not rows:
        raise CSVFormatError(f"{path}: no data rows")
    learners = [SubDataset(lid, np.array(xs), np.array(ys)) for lid, (xs, ys) in sorted(rows.items())]
    check_same_dimension(learners)
    return learners


def write_learners_csv(learners: Sequence[SubDataset], path) -> None:
    p = check_same_dimension(learners)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["learner_id", "y"] + [f"x{k}" for k in range(1, p + 1)])
        for d in learners:
            for x, y in zip(d.features, d.responses):
                w.writerow([d.learner_id, repr(float(y))] + [repr(float(v)) for v in x])

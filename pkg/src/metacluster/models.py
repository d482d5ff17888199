"""Candidate regression methods and the per-learner Select step.

All estimators are small numpy implementations: least squares, ridge,
coordinate-descent lasso, k-nearest neighbours, CART regression trees,
bagged random forests and gradient-boosted stumps. Each ``fit`` returns an
immutable :class:`Predictor` that exposes only ``predict``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._seeding import derive_seed
from .dataset import StandardizationParams, SubDataset, split_half

PARAMETRIC = "parametric"
NONPARAMETRIC = "nonparametric"

_DEFAULT_LAMBDAS = tuple(np.logspace(-4, 1, 10))

DEFAULT_PARAMS = {
    "ols": {},
    "ridge": {"lambdas": _DEFAULT_LAMBDAS},
    "lasso": {"lambdas": _DEFAULT_LAMBDAS, "tol": 1e-8, "max_sweeps": 10_000},
    "knn": {"k": 5},
    "tree": {"max_depth": 6, "min_leaf": 5},
    "forest": {"n_trees": 50, "max_depth": 3, "min_leaf": 1, "max_features": 1 / 3},
    "boost": {"n_rounds": 100, "shrinkage": 0.1, "min_leaf": 1},
}

METHOD_CLASS = {
    "ols": PARAMETRIC,
    "ridge": PARAMETRIC,
    "lasso": PARAMETRIC,
    "knn": NONPARAMETRIC,
    "tree": NONPARAMETRIC,
    "forest": NONPARAMETRIC,
    "boost": NONPARAMETRIC,
}

_ALIASES = {"boosted-stumps": "boost", "rf": "forest", "lr": "ols", "gb": "boost",
            "linear": "ols", "random-forest": "forest"}


@dataclass(frozen=True)
class MethodSpec:
    """A candidate method id plus hyperparameter overrides.

    >>> MethodSpec("forest", {"n_trees": 10}).params["max_depth"]
    3
    """

    method: str
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        method = _ALIASES.get(self.method.lower(), self.method.lower())
        if method not in DEFAULT_PARAMS:
            raise ValueError(f"unknown method {self.method!r}; choose from {sorted(DEFAULT_PARAMS)}")
        object.__setattr__(self, "method", method)
        unknown = set(self.overrides) - set(DEFAULT_PARAMS[method])
        if unknown:
            raise ValueError(f"{method}: unknown hyperparameters {sorted(unknown)}")
        params = self.params
        for key in ("lambdas",):
            if key in params:
                grid = tuple(float(v) for v in np.atleast_1d(params[key]))
                if not grid or min(grid) <= 0:
                    raise ValueError(f"{method}: {key} must be a non-empty grid of positive values")
        for key in ("k", "max_depth", "min_leaf", "n_trees", "n_rounds"):
            if key in params and int(params[key]) < 1:
                raise ValueError(f"{method}: {key} must be >= 1")
        for key in ("shrinkage", "max_features", "tol"):
            if key in params and not params[key] > 0:
                raise ValueError(f"{method}: {key} must be positive")

    @property
    def params(self) -> dict:
        return {**DEFAULT_PARAMS[self.method], **self.overrides}

    @property
    def kind(self) -> str:
        return METHOD_CLASS[self.method]

    @property
    def label(self) -> str:
        return self.method

    def __hash__(self):
        return hash((self.method, tuple(sorted((k, repr(v)) for k, v in self.overrides.items()))))


def parse_menu(items) -> list[MethodSpec]:
    """Build a menu from ids, ``MethodSpec``s or ``{"method": id, ...}`` dicts."""
    if isinstance(items, str):
        items = [s for s in items.split(",") if s.strip()]
    menu = []
    for item in items:
        if isinstance(item, MethodSpec):
            menu.append(item)
        elif isinstance(item, str):
            menu.append(MethodSpec(item.strip()))
        else:
            item = dict(item)
            menu.append(MethodSpec(item.pop("method"), item))
    return menu


# --------------------------------------------------------------------------
# predictors
# --------------------------------------------------------------------------


class Predictor:
    """Fitted regression function. Only ``predict`` is public."""

    method: str = ""

    def __init__(self, method: str, n_train: int, n_features: int):
        self.method = method
        self.n_train = n_train
        self.n_features = n_features

    def _check(self, X) -> tuple[np.ndarray, bool]:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            got = X.shape[-1] if X.ndim else 0
            raise ValueError(
                f"{self.method} predictor trained on dimension {self.n_features}, got input of dimension {got}"
            )
        return X, single

    def predict(self, X):
        X, single = self._check(X)
        out = self._predict(X)
        return float(out[0]) if single else out

    def _predict(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __setattr__(self, name, value):
        if getattr(self, "_frozen", False):
            raise AttributeError(f"{type(self).__name__} is immutable")
        super().__setattr__(name, value)

    def _freeze(self):
        for v in self.__dict__.values():
            if isinstance(v, np.ndarray):
                v.setflags(write=False)
        self._frozen = True
        return self

    def __repr__(self):
        return f"<{type(self).__name__} {self.method} n={self.n_train} p={self.n_features}>"


class LinearPredictor(Predictor):
    def __init__(self, method, n_train, coef, intercept, lam=None):
        super().__init__(method, n_train, len(coef))
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)
        self.lam = lam
        self._freeze()

    def _predict(self, X):
        return X @ self.coef + self.intercept


class KNNPredictor(Predictor):
    def __init__(self, n_train, X, y, k):
        super().__init__("knn", n_train, X.shape[1])
        self._X = np.array(X, dtype=float)
        self._y = np.array(y, dtype=float)
        self.k = min(int(k), len(y))
        self._freeze()

    def _predict(self, X):
        d2 = (
            np.sum(X**2, axis=1)[:, None]
            - 2.0 * X @ self._X.T
            + np.sum(self._X**2, axis=1)[None, :]
        )
        if self.k == len(self._y):
            return np.full(X.shape[0], self._y.mean())
        idx = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return self._y[idx].mean(axis=1)


class TreePredictor(Predictor):
    """Regression tree stored as flat arrays; ``feature == -1`` marks a leaf."""

    def __init__(self, n_train, n_features, feature, threshold, left, right, value, method="tree"):
        super().__init__(method, n_train, n_features)
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.value = np.asarray(value, dtype=float)
        self._freeze()

    @property
    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def _predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return self.value[node]
            go_left = X[rows, np.where(internal, f, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)


class ForestPredictor(Predictor):
    """Average of regression trees, stored as stacked (T, nodes) arrays."""

    def __init__(self, n_train, n_features, feature, threshold, left, right, value):
        super().__init__("forest", n_train, n_features)
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.value = np.asarray(value, dtype=float)
        self._freeze()

    @property
    def n_trees(self) -> int:
        return self.feature.shape[0]

    @property
    def trees(self) -> tuple:
        return tuple(
            TreePredictor(self.n_train, self.n_features, self.feature[t], self.threshold[t],
                          self.left[t], self.right[t], self.value[t], method="forest-tree")
            for t in range(self.n_trees)
        )

    def _predict(self, X):
        T, nmax = self.feature.shape
        n = X.shape[0]
        feat = self.feature.ravel()
        thr = self.threshold.ravel()
        offset = (np.arange(T) * nmax)[None, :]
        node = np.broadcast_to(offset, (n, T)).copy()
        rows = np.arange(n)[:, None]
        while True:
            f = feat[node]
            internal = f >= 0
            if not internal.any():
                break
            go_left = X[rows, np.maximum(f, 0)] <= thr[node]
            local = node - offset
            t_idx = np.broadcast_to(np.arange(T), (n, T))
            nxt = np.where(go_left, self.left[t_idx, local], self.right[t_idx, local]) + offset
            node = np.where(internal, nxt, node)
        return self.value.ravel()[node].mean(axis=1)


class BoostedStumpsPredictor(Predictor):
    def __init__(self, n_train, n_features, init, shrinkage, feature, threshold, left_value, right_value):
        super().__init__("boost", n_train, n_features)
        self.init = float(init)
        self.shrinkage = float(shrinkage)
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left_value = np.asarray(left_value, dtype=float)
        self.right_value = np.asarray(right_value, dtype=float)
        self._freeze()

    def _predict(self, X):
        if len(self.feature) == 0:
            return np.full(X.shape[0], self.init)
        cols = X[:, self.feature]
        steps = np.where(cols <= self.threshold, self.left_value, self.right_value)
        return self.init + self.shrinkage * steps.sum(axis=1)


class ConstantPredictor(Predictor):
    def __init__(self, method, n_train, n_features, value):
        super().__init__(method, n_train, n_features)
        self.value = float(value)
        self._freeze()

    def _predict(self, X):
        return np.full(X.shape[0], self.value)


# --------------------------------------------------------------------------
# linear fits
# --------------------------------------------------------------------------


def _center(X, y):
    xm = X.mean(axis=0)
    ym = float(y.mean())
    return X - xm, y - ym, xm, ym


def ols_coefficients(X, y) -> tuple[np.ndarray, float]:
    """Least squares with intercept; rank-deficient designs use ridge(1e-8)."""
    Xc, yc, xm, ym = _center(X, y)
    n, p = Xc.shape
    if n - 1 < p or np.linalg.matrix_rank(Xc) < p:
        coef = ridge_coefficients_centered(Xc, yc, 1e-8, scale_by_n=False)
    else:
        coef = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    return coef, ym - float(xm @ coef)


def ridge_coefficients_centered(Xc, yc, lam, scale_by_n=True):
    n, p = Xc.shape
    pen = lam * n if scale_by_n else lam
    A = Xc.T @ Xc + pen * np.eye(p)
    return np.linalg.solve(A, Xc.T @ yc)


def ridge_coefficients(X, y, lam) -> tuple[np.ndarray, float]:
    """Minimise ``||y - b0 - X b||^2 / n + lam ||b||^2`` (intercept unpenalised)."""
    Xc, yc, xm, ym = _center(X, y)
    coef = ridge_coefficients_centered(Xc, yc, lam)
    return coef, ym - float(xm @ coef)


def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def lasso_objective(X, y, coef, intercept, lam) -> float:
    r = y - X @ coef - intercept
    return float(r @ r) / (2 * len(y)) + lam * float(np.abs(coef).sum())


def _polish(G, c, b, lam, max_steps=None):
    """Active-set steps towards the exact lasso solution on the current signs.

    Each step solves ``G_AA b_A = c_A - lam s_A`` for the active set ``A``
    with signs ``s``. If a coordinate would change sign, the step stops where
    the first one reaches zero and drops it, then repeats. Along each step
    the objective is the smooth quadratic of the fixed-sign face, so it never
    increases. A singular ``G_AA`` is first reduced by moving along a null
    vector until a coordinate hits zero. Inactive coordinates are left to the
    next sweep.
    Returns the new coefficients or None if no step was possible.
    """
    b = np.array(b, dtype=float)
    moved = False
    for _ in range(max_steps or len(b)):
        A = np.flatnonzero(b)
        if A.size == 0:
            break
        sgn = np.sign(b[A])
        cur = b[A]
        GA = G[np.ix_(A, A)]
        w, Q = np.linalg.eigh(GA)
        if w[0] <= 1e-10 * max(w[-1], 1e-300):
            # Singular face (more active columns than the rows support): the
            # quadratic part is flat along the null vector d, so moving along
            # it to the first zero crossing cannot raise the objective.
            d = Q[:, 0] if sgn @ Q[:, 0] >= 0 else -Q[:, 0]
            same = cur * d > 0
            if not same.any():
                d, same = -d, cur * d < 0
            t = np.where(same, cur / np.where(same, d, 1.0), np.inf)
            first = int(np.argmin(t))
            b[A] = cur - t[first] * d
            b[A[first]] = 0.0
            moved = True
            continue
        try:
            target = np.linalg.solve(GA, c[A] - lam * sgn)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(target)):
            break
        flips = np.flatnonzero(np.sign(target) != sgn)
        if flips.size == 0:
            b[A] = target
            return b
        t = cur[flips] / (cur[flips] - target[flips])
        first = int(np.argmin(t))
        b[A] = cur + t[first] * (target - cur)
        b[A[flips[first]]] = 0.0
        moved = True
    return b if moved else None


def _gram_objective(G, c, b, lam) -> float:
    """Lasso objective up to a constant, in Gram form."""
    return 0.5 * float(b @ G @ b) - float(c @ b) + lam * float(np.abs(b).sum())


def _cd_gram(G, c, lam, b, tol, max_sweeps, on_sweep=None):
    lam = float(lam)
    p = len(c)
    Gl = G.tolist()
    cl = c.tolist()
    dl = np.diag(G).tolist()
    bl = np.asarray(b, dtype=float).tolist()
    Gbl = (G @ np.asarray(b, dtype=float)).tolist()
    pattern, stable = None, 0
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            if dl[j] <= 0.0:
                if bl[j] != 0.0:
                    bl[j] = 0.0
                continue
            old = bl[j]
            z = cl[j] - Gbl[j] + dl[j] * old
            new = _soft(z, lam) / dl[j]
            delta = new - old
            if delta != 0.0:
                bl[j] = new
                row = Gl[j]
                for k in range(p):
                    Gbl[k] += row[k] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta > tol:
            signs = tuple(np.sign(bl).tolist())
            stable = stable + 1 if signs == pattern else 0
            pattern = signs
            if stable >= 1:
                cur = np.array(bl)
                exact = _polish(G, c, cur, lam)
                # The sweep that follows confirms convergence or re-activates
                # coordinates that violate the optimality conditions.
                if exact is not None and _gram_objective(G, c, exact, lam) <= _gram_objective(G, c, cur, lam):
                    bl = exact.tolist()
                    Gbl = (G @ exact).tolist()
                stable = 0
        if on_sweep is not None:
            on_sweep(np.array(bl))
        if max_delta <= tol:
            break
    else:
        warnings.warn(f"lasso coordinate descent hit max_sweeps={max_sweeps}", RuntimeWarning)
    return np.array(bl)


def _gram(X, y):
    Xc, yc, xm, ym = _center(np.asarray(X, float), np.asarray(y, float))
    n = Xc.shape[0]
    return (Xc.T @ Xc) / n, (Xc.T @ yc) / n, xm, ym


def lasso_coordinate_descent(X, y, lam, coef0=None, tol=1e-8, max_sweeps=10_000, history=None):
    """Cyclic coordinate descent for ``||y - b0 - X b||^2/(2n) + lam ||b||_1``.

    Works on the Gram matrix of the centred design. Stops when the largest
    coefficient change within a sweep is at most ``tol``. Once the active set
    and signs are stable for two sweeps, active-set steps towards the exact
    solution on that sign pattern are taken (kept only if the objective does
    not rise), so most fits finish in a handful of sweeps. If ``history`` is a list, the
    objective after each sweep is appended to it.
    """
    G, c, xm, ym = _gram(X, y)
    b = np.zeros(len(c)) if coef0 is None else np.array(coef0, dtype=float)
    on_sweep = None
    if history is not None:
        def on_sweep(coef):
            history.append(lasso_objective(X, y, coef, ym - float(xm @ coef), float(lam)))
    coef = _cd_gram(G, c, lam, b, tol, max_sweeps, on_sweep)
    return coef, ym - float(xm @ coef)


def _lasso_path(X, y, lambdas, tol, max_sweeps):
    """Warm-started fits from the largest lambda down; returned in input order."""
    G, c, xm, ym = _gram(X, y)
    order = np.argsort(lambdas)[::-1]
    out = [None] * len(lambdas)
    coef = np.zeros(len(c))
    for k in order:
        coef = _cd_gram(G, c, lambdas[k], coef, tol, max_sweeps)
        out[k] = (coef, ym - float(xm @ coef))
    return out


def _pick_lambda(method, X, y, lambdas, seed, params, learner_id):
    """Half-half CV for the penalty, on an inner split independent of the outer one."""
    lambdas = [float(v) for v in np.atleast_1d(lambdas)]
    if len(lambdas) == 1:
        return lambdas[0]
    if len(y) < 4:
        return max(lambdas)
    sub = SubDataset(learner_id, X, y)
    train, test = split_half(sub, derive_seed(seed, "inner-cv"))
    if method == "lasso":
        fits = _lasso_path(train.features, train.responses, lambdas, params["tol"], params["max_sweeps"])
    else:
        fits = [ridge_coefficients(train.features, train.responses, lam) for lam in lambdas]
    errs = [np.mean((test.responses - test.features @ c - b0) ** 2) for c, b0 in fits]
    # Ties prefer the larger penalty.
    best = min(range(len(lambdas)), key=lambda k: (errs[k], -lambdas[k]))
    return lambdas[best]


# --------------------------------------------------------------------------
# trees
# --------------------------------------------------------------------------


def _best_split(x_sorted, y_sorted, min_leaf):
    """Best variance-reduction split over columns of pre-sorted data.

    ``x_sorted`` and ``y_sorted`` are (n, f) with each column sorted by x.
    Returns (gain, column, position) where the split puts rows
    ``[:position + 1]`` left, or None when no admissible split exists.
    """
    n = x_sorted.shape[0]
    if n < 2 * min_leaf:
        return None
    csum = np.cumsum(y_sorted, axis=0)
    total = csum[-1]
    nl = np.arange(1, n, dtype=float)[:, None]
    left = csum[:-1]
    score = left**2 / nl + (total - left) ** 2 / (n - nl)
    valid = x_sorted[1:] > x_sorted[:-1]
    if min_leaf > 1:
        valid[: min_leaf - 1] = False
        valid[n - min_leaf:] = False
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    pos, col = np.unravel_index(np.argmax(score), score.shape)
    gain = score[pos, col] - total[col] ** 2 / n
    scale = max(float(np.sum(y_sorted[:, col] ** 2)), 1e-300)
    if not gain > 1e-12 * scale:
        return None
    return float(gain), int(col), int(pos)


def dense_ranks(X) -> np.ndarray:
    """Per-column dense ranks (equal values share a rank), as int32."""
    X = np.asarray(X, dtype=float)
    R = np.empty(X.shape, dtype=np.int32)
    for j in range(X.shape[1]):
        R[:, j] = np.unique(X[:, j], return_inverse=True)[1].reshape(-1)
    return R


def _grow_trees(Xb, yb, max_depth, min_leaf, max_features, rng, ranks=None):
    """Grow ``T`` regression trees level by level, all trees at once.

    ``Xb`` is (T, n, p) and ``yb`` (T, n): one (bootstrap) sample per tree.
    At every level each current leaf takes its best variance-reduction split
    over a random subset of ``max_features`` columns. Returns node arrays of
    shape (T, 2**(max_depth+1) - 1); unused slots have ``feature == -1``.
    ``ranks`` (T, n, p) are dense per-column ranks of ``Xb`` (computed when
    omitted); splitting only needs the ordering, raw values set thresholds.
    """
    T, n, p = Xb.shape
    nmax = 2 ** (max_depth + 1) - 1
    feature = np.full((T, nmax), -1, dtype=np.intp)
    threshold = np.zeros((T, nmax))
    left = np.full((T, nmax), -1, dtype=np.intp)
    right = np.full((T, nmax), -1, dtype=np.intp)
    value = np.zeros((T, nmax))
    tree_of = np.repeat(np.arange(T), n).reshape(T, n)
    node = np.zeros((T, n), dtype=np.intp)
    value[:, 0] = yb.mean(axis=1)
    count = np.ones(T, dtype=np.intp)
    frontier = np.zeros(T * nmax, dtype=bool)
    frontier[np.arange(T) * nmax] = True

    if ranks is None:
        ranks = dense_ranks(Xb.reshape(T * n, p)).reshape(T, n, p)
    rank_dtype = np.int16 if n < 2**15 else np.int32
    RT = np.ascontiguousarray(ranks.transpose(0, 2, 1)).astype(rank_dtype)  # (T, p, n)
    rflat = RT.ravel()
    yflat = yb.ravel()
    # Gathers go through flat indices: np.take is much faster than
    # take_along_axis on these small 3-d arrays.
    off = (np.arange(T * p) * n).reshape(T, p, 1)
    row_off = (np.arange(T) * n)[:, None, None]
    delta = off - row_off
    yidx = np.argsort(RT, axis=2, kind="stable") + row_off  # index into (T, n)
    pos = np.arange(n)
    seg_base = np.arange(T * p).reshape(T, p, 1) * nmax
    sort_dtype = np.int16 if nmax < 2**15 else np.intp

    for level in range(max_depth):
        key_rows = tree_of * nmax + node
        size = np.bincount(key_rows.ravel(), minlength=T * nmax)
        active = frontier & (size >= 2 * min_leaf)
        if not active.any():
            break
        nid = np.take(node.ravel(), yidx)
        if level > 0:
            perm = np.argsort(nid.astype(sort_dtype), axis=2, kind="stable") + off
            yidx = np.take(yidx.ravel(), perm)
            nid = np.take(nid.ravel(), perm)
        rs = np.take(rflat, yidx + delta)
        ys = np.take(yflat, yidx)
        C = np.cumsum(ys, axis=2)
        # Per (tree, feature, node) segment sizes via bincount; rows are
        # sorted by node id, so a segment's start is an exclusive cumsum.
        seg_key = seg_base + nid
        seg_cnt = np.bincount(seg_key.ravel(), minlength=T * p * nmax)
        seg_start = np.cumsum(seg_cnt) - seg_cnt
        seg_start -= np.repeat(seg_start[np.arange(T * p) * nmax], nmax)
        featmask = np.zeros((T * nmax, p), dtype=bool)
        act_keys = np.flatnonzero(active)
        if max_features < p:
            picks = np.argsort(rng.random((len(act_keys), p)), axis=1)[:, :max_features]
            featmask[act_keys[:, None], picks] = True
        else:
            featmask[act_keys] = True
        valid = np.zeros((T, p, n), dtype=bool)
        valid[..., :-1] = (nid[..., 1:] == nid[..., :-1]) & (rs[..., 1:] > rs[..., :-1])
        valid &= np.take(featmask.reshape(T, nmax, p).transpose(0, 2, 1).ravel(), seg_key)
        cand = np.flatnonzero(valid)
        sk = seg_key.ravel()[cand]
        cnt = seg_cnt[sk]
        head = cand - cand % n + seg_start[sk]  # flat index of the segment's first row
        nl = cand - head + 1
        keep = (nl >= min_leaf) & (cnt - nl >= min_leaf)
        cand, head, cnt, nl = cand[keep], head[keep], cnt[keep], nl[keep]
        Cf = C.ravel()
        prev = np.where(head % n > 0, Cf[np.maximum(head - 1, 0)], 0.0)
        tot = Cf[head + cnt - 1] - prev
        left_sum = Cf[cand] - prev
        seg = cnt.astype(float)
        nl = nl.astype(float)
        nr = seg - nl
        gain = left_sum**2 / nl + (tot - left_sum) ** 2 / nr - tot**2 / seg

        flat_keys = (cand // (p * n)) * nmax + nid.ravel()[cand]
        best = np.full(T * nmax, -np.inf)
        if len(cand):
            order = np.argsort(flat_keys, kind="stable")
            ks = flat_keys[order]
            starts = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
            best[ks[starts]] = np.maximum.reduceat(gain[order], starts)
        sumsq = np.bincount(key_rows.ravel(), weights=(yb**2).ravel(), minlength=T * nmax)
        ok = active & (best > 1e-12 * np.maximum(sumsq, 1e-300))
        hit = ok[flat_keys] & (gain == best[flat_keys])
        chosen_keys, first = np.unique(flat_keys[hit], return_index=True)
        frontier[:] = False
        if len(chosen_keys) == 0:
            break
        flat_idx = cand[np.flatnonzero(hit)[first]]
        t_idx, f_idx, k_idx = np.unravel_index(flat_idx, (T, p, n))
        lo = Xb[t_idx, yidx[t_idx, f_idx, k_idx] - t_idx * n, f_idx]
        hi = Xb[t_idx, yidx[t_idx, f_idx, k_idx + 1] - t_idx * n, f_idx]
        thr = 0.5 * (lo + hi)
        thr = np.where((lo <= thr) & (thr < hi), thr, lo)
        nodes = chosen_keys - t_idx * nmax
        # t_idx is sorted because chosen_keys is; rank = position within its tree.
        rank = np.arange(len(t_idx)) - np.searchsorted(t_idx, t_idx)
        lid = count[t_idx] + 2 * rank
        rid = lid + 1
        np.add.at(count, t_idx, 2)
        feature[t_idx, nodes] = f_idx
        threshold[t_idx, nodes] = thr
        left[t_idx, nodes] = lid
        right[t_idx, nodes] = rid

        split_f = np.full(T * nmax, -1, dtype=np.intp)
        split_thr = np.zeros(T * nmax)
        split_l = np.zeros(T * nmax, dtype=np.intp)
        split_r = np.zeros(T * nmax, dtype=np.intp)
        split_f[chosen_keys] = f_idx
        split_thr[chosen_keys] = thr
        split_l[chosen_keys] = lid
        split_r[chosen_keys] = rid
        rf = split_f[key_rows]
        moving = rf >= 0
        xv = np.take(Xb.ravel(), (tree_of * n + pos) * p + np.maximum(rf, 0))
        go_left = xv <= split_thr[key_rows]
        node = np.where(moving, np.where(go_left, split_l[key_rows], split_r[key_rows]), node)
        new_keys = tree_of * nmax + node
        sums = np.bincount(new_keys.ravel(), weights=yb.ravel(), minlength=T * nmax)
        cnts = np.bincount(new_keys.ravel(), minlength=T * nmax)
        born = np.zeros(T * nmax, dtype=bool)
        born[np.concatenate([t_idx * nmax + lid, t_idx * nmax + rid])] = True
        value.ravel()[born] = sums[born] / cnts[born]
        frontier[:] = born
    return feature, threshold, left, right, value


def _n_features(max_features, p):
    if isinstance(max_features, str):
        if max_features == "sqrt":
            return max(1, int(math.sqrt(p)))
        if max_features == "all":
            return p
        raise ValueError(f"unknown max_features {max_features!r}")
    if isinstance(max_features, float) and max_features <= 1.0:
        return max(1, int(math.ceil(max_features * p)))
    return max(1, min(p, int(max_features)))


def _fit_stumps(X, y, n_rounds, shrinkage, min_leaf):
    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    init = float(y.mean())
    resid = y - init
    feats, thrs, lvals, rvals = [], [], [], []
    for _ in range(n_rounds):
        found = _best_split(xs, resid[order], min_leaf)
        if found is None:
            break
        _, f, pos = found
        thr = 0.5 * (xs[pos, f] + xs[pos + 1, f])
        if not xs[pos, f] <= thr < xs[pos + 1, f]:
            thr = xs[pos, f]
        mask = X[:, f] <= thr
        lv = float(resid[mask].mean())
        rv = float(resid[~mask].mean())
        resid = resid - shrinkage * np.where(mask, lv, rv)
        feats.append(f)
        thrs.append(float(thr))
        lvals.append(lv)
        rvals.append(rv)
    return init, feats, thrs, lvals, rvals


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def fit(method: MethodSpec, data: SubDataset, seed=0) -> Predictor:
    """Fit ``method`` on ``data``. Penalties are tuned by an inner half-half split."""
    if isinstance(method, str):
        method = MethodSpec(method)
    X, y = data.features, data.responses
    n, p = X.shape
    prm = method.params
    m = method.method
    if m == "ols":
        coef, b0 = ols_coefficients(X, y)
        return LinearPredictor("ols", n, coef, b0)
    if m in ("ridge", "lasso"):
        lam = _pick_lambda(m, X, y, prm["lambdas"], seed, prm, data.learner_id)
        if m == "ridge":
            coef, b0 = ridge_coefficients(X, y, lam)
        else:
            # Refit along the path for warm starts down to the chosen lambda.
            grid = [v for v in np.atleast_1d(prm["lambdas"]) if v >= lam]
            coef, b0 = _lasso_path(X, y, grid, prm["tol"], prm["max_sweeps"])[int(np.argmin(grid))]
        return LinearPredictor(m, n, coef, b0, lam=lam)
    if m == "knn":
        return KNNPredictor(n, X, y, prm["k"])
    rng = np.random.default_rng(derive_seed(seed, "fit", m))
    if m == "tree":
        arrays = _grow_trees(X[None], y[None], int(prm["max_depth"]), int(prm["min_leaf"]), p, rng,
                             ranks=dense_ranks(X)[None])
        return TreePredictor(n, p, *(a[0] for a in arrays))
    if m == "forest":
        mf = _n_features(prm["max_features"], p)
        boot = rng.integers(0, n, size=(int(prm["n_trees"]), n))
        arrays = _grow_trees(X[boot], y[boot], int(prm["max_depth"]), int(prm["min_leaf"]), mf, rng,
                             ranks=dense_ranks(X)[boot])
        return ForestPredictor(n, p, *arrays)
    if m == "boost":
        parts = _fit_stumps(X, y, int(prm["n_rounds"]), float(prm["shrinkage"]), int(prm["min_leaf"]))
        return BoostedStumpsPredictor(n, p, parts[0], prm["shrinkage"], *parts[1:])
    raise ValueError(f"unknown method {m!r}")  # pragma: no cover


def predict(pred: Predictor, x):
    return pred.predict(x)


def mse(pred: Predictor, data: SubDataset) -> float:
    """Mean squared residual of ``pred`` on ``data``."""
    r = data.responses - pred.predict(data.features)
    return float(np.mean(r * r))


@dataclass(frozen=True, eq=False)
class SharedInfo:
    """What a learner publishes: chosen method, predictor, fitted MSE, size.

    The predictor operates on the learner's own (standardized) scale;
    ``predict_original`` maps raw features to raw responses with ``scaler``.
    """

    learner_id: int
    method: MethodSpec
    predictor: Predictor
    fitted_mse: float
    n: int
    scaler: Optional[StandardizationParams] = None
    cv_scores: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (math.isfinite(self.fitted_mse) and self.fitted_mse >= 0):
            raise ValueError(f"learner {self.learner_id}: fitted MSE must be finite and >= 0")

    @property
    def n_features(self) -> int:
        return self.predictor.n_features

    def predict_original(self, X):
        if self.scaler is None:
            return self.predictor.predict(X)
        out = self.predictor.predict(self.scaler.transform_x(X))
        return self.scaler.inverse_y(out) if np.ndim(out) else float(self.scaler.inverse_y(out))


def _tie_key(score, spec, index):
    return (score, 0 if spec.kind == PARAMETRIC else 1, index)


def select_method(menu: Sequence[MethodSpec], data: SubDataset, seed=0) -> SharedInfo:
    """Half-half CV over ``menu``, refit the winner on all of ``data``.

    Exact CV ties go to parametric methods first, then to the earliest menu
    entry. Candidates that raise during fitting are skipped with a warning.
    """
    menu = parse_menu(menu)
    if not menu:
        raise ValueError("empty method menu")
    scores = {}
    if len(menu) == 1:
        winner = menu[0]
    else:
        train, test = split_half(data, derive_seed(seed, "select-split"))
        ranked = []
        for k, spec in enumerate(menu):
            try:
                pred = fit(spec, train, derive_seed(seed, "select-fit", k))
                score = mse(pred, test)
            except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
                warnings.warn(f"learner {data.learner_id}: {spec.method} failed to fit ({exc}); skipped")
                continue
            if not math.isfinite(score):
                warnings.warn(f"learner {data.learner_id}: {spec.method} gave non-finite CV error; skipped")
                continue
            scores[spec.label if spec.label not in scores else f"{spec.label}#{k}"] = score
            ranked.append((_tie_key(score, spec, k), spec))
        if not ranked:
            raise ValueError(f"learner {data.learner_id}: every candidate method failed")
        winner = min(ranked, key=lambda t: t[0])[1]
    pred = fit(winner, data, derive_seed(seed, "refit"))
    return SharedInfo(
        learner_id=data.learner_id,
        method=winner,
        predictor=pred,
        fitted_mse=mse(pred, data),
        n=data.n,
        scaler=data.scaler,
        cv_scores=scores,
    )

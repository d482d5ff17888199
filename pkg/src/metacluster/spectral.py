"""Cluster step: normalized-Laplacian spectral clustering of a similarity
matrix, with the number of clusters chosen by the gap statistic or a
penalized within-cluster objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._seeding import derive_seed

NEAR_ZERO_ROW = 1e-12


# --------------------------------------------------------------------------
# eigendecomposition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order; ``vectors[:, k]`` pairs with ``values[k]``."""

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


def _rotation(app, aqq, apq):
    tau = (aqq - app) / (2.0 * apq)
    if tau >= 0:
        t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
    else:
        t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    return c, t * c


def sym_eig(M, tol: float = 1e-12, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps over all (p, q) pairs until the largest off-diagonal magnitude is
    at most ``tol`` (scaled by the Frobenius norm when that exceeds 1). Each
    eigenvector is signed so its largest-magnitude entry is positive.
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > 1e-10:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    thresh = tol * max(1.0, float(np.linalg.norm(A)))
    sweeps = 0
    iu = np.triu_indices(n, k=1)
    while n > 1:
        off = np.abs(A[iu])
        if off.max() <= thresh:
            break
        if sweeps >= max_sweeps:
            raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps (max off-diagonal {off.max():.3g})")
        sweeps += 1
        for p in range(n - 1):
            row = A[p]
            cand = np.flatnonzero(np.abs(row[p + 1:]) > 0.01 * thresh) + p + 1
            for q in cand:
                apq = A[p, q]
                if abs(apq) <= 0.01 * thresh:
                    continue
                c, s = _rotation(A[p, p], A[q, q], apq)
                cp = A[:, p].copy()
                cq = A[:, q]
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp = A[p].copy()
                rq = A[q]
                A[p] = c * rp - s * rq
                A[q] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    V = V[:, order]
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(n)] < 0, -1.0, 1.0)
    return EigenDecomposition(values, V * signs, sweeps)


# --------------------------------------------------------------------------
# Laplacian and embedding
# --------------------------------------------------------------------------


def _matrix(S) -> np.ndarray:
    return np.asarray(S.values if hasattr(S, "values") else S, dtype=float)


def normalized_laplacian(S) -> np.ndarray:
    """``D^{-1/2} S D^{-1/2}`` with ``D`` the diagonal of row sums."""
    S = _matrix(S)
    d = S.sum(axis=1)
    if np.any(d <= 0):
        raise ValueError("similarity matrix has a row with non-positive sum")
    r = 1.0 / np.sqrt(d)
    return S * r[:, None] * r[None, :]


def _normalize_rows(U):
    norms = np.linalg.norm(U, axis=1)
    degenerate = norms < NEAR_ZERO_ROW
    out = np.zeros_like(U)
    out[~degenerate] = U[~degenerate] / norms[~degenerate, None]
    return out, degenerate


def embed(S, K: int, eig: Optional[EigenDecomposition] = None) -> np.ndarray:
    """Rows of the top-``K`` Laplacian eigenvectors, scaled to unit length.

    Rows with norm below 1e-12 are returned as zero rows rather than being
    blown up to unit length.
    """
    rows, _ = _embedding(S, K, eig)
    return rows


def _embedding(S, K, eig=None):
    L = _matrix(S).shape[0]
    if not 1 <= K <= L:
        raise ValueError(f"K must be in [1, {L}], got {K}")
    if eig is None:
        eig = sym_eig(normalized_laplacian(S))
    return _normalize_rows(eig.vectors[:, :K])


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------


@dataclass
class KMeansResult:
    labels: np.ndarray
    objective: float
    centers: np.ndarray
    n_iter: int
    history: list = field(default_factory=list)  # objective per Lloyd step, every restart


def _sqdist(X, C):
    """Squared distances between rows: X (P, n, d), C (P, K, d) -> (P, n, K)."""
    diff = X[:, :, None, :] - C[:, None, :, :]
    return np.einsum("pnkd,pnkd->pnk", diff, diff)


def _kmeanspp(X, K, rng):
    P, n, _ = X.shape
    idx = np.empty((P, K), dtype=np.intp)
    idx[:, 0] = rng.integers(0, n, P)
    rows = np.arange(P)
    d2 = np.sum((X - X[rows, idx[:, 0]][:, None, :]) ** 2, axis=2)
    for k in range(1, K):
        total = d2.sum(axis=1)
        u = rng.random(P)
        cum = np.cumsum(d2, axis=1)
        pick = np.minimum((cum < (u * total)[:, None]).sum(axis=1), n - 1)
        flat = total <= 0
        if flat.any():
            pick[flat] = rng.integers(0, n, int(flat.sum()))
        idx[:, k] = pick
        d2 = np.minimum(d2, np.sum((X - X[rows, pick][:, None, :]) ** 2, axis=2))
    return X[rows[:, None], idx]


def _repair_empty(X, C, labels, dist, K):
    """Give each empty cluster the point farthest from its own centroid."""
    n = X.shape[0]
    for k in range(K):
        counts = np.bincount(labels, minlength=K)
        if counts[k] > 0:
            continue
        own = dist[np.arange(n), labels].copy()
        own[counts[labels] <= 1] = -np.inf
        if not np.isfinite(own).any():
            break
        i = int(np.argmax(own))
        labels[i] = k
        C[k] = X[i]
        dist[i] = np.sum((C - X[i]) ** 2, axis=1)
    return labels


def _lloyd(X, C, max_iter, record=False):
    """Batched Lloyd iterations on P independent problems."""
    P, n, _ = X.shape
    K = C.shape[1]
    C = C.copy()
    labels = np.full((P, n), -1, dtype=np.intp)
    active = np.ones(P, dtype=bool)
    iters = np.zeros(P, dtype=np.intp)
    history = [[] for _ in range(P)] if record else None
    for _ in range(max_iter):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        Xa, Ca = X[act], C[act]
        dist = _sqdist(Xa, Ca)
        lab = np.argmin(dist, axis=2)
        counts = np.stack([np.bincount(l, minlength=K) for l in lab]) if K > 1 else None
        if counts is not None and (counts == 0).any():
            for a in np.flatnonzero((counts == 0).any(axis=1)):
                lab[a] = _repair_empty(Xa[a], Ca[a], lab[a], dist[a], K)
            C[act] = Ca
        if record:
            obj = np.take_along_axis(dist, lab[..., None], axis=2)[..., 0].sum(axis=1)
            for a, o in zip(act, obj):
                history[a].append(float(o))
        same = np.all(lab == labels[act], axis=1)
        labels[act] = lab
        iters[act] += 1
        active[act[same]] = False
        moving = act[~same]
        if moving.size == 0:
            break
        onehot = (lab[~same][..., None] == np.arange(K)).astype(float)
        cnt = onehot.sum(axis=1)
        sums = np.einsum("pnk,pnd->pkd", onehot, X[moving])
        newC = np.where(cnt[..., None] > 0, sums / np.maximum(cnt, 1)[..., None], C[moving])
        C[moving] = newC
    return labels, iters, history


def _canonical(labels):
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(labels.max() + 1, dtype=np.intp)
    remap[np.unique(labels)[order]] = np.arange(len(order))
    return remap[labels]


def within_dispersion(X, labels) -> float:
    """Sum of squared distances of rows to their cluster means."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    total = 0.0
    for k in np.unique(labels):
        pts = X[labels == k]
        total += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return total


def _batch_objective(X, labels, K):
    onehot = (labels[..., None] == np.arange(K)).astype(float)
    cnt = onehot.sum(axis=1)
    sums = np.einsum("pnk,pnd->pkd", onehot, X)
    means = sums / np.maximum(cnt, 1)[..., None]
    resid = X - np.take_along_axis(means, labels[..., None], axis=1)
    return np.sum(resid**2, axis=(1, 2))


def kmeans_batch(X, K: int, seed=0, n_init: int = 20, max_iter: int = 300):
    """k-means on a stack of datasets X (M, n, d); returns (labels, objectives).

    Each dataset gets ``n_init`` k-means++ restarts; the lowest objective
    wins, ties going to the earliest restart.
    """
    X = np.asarray(X, dtype=float)
    M, n, d = X.shape
    if not 1 <= K <= n:
        raise ValueError(f"K must be in [1, {n}], got {K}")
    if K == 1:
        labels = np.zeros((M, n), dtype=np.intp)
        return labels, _batch_objective(X, labels, 1)
    rng = np.random.default_rng(derive_seed(seed, "kmeans", K))
    Xr = np.repeat(X, n_init, axis=0)
    C0 = _kmeanspp(Xr, K, rng)
    labels, _, _ = _lloyd(Xr, C0, max_iter)
    obj = _batch_objective(Xr, labels, K).reshape(M, n_init)
    best = np.argmin(obj, axis=1)
    labels = labels.reshape(M, n_init, n)[np.arange(M), best]
    return labels, obj[np.arange(M), best]


def kmeans(rows, K: int, seed=0, n_init: int = 20, max_iter: int = 300) -> KMeansResult:
    """k-means++ seeding, Lloyd iterations to a fixed point (or ``max_iter``),
    ``n_init`` restarts, best objective kept.

    Labels are renumbered 0..K-1 in order of first appearance.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K must be in [1, {n}], got {K}")
    if K == 1:
        labels = np.zeros(n, dtype=np.intp)
        return KMeansResult(labels, within_dispersion(X, labels), X.mean(axis=0, keepdims=True), 0, [])
    rng = np.random.default_rng(derive_seed(seed, "kmeans", K))
    Xr = np.repeat(X[None], n_init, axis=0)
    C0 = _kmeanspp(Xr, K, rng)
    labels, iters, history = _lloyd(Xr, C0, max_iter, record=True)
    obj = _batch_objective(Xr, labels, K)
    best = int(np.argmin(obj))
    lab = _canonical(labels[best])
    centers = np.stack([X[lab == k].mean(axis=0) for k in range(K)])
    return KMeansResult(lab, float(obj[best]), centers, int(iters[best]), history)


# --------------------------------------------------------------------------
# selecting K
# --------------------------------------------------------------------------


def penalized_objective(U, labels, K: Optional[int] = None, lam: float = 0.0) -> float:
    """``sum_t sum_{i,j in P_t} ||u_i - u_j||^2 / (2 |P_t|) + K * lam``."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    labels = np.asarray(labels)
    if labels.shape[0] != U.shape[0]:
        raise ValueError("labels and rows differ in length")
    present = np.unique(labels)
    if K is None:
        K = len(present)
    elif len(present) != K:
        raise ValueError(f"partition has {len(present)} non-empty clusters, expected {K}")
    total = 0.0
    for k in present:
        pts = U[labels == k]
        diff = pts[:, None, :] - pts[None, :, :]
        total += float(np.sum(diff**2)) / (2 * len(pts))
    return total + K * lam


@dataclass
class SelectionCurve:
    method: str
    ks: list
    values: list  # gap values or penalized objectives
    se: list  # gap standard errors (empty for the penalty method)
    k_hat: int
    dispersion: list = field(default_factory=list)  # W_k on the data


def gap_statistic(Y, ks, seed=0, n_refs: int = 20, n_init: int = 20, n_init_ref: int = 5):
    """Gap(k) = mean_b log W*_kb - log W_k with uniform bounding-box references.

    Returns (gap, se, W) arrays aligned with ``ks``; ``se`` already includes
    the sqrt(1 + 1/B) factor.
    """
    Y = np.asarray(Y, dtype=float)
    n, d = Y.shape
    rng = np.random.default_rng(derive_seed(seed, "gap-refs"))
    lo, hi = Y.min(axis=0), Y.max(axis=0)
    refs = lo + (hi - lo) * rng.random((n_refs, n, d))
    W = np.empty(len(ks))
    Wref = np.empty((len(ks), n_refs))
    for t, k in enumerate(ks):
        W[t] = kmeans(Y, k, seed=derive_seed(seed, "gap-data"), n_init=n_init).objective
        _, Wref[t] = kmeans_batch(refs, k, seed=derive_seed(seed, "gap-ref"), n_init=n_init_ref)
    floor = max(1e-24 * float(Wref.max()), 1e-300)
    logW = np.log(np.maximum(W, floor))
    logWref = np.log(np.maximum(Wref, floor))
    gap = logWref.mean(axis=1) - logW
    se = logWref.std(axis=1) * math.sqrt(1.0 + 1.0 / n_refs)
    return gap, se, W


GAP_RULES = ("tibshirani", "first-se-max", "global-se-max")


def gap_choice(ks, gap, se, rule: str = "tibshirani") -> int:
    """Pick k from a gap curve.

    ``tibshirani``: smallest k with Gap(k) >= Gap(k+1) - se(k+1).
    ``first-se-max``: smallest k within one se of the first local maximum.
    ``global-se-max``: smallest k within one se of the global maximum.
    """
    gap = np.asarray(gap)
    se = np.asarray(se)
    if rule == "tibshirani":
        for t in range(len(ks) - 1):
            if gap[t] >= gap[t + 1] - se[t + 1]:
                return ks[t]
        return ks[-1]
    if rule == "first-se-max":
        top = next((t for t in range(len(ks) - 1) if gap[t] > gap[t + 1]), len(ks) - 1)
    elif rule == "global-se-max":
        top = int(np.argmax(gap))
    else:
        raise ValueError(f"unknown gap rule {rule!r}; expected one of {GAP_RULES}")
    return ks[int(np.flatnonzero(gap >= gap[top] - se[top])[0])]


def default_lambda(L: int) -> float:
    return math.log(L) / L


RANK_TOL = 1e-8


def numerical_rank(eig: EigenDecomposition) -> int:
    """Number of Laplacian eigenvalues with magnitude above ``RANK_TOL``."""
    return max(int(np.sum(np.abs(eig.values) > RANK_TOL)), 1)


def _selection_rows(eig: EigenDecomposition, k: int) -> np.ndarray:
    # A one-column embedding collapses every row onto the same point, so k = 1
    # is scored on the two-column embedding it would otherwise be split in.
    return _normalize_rows(eig.vectors[:, : max(k, 2)])[0]


def select_k(
    S,
    k_grid: Optional[Sequence[int]] = None,
    method: str = "gap",
    lam: Optional[float] = None,
    seed=0,
    n_refs: int = 20,
    eig: Optional[EigenDecomposition] = None,
    gap_rule: str = "tibshirani",
) -> SelectionCurve:
    """Choose the number of clusters, re-embedding the learners for every k.

    Each k is scored on the unit rows of the top-k Laplacian eigenvectors
    (k = 1 on the top two). ``gap`` reads the gap curve with ``gap_rule``
    (see :func:`gap_choice`); ``penalty`` minimises within-cluster
    dispersion + k * lam. Two kinds of candidate are dropped because their
    embedding is not determined by S: k above the numerical rank of the
    Laplacian (the extra eigenvectors come from a null space with an
    arbitrary basis), and k > 1 whose truncation splits a repeated
    eigenvalue (any rotation inside that eigenspace is equally valid).
    """
    M = _matrix(S)
    L = M.shape[0]
    ks = sorted(set(int(k) for k in (k_grid or range(1, min(10, L) + 1))))
    if not ks or ks[0] < 1 or ks[-1] > L:
        raise ValueError(f"k_grid must lie within [1, {L}], got {ks}")
    if method not in ("gap", "penalty"):
        raise ValueError(f"unknown selection method {method!r}")
    if eig is None:
        eig = sym_eig(normalized_laplacian(M))
    rank = numerical_rank(eig)
    vals = eig.values
    ks = [k for k in ks if k <= rank and (k == 1 or k == L or vals[k - 1] - vals[k] > RANK_TOL)] or ks[:1]
    if L < 2 or ks == [ks[0]]:
        return SelectionCurve(method, ks, [0.0], [0.0] if method == "gap" else [], ks[0], [0.0])
    if method == "penalty":
        lam = default_lambda(L) if lam is None else float(lam)
        W = [kmeans(_selection_rows(eig, k), k, seed=derive_seed(seed, "penalty")).objective for k in ks]
        values = [w + k * lam for w, k in zip(W, ks)]
        k_hat = ks[int(np.argmin(values))]
        return SelectionCurve("penalty", ks, values, [], k_hat, W)
    gap, se, W = np.empty(len(ks)), np.empty(len(ks)), np.empty(len(ks))
    for t, k in enumerate(ks):
        g, e, w = gap_statistic(_selection_rows(eig, k), [k], seed=seed, n_refs=n_refs)
        gap[t], se[t], W[t] = g[0], e[0], w[0]
    k_hat = gap_choice(ks, gap, se, gap_rule)
    return SelectionCurve("gap", ks, gap.tolist(), se.tolist(), k_hat, W.tolist())


# --------------------------------------------------------------------------
# full Cluster step
# --------------------------------------------------------------------------


@dataclass
class ClusterResult:
    k: int
    labels: np.ndarray
    embedding: np.ndarray
    eigenvalues: np.ndarray
    objective: float
    selection: Optional[SelectionCurve] = None
    learner_ids: tuple = ()

    def members(self) -> dict:
        ids = self.learner_ids or tuple(range(1, len(self.labels) + 1))
        out = {}
        for lid, lab in zip(ids, self.labels):
            out.setdefault(int(lab), []).append(lid)
        return out

    def label_of(self, learner_id) -> int:
        ids = list(self.learner_ids or range(1, len(self.labels) + 1))
        return int(self.labels[ids.index(learner_id)])

    def to_dict(self) -> dict:
        d = {
            "k": int(self.k),
            "labels": [int(x) for x in self.labels],
            "learner_ids": [int(x) for x in self.learner_ids],
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "embedding": self.embedding.tolist(),
            "objective": float(self.objective),
        }
        if self.selection is not None:
            s = self.selection
            d["selection"] = {"method": s.method, "ks": list(s.ks), "values": list(s.values),
                              "se": list(s.se), "k_hat": int(s.k_hat), "dispersion": list(s.dispersion)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterResult":
        sel = d.get("selection")
        return cls(
            k=int(d["k"]),
            labels=np.asarray(d["labels"], dtype=np.intp),
            embedding=np.asarray(d["embedding"], dtype=float),
            eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
            objective=float(d["objective"]),
            selection=SelectionCurve(**sel) if sel else None,
            learner_ids=tuple(d.get("learner_ids", ())),
        )


def cluster_embedded(rows, degenerate, K, seed=0, n_init=20) -> tuple[np.ndarray, float]:
    """k-means on the non-degenerate rows; degenerate rows join the nearest centroid."""
    good = ~degenerate
    if good.sum() < K:
        good = np.ones_like(degenerate)
    res = kmeans(rows[good], K, seed=seed, n_init=n_init)
    labels = np.empty(len(rows), dtype=np.intp)
    labels[good] = res.labels
    if (~good).any():
        d2 = np.sum((rows[~good][:, None, :] - res.centers[None]) ** 2, axis=2)
        labels[~good] = np.argmin(d2, axis=1)
        labels = _canonical(labels)
    return labels, res.objective


def sec_cluster(
    S,
    K: Optional[int] = None,
    method: str = "gap",
    k_grid: Optional[Sequence[int]] = None,
    lam: Optional[float] = None,
    seed=0,
    n_refs: int = 20,
    n_init: int = 20,
    gap_rule: str = "tibshirani",
) -> ClusterResult:
    """Spectral clustering of learners from their similarity matrix.

    With ``K`` given: Laplacian, top-K eigenvectors, unit rows, k-means.
    Otherwise K is first chosen by :func:`select_k`.
    """
    M = _matrix(S)
    L = M.shape[0]
    ids = tuple(getattr(S, "learner_ids", ()) or range(1, L + 1))
    eig = sym_eig(normalized_laplacian(M))
    selection = None
    if K is None:
        selection = select_k(M, k_grid, method, lam, seed=derive_seed(seed, "select-k"),
                             n_refs=n_refs, eig=eig, gap_rule=gap_rule)
        K = selection.k_hat
    rows, degenerate = _embedding(M, K, eig)
    labels, objective = cluster_embedded(rows, degenerate, K, seed=derive_seed(seed, "final"), n_init=n_init)
    return ClusterResult(K, labels, rows, eig.values, objective, selection, ids)

"""Exchange step: cross-evaluate shared predictors, build V and S.

A :class:`Learner` owns its rows and only answers "what is the mean squared
error of this predictor on your data?". Nothing in this module reads
another learner's rows directly.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset import SubDataset
from .models import Predictor, SharedInfo, mse, select_method

LN2 = math.log(2.0)


class Learner:
    """A data holder exposing only evaluation of foreign predictors.

    ``evaluations`` counts how many times the private rows were touched,
    which makes the privacy boundary auditable.
    """

    def __init__(self, data: SubDataset):
        self._data = data
        self.learner_id = data.learner_id
        self.n = data.n
        self.n_features = data.p
        self.evaluations = 0

    def publish(self, menu, seed=0) -> SharedInfo:
        self.evaluations += 1
        return select_method(menu, self._data, seed)

    def evaluate(self, predictor: Predictor, owner_id: Optional[int] = None) -> float:
        if predictor.n_features != self.n_features:
            who = f"learner {owner_id}" if owner_id is not None else "foreign predictor"
            raise ValueError(
                f"{who} has dimension {predictor.n_features} but learner "
                f"{self.learner_id} has dimension {self.n_features}"
            )
        self.evaluations += 1
        return mse(predictor, self._data)

    def __repr__(self):
        return f"Learner(id={self.learner_id}, n={self.n})"


def _as_host(host):
    return host if isinstance(host, Learner) else Learner(host)


def cross_loss(info: SharedInfo, host) -> float:
    """Mean squared loss of learner i's predictor on learner j's rows.

    ``host`` is a :class:`Learner` or a raw :class:`SubDataset` (wrapped on
    the fly).
    """
    if isinstance(host, SubDataset):
        if info.n_features != host.p:
            raise ValueError(
                f"learner {info.learner_id} has dimension {info.n_features} but learner "
                f"{host.learner_id} has dimension {host.p}"
            )
        return mse(info.predictor, host)
    return host.evaluate(info.predictor, owner_id=info.learner_id)


def dissimilarity_from_losses(e_ij: float, e_j: float, e_ji: float, e_i: float) -> float:
    return abs(e_ij - e_j) + abs(e_ji - e_i)


def dissimilarity(info_i: SharedInfo, info_j: SharedInfo, host_i, host_j) -> float:
    """``|e(i->j) - e_j| + |e(j->i) - e_i|``."""
    e_ij = cross_loss(info_i, host_j)
    e_ji = cross_loss(info_j, host_i)
    return dissimilarity_from_losses(e_ij, info_j.fitted_mse, e_ji, info_i.fitted_mse)


@dataclass(frozen=True)
class DissimilarityMatrix:
    values: np.ndarray
    learner_ids: tuple
    cross_losses: Optional[np.ndarray] = None  # [i, j] = e(i -> j), diagonal e_i

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("dissimilarity matrix must be square")
        if not np.array_equal(v, v.T):
            raise ValueError("dissimilarity matrix must be exactly symmetric")
        if np.any(np.diag(v) != 0) or np.any(v < 0):
            raise ValueError("dissimilarities must be >= 0 with zero diagonal")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def off_diagonal(self) -> np.ndarray:
        iu = np.triu_indices(self.values.shape[0], k=1)
        return self.values[iu]


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    bandwidth: float
    learner_ids: tuple

    def __post_init__(self):
        s = np.asarray(self.values, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not np.array_equal(s, s.T):
            raise ValueError("similarity matrix must be exactly symmetric")
        if np.any(np.diag(s) != 1.0):
            raise ValueError("similarity matrix must have unit diagonal")
        if np.any(s <= 0) or np.any(s > 1):
            raise ValueError("similarities must lie in (0, 1]")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "values", s)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def select_bandwidth(v) -> float:
    """``ln 2 / median`` of the off-diagonal dissimilarities.

    The median pair then has similarity exactly 0.5. If every off-diagonal
    value is zero the bandwidth is 1; if more than half are zero the median
    of the strictly positive values is used instead.
    """
    values = v.off_diagonal() if isinstance(v, DissimilarityMatrix) else np.asarray(v, float)
    if values.ndim == 2:
        values = values[np.triu_indices(values.shape[0], k=1)]
    if values.size == 0 or not np.any(values > 0):
        return 1.0
    med = float(np.median(values))
    if med <= 0:
        med = float(np.median(values[values > 0]))
    return LN2 / med


def similarity_from_dissimilarity(v: DissimilarityMatrix, a: float) -> SimilarityMatrix:
    if not a > 0:
        raise ValueError(f"bandwidth must be positive, got {a}")
    s = np.exp(-a * v.values)
    np.fill_diagonal(s, 1.0)
    # exp underflows to 0 for huge a*v; keep entries strictly positive.
    s = np.maximum(s, np.finfo(float).tiny)
    return SimilarityMatrix(s, float(a), v.learner_ids)


def build_similarity(
    infos: Sequence[SharedInfo],
    hosts: Sequence,
    a: Optional[float] = None,
    n_jobs: int = 1,
) -> tuple[SimilarityMatrix, DissimilarityMatrix]:
    """All pairwise dissimilarities, then ``s_ij = exp(-a v_ij)``.

    ``hosts[k]`` is learner k's evaluation oracle (a :class:`Learner`, or a
    SubDataset which is wrapped). Each unordered pair is computed exactly
    once and mirrored, so the result does not depend on ``n_jobs``.
    """
    L = len(infos)
    if L < 2:
        raise ValueError("need at least two learners")
    if len(hosts) != L:
        raise ValueError(f"{L} shared infos but {len(hosts)} hosts")
    hosts = [_as_host(h) for h in hosts]
    for info, host in zip(infos, hosts):
        if info.learner_id != host.learner_id:
            raise ValueError(f"info for learner {info.learner_id} paired with host {host.learner_id}")
    pairs = [(i, j) for i in range(L) for j in range(i + 1, L)]

    def run(pair):
        i, j = pair
        try:
            return cross_loss(infos[i], hosts[j]), cross_loss(infos[j], hosts[i])
        except Exception as exc:
            raise RuntimeError(
                f"exchange failed for learners {infos[i].learner_id} and {infos[j].learner_id}: {exc}"
            ) from exc

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(pair) for pair in pairs]

    E = np.zeros((L, L))
    V = np.zeros((L, L))
    e = np.array([info.fitted_mse for info in infos])
    E[np.diag_indices(L)] = e
    for (i, j), (e_ij, e_ji) in zip(pairs, results):
        E[i, j] = e_ij
        E[j, i] = e_ji
        V[i, j] = V[j, i] = dissimilarity_from_losses(e_ij, e[j], e_ji, e[i])
    ids = tuple(info.learner_id for info in infos)
    dis = DissimilarityMatrix(V, ids, E)
    if a is None:
        a = select_bandwidth(dis)
    return similarity_from_dissimilarity(dis, a), dis


def write_matrix_csv(matrix, learner_ids, path) -> None:
    """Square matrix as CSV with learner ids on the first row and column."""
    values = matrix.values if hasattr(matrix, "values") else np.asarray(matrix)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["learner_id"] + [str(i) for i in learner_ids])
        for lid, row in zip(learner_ids, values):
            w.writerow([lid] + [repr(float(x)) for x in row])

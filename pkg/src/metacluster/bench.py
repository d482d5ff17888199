"""Experiment harness: clustering accuracy, the four synthetic studies,
replication bookkeeping and report files.

Every runner is a pure function of its config (including the master seed):
each replication derives its own seeds from ``(master seed, study, rep)``,
so reruns, and runs with a different ``n_jobs``, give identical records.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._seeding import derive_seed
from .collaborate import aggregate_predict, assign_new_learner, ensembles_from_result
from .dataset import (
    SubDataset,
    SyntheticConfig,
    benchmark_test_set,
    gen_adversarial,
    gen_benchmark_pair,
    gen_fairness,
    gen_two_cluster_linear,
)
from .exchange import Learner
from .models import LinearPredictor, ols_coefficients, parse_menu
from .sec import run_sec

# --------------------------------------------------------------------------
# accuracy
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Accuracy:
    fraction: float
    exact: bool


def _contingency(labels, truth):
    pu, pi = np.unique(labels, return_inverse=True)
    tu, ti = np.unique(truth, return_inverse=True)
    C = np.zeros((len(pu), len(tu)), dtype=np.int64)
    np.add.at(C, (pi.reshape(-1), ti.reshape(-1)), 1)
    return C


def _best_matching_bruteforce(C) -> int:
    m = max(C.shape)
    P = np.zeros((m, m), dtype=np.int64)
    P[: C.shape[0], : C.shape[1]] = C
    rows = np.arange(m)
    return max(int(P[rows, list(perm)].sum()) for perm in itertools.permutations(range(m)))


def _best_matching_assignment(C) -> int:
    r, c = linear_sum_assignment(C, maximize=True)
    return int(C[r, c].sum())


def clustering_accuracy(labels, truth) -> Accuracy:
    """Largest fraction of learners whose predicted label maps to their true
    label, over all one-to-one label matchings.

    Matchings are enumerated exhaustively when both label sets have at most 8
    values and solved as an assignment problem otherwise. ``exact`` needs the
    right number of clusters and a fraction of 1.
    """
    labels = np.asarray(labels).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if labels.shape != truth.shape:
        raise ValueError(f"{labels.size} labels but {truth.size} true labels")
    if labels.size == 0:
        raise ValueError("empty labelling")
    C = _contingency(labels, truth)
    agree = _best_matching_bruteforce(C) if max(C.shape) <= 8 else _best_matching_assignment(C)
    frac = agree / labels.size
    exact = C.shape[0] == C.shape[1] and agree == labels.size
    return Accuracy(float(frac), bool(exact))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def aggregate(records: Sequence[dict], group_by: Sequence[str], metrics: Sequence[str]) -> list[dict]:
    """Mean, sample sd, standard error and count of each metric per cell.

    Cells appear in order of first occurrence; booleans count as 0/1.
    """
    cells: dict = {}
    for rec in records:
        cells.setdefault(tuple(_plain(rec[k]) if not isinstance(rec[k], list) else tuple(rec[k])
                               for k in group_by), []).append(rec)
    out = []
    for key, recs in cells.items():
        row = {k: (list(v) if isinstance(v, tuple) else v) for k, v in zip(group_by, key)}
        for m in metrics:
            vals = np.array([float(r[m]) for r in recs if r.get(m) is not None], dtype=float)
            cnt = len(vals)
            mean = float(vals.mean()) if cnt else float("nan")
            sd = float(vals.std(ddof=1)) if cnt > 1 else 0.0
            row[f"{m}_mean"] = mean
            row[f"{m}_sd"] = sd
            row[f"{m}_se"] = sd / math.sqrt(cnt) if cnt else float("nan")
            row[f"{m}_n"] = cnt
        out.append(row)
    return out


def _sig(x, digits=4) -> str:
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return f"{x:.{digits}g}"
    if isinstance(x, (list, tuple)):
        return "+".join(str(v) for v in x)
    return str(x)


@dataclass
class ExperimentReport:
    """Per-replication records plus aggregates recomputable from them.

    ``artifacts`` maps a file stem to ``(header, rows)`` for the CSV dumps
    behind plots. ``runtime`` is excluded from equality so reruns compare
    equal.
    """

    experiment: str
    config: dict
    records: list
    group_by: tuple
    metrics: tuple
    aggregates: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    runtime: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = aggregate(self.records, self.group_by, self.metrics)

    def cell(self, **keys) -> dict:
        """The aggregate row whose grouping keys equal ``keys``."""
        for row in self.aggregates:
            if all(_plain(row[k]) == _plain(v) for k, v in keys.items()):
                return row
        raise KeyError(f"no cell {keys} in {self.experiment} report")

    def mean(self, metric: str, **keys) -> float:
        return self.cell(**keys)[f"{metric}_mean"]

    def select(self, **keys) -> list:
        return [r for r in self.records if all(_plain(r[k]) == _plain(v) for k, v in keys.items())]

    def summary_table(self) -> str:
        cols = list(self.group_by)
        for m in self.metrics:
            cols += [f"{m}_mean", f"{m}_se"]
        rows = [[_sig(r[c]) for c in cols] for r in self.aggregates]
        widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c) for i, c in enumerate(cols)]
        lines = [f"# {self.experiment}: {len(self.records)} records, runtime {self.runtime:.1f} s",
                 "  ".join(c.rjust(w) for c, w in zip(cols, widths))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows]
        return "\n".join(lines) + "\n"

    def write(self, outdir) -> dict:
        """records.jsonl, aggregates.csv, summary.txt, config.json and artifact CSVs."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        p = out / "records.jsonl"
        with p.open("w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(_plain(rec)) + "\n")
        paths["records"] = p
        p = out / "aggregates.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            if self.aggregates:
                w = csv.DictWriter(fh, fieldnames=list(self.aggregates[0]))
                w.writeheader()
                for row in self.aggregates:
                    w.writerow({k: _sig(v) if isinstance(v, list) else v for k, v in row.items()})
        paths["aggregates"] = p
        p = out / "summary.txt"
        p.write_text(self.summary_table(), encoding="utf-8")
        paths["summary"] = p
        p = out / "config.json"
        p.write_text(json.dumps({"experiment": self.experiment, **_plain(self.config)}, indent=2), encoding="utf-8")
        paths["config"] = p
        for name, (header, rows) in self.artifacts.items():
            p = out / f"{name}.csv"
            with p.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows([[_plain(v) for v in row] for row in rows])
            paths[name] = p
        return paths


def read_records(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _run_tasks(fn: Callable, tasks: list, n_jobs: int) -> list:
    if n_jobs is not None and n_jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _check_menu(menu):
    parse_menu(menu)
    if not menu:
        raise ValueError("empty method menu")


def _check_reps(reps):
    if int(reps) < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")


# --------------------------------------------------------------------------
# Simulation 1: accuracy across SNR, dimension and sample size
# --------------------------------------------------------------------------


@dataclass
class Sim1Config:
    """Two-cluster linear design swept over SNR x dimension x per-learner size.

    Defaults cover SNR 2^0..2^7 and p in {5, 10, 20} at n_i = 50 with 20
    replications (a desk-scale stand-in for 50). ``dump`` picks the
    (snr, p, n, rep) whose eigenvalues and embedding are written out.
    """

    snrs: tuple = tuple(float(2**k) for k in range(8))
    dims: tuple = (5, 10, 20)
    n_per_learner: tuple = (50,)
    n_learners: int = 20
    reps: int = 20
    menu: tuple = ("lasso", "forest")
    selection: str = "gap"
    gap_rule: Optional[str] = None
    min_beta_separation: float = 0.0
    dump: Optional[tuple] = None
    seed: int = 0
    n_jobs: int = 1

    def validate(self):
        _check_reps(self.reps)
        _check_menu(self.menu)
        if not self.snrs or min(self.snrs) <= 0:
            raise ValueError("snrs must be a non-empty list of positive values")
        if not self.dims or min(self.dims) < 1:
            raise ValueError("dims must be positive")
        if not self.n_per_learner or min(self.n_per_learner) < 4:
            raise ValueError("n_per_learner values must be >= 4")
        if self.n_learners < 2:
            raise ValueError("need at least 2 learners")
        if self.selection not in ("gap", "penalty"):
            raise ValueError(f"unknown selection {self.selection!r}")


def _sim1_task(args):
    cfg, snr, p, n, rep = args
    data_seed = derive_seed(cfg.seed, "sim1", "data", rep)
    syn = SyntheticConfig("two-cluster-linear", n_learners=cfg.n_learners, n_per_learner=n, dim=p,
                          snr=snr, min_beta_separation=cfg.min_beta_separation, seed=data_seed)
    learners, truth = gen_two_cluster_linear(syn)
    out = run_sec(learners, cfg.menu, seed=derive_seed(cfg.seed, "sim1", "sec", rep),
                  selection=cfg.selection, gap_rule=cfg.gap_rule)
    acc = clustering_accuracy(out.labels, truth)
    rec = dict(snr=float(snr), p=int(p), n=int(n), rep=int(rep), seed=int(data_seed),
               k_hat=int(out.k), accuracy=acc.fraction, exact=acc.exact,
               methods=[i.method.method for i in out.infos])
    dump = None
    if cfg.dump is not None and (float(snr), int(p), int(n), int(rep)) == tuple(cfg.dump):
        dump = dict(eigenvalues=out.result.eigenvalues.tolist(), embedding=out.result.embedding.tolist(),
                    labels=out.labels.tolist(), truth=truth.tolist(),
                    selection=out.result.selection)
    return rec, dump


def run_sim1(config: Optional[Sim1Config] = None) -> ExperimentReport:
    cfg = config or Sim1Config()
    cfg.validate()
    if cfg.dump is None:
        snr = 16.0 if 16.0 in cfg.snrs else cfg.snrs[0]
        p = 5 if 5 in cfg.dims else cfg.dims[0]
        cfg = replace(cfg, dump=(snr, p, cfg.n_per_learner[0], 0))
    t0 = time.perf_counter()
    tasks = [(cfg, float(s), int(p), int(n), r) for n in cfg.n_per_learner for p in cfg.dims
             for s in cfg.snrs for r in range(cfg.reps)]
    results = _run_tasks(_sim1_task, tasks, cfg.n_jobs)
    records = [r for r, _ in results]
    report = ExperimentReport("sim1", asdict(cfg), records, ("snr", "p", "n"), ("exact", "accuracy", "k_hat"))
    report.artifacts["accuracy_curve"] = (
        ["snr", "p", "n", "exact_mean", "exact_se", "accuracy_mean", "k_hat_mean"],
        [[a["snr"], a["p"], a["n"], a["exact_mean"], a["exact_se"], a["accuracy_mean"], a["k_hat_mean"]]
         for a in report.aggregates],
    )
    dumps = [d for _, d in results if d is not None]
    if dumps:
        d = dumps[0]
        report.artifacts["eigenvalues"] = (["index", "eigenvalue"],
                                           [[k + 1, v] for k, v in enumerate(d["eigenvalues"])])
        K = len(d["embedding"][0]) if d["embedding"] else 0
        report.artifacts["embedding"] = (
            ["learner_id", "true_label", "label"] + [f"u{k + 1}" for k in range(K)],
            [[i + 1, t, l, *row] for i, (t, l, row) in enumerate(zip(d["truth"], d["labels"], d["embedding"]))],
        )
        sel = d["selection"]
        if sel is not None:
            se = sel.se or [None] * len(sel.ks)
            report.artifacts["selection_curve"] = (
                ["k", sel.method, "se", "dispersion"],
                [[k, v, s, w] for k, v, s, w in zip(sel.ks, sel.values, se, sel.dispersion)],
            )
    report.runtime = time.perf_counter() - t0
    return report


# --------------------------------------------------------------------------
# Simulation 2: robustness to the candidate menu, collaboration benefit
# --------------------------------------------------------------------------

DEFAULT_SIM2_MENUS = (
    ("boost",),
    ("forest", "boost", "lasso"),
    ("forest", "knn", "boost", "lasso", "ridge"),
    ("forest", "knn", "boost", "lasso", "ridge", "ols", "tree"),
)


@dataclass
class Sim2Config:
    """Friedman-type pair at desk scale (p = 4 signal + 20 noise columns).

    For every nested menu SEC is run on the same data; learner 1 compares
    the size-weighted ensemble of its cluster against its own model on a
    fresh f1 test set. MSEs are reported in learner 1's standardized
    response units (raw MSE divided by its response variance).
    """

    menus: tuple = DEFAULT_SIM2_MENUS
    n_learners: int = 20
    n_per_learner: int = 100
    dim: int = 24
    noise_var: float = 0.01
    reps: int = 50
    n_test: int = 100
    target: int = 1
    gap_rule: Optional[str] = None
    seed: int = 0
    n_jobs: int = 1

    def validate(self):
        _check_reps(self.reps)
        if not self.menus:
            raise ValueError("no menus configured")
        for m in self.menus:
            _check_menu(m)
        if self.dim < 4:
            raise ValueError("dim must be >= 4")
        if self.n_test < 1:
            raise ValueError("n_test must be >= 1")
        if not 1 <= self.target <= self.n_learners:
            raise ValueError("target learner out of range")


def _sim2_task(args):
    cfg, rep = args
    data_seed = derive_seed(cfg.seed, "sim2", "data", rep)
    syn = SyntheticConfig("benchmark-pair", n_learners=cfg.n_learners, n_per_learner=cfg.n_per_learner,
                          dim=cfg.dim, noise_var=cfg.noise_var, seed=data_seed)
    learners, truth = gen_benchmark_pair(syn)
    X_test, y_test = benchmark_test_set(syn, cfg.n_test, which=1)
    records = []
    for menu in cfg.menus:
        out = run_sec(learners, menu, seed=derive_seed(cfg.seed, "sim2", "sec", rep), gap_rule=cfg.gap_rule)
        acc = clustering_accuracy(out.labels, truth)
        ens = ensembles_from_result(out.result, out.infos)[out.result.label_of(cfg.target)]
        own = next(i for i in out.infos if i.learner_id == cfg.target)
        var = float(own.scaler.y_std) ** 2 if own.scaler is not None else 1.0
        collab = float(np.mean((y_test - aggregate_predict(ens, X_test)) ** 2)) / var
        alone = float(np.mean((y_test - own.predict_original(X_test)) ** 2)) / var
        records.append(dict(menu_size=len(menu), menu=list(menu), rep=int(rep), seed=int(data_seed),
                            k_hat=int(out.k), accuracy=acc.fraction, exact=acc.exact,
                            k_is_2=int(out.k) == 2, mse_collab=collab, mse_alone=alone,
                            cluster_size=len(ens.members)))
    return records


def run_sim2(config: Optional[Sim2Config] = None) -> ExperimentReport:
    cfg = config or Sim2Config()
    cfg.validate()
    t0 = time.perf_counter()
    results = _run_tasks(_sim2_task, [(cfg, r) for r in range(cfg.reps)], cfg.n_jobs)
    records = [rec for recs in results for rec in recs]
    records.sort(key=lambda r: (r["menu_size"], r["rep"]))
    report = ExperimentReport("sim2", asdict(cfg), records, ("menu_size", "menu"),
                              ("accuracy", "exact", "k_is_2", "k_hat", "mse_collab", "mse_alone"))
    report.runtime = time.perf_counter() - t0
    return report


# --------------------------------------------------------------------------
# fairness
# --------------------------------------------------------------------------


def _stack(learners: Sequence[SubDataset]):
    X = np.vstack([d.features for d in learners])
    y = np.concatenate([d.responses for d in learners])
    return X, y


def pooled_ols(learners: Sequence[SubDataset], extra: Optional[Sequence[float]] = None) -> LinearPredictor:
    """One least-squares fit on the union of the learners' rows, in the
    given order. ``extra`` appends one per-learner constant column."""
    X, y = _stack(learners)
    if extra is not None:
        X = np.column_stack([X, np.repeat(np.asarray(extra, float), [d.n for d in learners])])
    coef, b0 = ols_coefficients(X, y)
    return LinearPredictor("ols", len(y), coef, b0)


@dataclass
class FairnessConfig:
    """``Y = X1 + 2 X2 - 2 X3 + 2 X4 + c S_i + eps`` with 30 training and 20
    test learners of 50 rows; test learners are placed with their first half
    and scored on their second half."""

    c_grid: tuple = (0.0, 2.0, 4.0, 6.0)
    n_learners: int = 50
    n_per_learner: int = 50
    n_train_learners: int = 30
    dim: int = 4
    noise_var: float = 1.0
    menu: tuple = ("forest", "ols")
    reps: int = 50
    standardize: bool = False
    gap_rule: Optional[str] = None
    seed: int = 0
    n_jobs: int = 1

    def validate(self):
        _check_reps(self.reps)
        _check_menu(self.menu)
        if not self.c_grid:
            raise ValueError("empty c grid")
        if not 1 <= self.n_train_learners < self.n_learners:
            raise ValueError("n_train_learners must leave at least one test learner")
        if self.n_per_learner < 8:
            raise ValueError("test learners need >= 8 rows to split and then select")


def _fairness_task(args):
    cfg, c, rep = args
    data_seed = derive_seed(cfg.seed, "fairness", "data", rep)
    syn = SyntheticConfig("fairness", n_learners=cfg.n_learners, n_per_learner=cfg.n_per_learner,
                          dim=cfg.dim, noise_var=cfg.noise_var, fairness_c=float(c),
                          n_train_learners=cfg.n_train_learners, seed=data_seed)
    data = gen_fairness(syn)
    S = data.sensitive
    train = data.train
    X_val, y_val = _stack(data.test_second)
    s_val = np.repeat([S[d.learner_id] for d in data.test_second], [d.n for d in data.test_second])

    oracle = pooled_ols(train, extra=[S[d.learner_id] for d in train])
    mse_oracle = float(np.mean((y_val - oracle.predict(np.column_stack([X_val, s_val]))) ** 2))
    fair = pooled_ols(train)
    mse_fair = float(np.mean((y_val - fair.predict(X_val)) ** 2))

    sec_seed = derive_seed(cfg.seed, "fairness", "sec", rep)
    out = run_sec(train, cfg.menu, seed=sec_seed, standardize_data=cfg.standardize, gap_rule=cfg.gap_rule)
    members = out.result.members()
    by_id = {d.learner_id: d for d in train}
    fits = {lab: pooled_ols([by_id[i] for i in ids]) for lab, ids in members.items()}
    sq = []
    placed = []
    for first, second in zip(data.test_first, data.test_second):
        host = Learner(first)
        info = host.publish(cfg.menu, derive_seed(sec_seed, "new-learner", first.learner_id))
        lab = assign_new_learner(info, host, out.result, out.infos, out.learners, out.similarity.bandwidth)
        placed.append(lab)
        sq.append((second.responses - fits[lab].predict(second.features)) ** 2)
    mse_sec = float(np.mean(np.concatenate(sq)))
    return dict(c=float(c), rep=int(rep), seed=int(data_seed), mse_oracle=mse_oracle,
                mse_fairness=mse_fair, mse_sec=mse_sec, k_sec=int(out.k), placements=placed)


def run_fairness(config: Optional[FairnessConfig] = None) -> ExperimentReport:
    cfg = config or FairnessConfig()
    cfg.validate()
    t0 = time.perf_counter()
    tasks = [(cfg, float(c), r) for c in cfg.c_grid for r in range(cfg.reps)]
    records = _run_tasks(_fairness_task, tasks, cfg.n_jobs)
    report = ExperimentReport("fairness", asdict(cfg), records, ("c",),
                              ("mse_oracle", "mse_fairness", "mse_sec", "k_sec"))
    report.runtime = time.perf_counter() - t0
    return report


# --------------------------------------------------------------------------
# adversarial learners
# --------------------------------------------------------------------------


@dataclass
class AdversarialConfig:
    """50 learners share one linear model; ``k`` of learners 1..49 get their
    responses sign-flipped. Learner 50 is never attacked and is the one whose
    test error is reported. Collaborating arms pool rows and fit OLS."""

    attack_counts: tuple = (0, 5, 20, 45)
    n_learners: int = 50
    n_per_learner: int = 160
    dim: int = 12
    noise_var: float = 1.0
    n_test: int = 2000
    menu: tuple = ("lasso", "forest")
    reps: int = 50
    standardize: bool = False
    seed: int = 0
    n_jobs: int = 1

    def validate(self):
        _check_reps(self.reps)
        _check_menu(self.menu)
        if self.n_learners < 3:
            raise ValueError("need at least 3 learners")
        bad = [k for k in self.attack_counts if not 0 <= int(k) <= self.n_learners - 1]
        if bad:
            raise ValueError(f"attack counts must lie in [0, {self.n_learners - 1}], got {bad}")


def _adversarial_task(args):
    cfg, k, rep = args
    target = cfg.n_learners
    data_seed = derive_seed(cfg.seed, "adversarial", "data", rep)
    rng = np.random.default_rng(derive_seed(cfg.seed, "adversarial", "attack", k, rep))
    attacked = sorted(int(i) for i in rng.choice(np.arange(1, target), size=int(k), replace=False))
    syn = SyntheticConfig("adversarial", n_learners=cfg.n_learners, n_per_learner=cfg.n_per_learner,
                          dim=cfg.dim, noise_var=cfg.noise_var, n_test=cfg.n_test, attacked=attacked,
                          seed=data_seed)
    data = gen_adversarial(syn)
    by_id = {d.learner_id: d for d in data.learners}

    def test_mse(ids):
        pred = pooled_ols([by_id[i] for i in sorted(ids)])
        return float(np.mean((data.y_test - pred.predict(data.X_test)) ** 2))

    out = run_sec(data.learners, cfg.menu, seed=derive_seed(cfg.seed, "adversarial", "sec", k, rep), K=2,
                  standardize_data=cfg.standardize)
    chosen = out.cluster_of(target)
    return dict(k=int(k), rep=int(rep), seed=int(data_seed),
                mse_all=test_mse(by_id), mse_alone=test_mse([target]),
                mse_sec=test_mse(chosen), mse_oracle=test_mse(data.intact),
                recovered=set(chosen) == set(data.intact), sec_size=len(chosen))


def run_adversarial(config: Optional[AdversarialConfig] = None) -> ExperimentReport:
    cfg = config or AdversarialConfig()
    cfg.validate()
    t0 = time.perf_counter()
    tasks = [(cfg, int(k), r) for k in cfg.attack_counts for r in range(cfg.reps)]
    records = _run_tasks(_adversarial_task, tasks, cfg.n_jobs)
    report = ExperimentReport("adversarial", asdict(cfg), records, ("k",),
                              ("mse_all", "mse_alone", "mse_sec", "mse_oracle", "recovered", "sec_size"))
    report.runtime = time.perf_counter() - t0
    return report


RUNNERS = {
    "sim1": (Sim1Config, run_sim1),
    "sim2": (Sim2Config, run_sim2),
    "fairness": (FairnessConfig, run_fairness),
    "adversarial": (AdversarialConfig, run_adversarial),
}

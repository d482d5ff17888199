"""Command line entry point: ``simulate``, ``cluster``, ``predict`` and ``bench``.

    python -m metacluster simulate --scenario two-cluster-linear --out learners.csv
    python -m metacluster cluster learners.csv --menu lasso,forest --out run/
    python -m metacluster predict --clusters run/clusters.json --models run/models.json \\
        --features new.csv --out preds.csv
    python -m metacluster bench sim1 --config sim1.json --out reports/sim1

The master seed defaults to 0 everywhere (``--seed``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .bench import RUNNERS
from .collaborate import aggregate_predict, ensembles_from_result
from .config import default_config, load_bench_config, load_synthetic_config
from .dataset import SCENARIOS, CSVFormatError, generate, read_learners_csv, write_learners_csv
from .exchange import write_matrix_csv
from .sec import run_sec
from .store import load_clusters, load_model_store, save_clusters, save_model_store

log = logging.getLogger("metacluster")

DEFAULT_SEED = 0


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_synthetic_config(
        args.config, seed=args.seed, scenario=args.scenario, n_learners=args.learners,
        n_per_learner=args.n, dim=args.dim, snr=args.snr, noise_var=args.noise_var,
    )
    learners, truth = generate(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_learners_csv(learners, out)
    labels_path = Path(args.labels_out) if args.labels_out else out.with_name(out.stem + "_truth.csv")
    _write_rows(labels_path, ["learner_id", "true_label"],
                [[d.learner_id, int(t)] for d, t in zip(learners, truth)])
    log.info("wrote %d learners to %s and true labels to %s", len(learners), out, labels_path)
    return 0


# --------------------------------------------------------------------------
# cluster
# --------------------------------------------------------------------------


def cmd_cluster(args) -> int:
    learners = read_learners_csv(args.data)
    k_grid = list(range(1, min(args.k_max, len(learners)) + 1)) if args.k_max else None
    out = run_sec(learners, args.menu, seed=args.seed, K=args.k, selection=args.selection,
                  k_grid=k_grid, lam=args.lam, bandwidth=args.bandwidth,
                  standardize_data=not args.no_standardize, n_jobs=args.n_jobs)
    res = out.result
    od = Path(args.out)
    od.mkdir(parents=True, exist_ok=True)
    _write_rows(od / "labels.csv", ["learner_id", "label", "method", "fitted_mse"],
                [[i.learner_id, int(l), i.method.method, repr(float(i.fitted_mse))]
                 for i, l in zip(out.infos, res.labels)])
    save_clusters(res, od / "clusters.json")
    save_model_store(out.infos, od / "models.json")
    if args.dump:
        ids = res.learner_ids
        write_matrix_csv(out.similarity, ids, od / "similarity.csv")
        write_matrix_csv(out.dissimilarity, ids, od / "dissimilarity.csv")
        _write_rows(od / "eigenvalues.csv", ["index", "eigenvalue"],
                    [[k + 1, repr(float(v))] for k, v in enumerate(res.eigenvalues)])
        _write_rows(od / "embedding.csv", ["learner_id", "label"] + [f"u{k + 1}" for k in range(res.k)],
                    [[i, int(l), *map(float, row)] for i, l, row in zip(ids, res.labels, res.embedding)])
        if res.selection is not None:
            sel = res.selection
            se = sel.se or [""] * len(sel.ks)
            _write_rows(od / "selection.csv", ["k", sel.method, "se", "dispersion"],
                        [[k, v, s, w] for k, v, s, w in zip(sel.ks, sel.values, se, sel.dispersion)])
    print(f"K = {res.k}; bandwidth a = {out.similarity.bandwidth:.6g}")
    for lab, ids in sorted(res.members().items()):
        print(f"  cluster {lab}: learners {ids}")
    return 0


# --------------------------------------------------------------------------
# predict
# --------------------------------------------------------------------------


def _read_features(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if not header:
            raise CSVFormatError(f"{path}: line 1: empty file")
        rows, raw = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise CSVFormatError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([float(c) for c in rec])
                raw.append([c.strip() for c in rec])
            except ValueError as exc:
                raise CSVFormatError(f"{path}: line {lineno}: non-numeric cell ({exc})") from None
    A = np.array(rows, dtype=float).reshape(len(rows), len(header))
    lid = A[:, header.index("learner_id")].astype(int) if "learner_id" in header else None
    xcols = [k for k, h in enumerate(header) if h not in ("learner_id", "y")]
    return header, raw, A[:, xcols], lid


def cmd_predict(args) -> int:
    result = load_clusters(args.clusters)
    infos = load_model_store(args.models)
    ensembles = ensembles_from_result(result, infos)
    header, raw, X, row_learners = _read_features(args.features)
    if args.cluster is not None or args.learner is not None:
        lab = args.cluster if args.cluster is not None else result.label_of(args.learner)
        if lab not in ensembles:
            raise ValueError(f"no cluster {lab}; clusters are {sorted(ensembles)}")
        preds = [("prediction", aggregate_predict(ensembles[lab], X))]
    elif row_learners is not None:
        labels = np.array([result.label_of(int(i)) for i in row_learners])
        yhat = np.empty(len(X))
        for lab in np.unique(labels):
            mask = labels == lab
            yhat[mask] = aggregate_predict(ensembles[int(lab)], X[mask])
        preds = [("prediction", yhat)]
    else:
        preds = [(f"cluster_{lab}", aggregate_predict(ens, X)) for lab, ens in sorted(ensembles.items())]
    names = [n for n, _ in preds]
    cols = np.column_stack([np.atleast_1d(p) for _, p in preds]) if len(X) else np.empty((0, len(preds)))
    _write_rows(args.out, header + names,
                [[*cells, *(repr(float(v)) for v in c)] for cells, c in zip(raw, cols)])
    log.info("wrote %d predictions to %s", len(X), args.out)
    return 0


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------


def cmd_bench(args) -> int:
    if args.print_defaults:
        print(json.dumps(default_config(args.experiment), indent=2))
        return 0
    cfg = load_bench_config(args.experiment, args.config, seed=args.seed)
    if args.reps is not None:
        cfg.reps = args.reps
    if args.n_jobs is not None:
        cfg.n_jobs = args.n_jobs
    cfg.validate()
    _, runner = RUNNERS[args.experiment]
    report = runner(cfg)
    paths = report.write(args.out)
    print(report.summary_table(), end="")
    log.info("report files: %s", ", ".join(str(p) for p in paths.values()))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metacluster", description="Meta-clustering of learners by regression function.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic learner CSV")
    s.add_argument("--scenario", choices=SCENARIOS, default=None, help="design (default two-cluster-linear)")
    s.add_argument("--config", help="JSON file of generator settings")
    s.add_argument("--learners", type=int, help="number of learners L")
    s.add_argument("--n", type=int, help="rows per learner")
    s.add_argument("--dim", type=int, help="feature dimension p")
    s.add_argument("--snr", type=float, help="signal-to-noise ratio (two-cluster-linear)")
    s.add_argument("--noise-var", type=float, help="noise variance")
    s.add_argument("--seed", type=int, default=None, help=f"master seed (default {DEFAULT_SEED})")
    s.add_argument("--out", required=True, help="learner CSV to write")
    s.add_argument("--labels-out", help="true-label CSV (default <out>_truth.csv)")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("cluster", help="run SEC on a learner CSV")
    c.add_argument("data", help="CSV with learner_id, y and feature columns")
    c.add_argument("--menu", default="lasso,forest", help="comma-separated candidate methods")
    c.add_argument("--k", type=int, help="fix the number of clusters instead of selecting it")
    c.add_argument("--selection", choices=("gap", "penalty"), default="gap")
    c.add_argument("--k-max", type=int, default=10, help="largest K considered (default 10)")
    c.add_argument("--lam", type=float, help="penalty weight (default log(L)/L)")
    c.add_argument("--bandwidth", type=float, help="similarity bandwidth a (default ln2 / median v)")
    c.add_argument("--no-standardize", action="store_true", help="use raw rows instead of per-learner z-scores")
    c.add_argument("--n-jobs", type=int, default=1)
    c.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED})")
    c.add_argument("--dump", action="store_true",
                   help="also write similarity, dissimilarity, eigenvalue, embedding and selection CSVs")
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_cluster)

    r = sub.add_parser("predict", help="predict with saved cluster ensembles")
    r.add_argument("--clusters", required=True, help="clusters.json written by `cluster`")
    r.add_argument("--models", required=True, help="models.json written by `cluster`")
    r.add_argument("--features", required=True, help="CSV of feature rows (optional learner_id column)")
    g = r.add_mutually_exclusive_group()
    g.add_argument("--cluster", type=int, help="predict with this cluster's ensemble")
    g.add_argument("--learner", type=int, help="predict with this learner's cluster")
    r.add_argument("--out", required=True, help="predictions CSV to write")
    r.set_defaults(func=cmd_predict)

    b = sub.add_parser("bench", help="run one of the experiment studies")
    b.add_argument("experiment", choices=sorted(RUNNERS))
    b.add_argument("--config", help="JSON config; omitted keys keep their defaults")
    b.add_argument("--seed", type=int, default=None, help=f"master seed (default: config value, else {DEFAULT_SEED})")
    b.add_argument("--reps", type=int, help="override the replication count")
    b.add_argument("--n-jobs", type=int, help="worker processes")
    b.add_argument("--out", default="report", help="output directory (default ./report)")
    b.add_argument("--print-defaults", action="store_true", help="print the default config as JSON and exit")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"metacluster: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

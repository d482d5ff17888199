"""JSON persistence for published learner info and clustering results.

A model store holds what each learner published (method, fitted predictor,
fitted MSE, sample size, scaler), so saved clusters can predict later
without the training data.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import StandardizationParams
from .models import (
    BoostedStumpsPredictor,
    ConstantPredictor,
    ForestPredictor,
    KNNPredictor,
    LinearPredictor,
    MethodSpec,
    Predictor,
    SharedInfo,
    TreePredictor,
)
from .spectral import ClusterResult

STORE_VERSION = 1


def _arr(a) -> list:
    return np.asarray(a).tolist()


def predictor_to_dict(pred: Predictor) -> dict:
    base = {"n_train": int(pred.n_train), "n_features": int(pred.n_features), "method": pred.method}
    if isinstance(pred, LinearPredictor):
        return {"type": "linear", **base, "coef": _arr(pred.coef), "intercept": pred.intercept,
                "lam": None if pred.lam is None else float(pred.lam)}
    if isinstance(pred, KNNPredictor):
        return {"type": "knn", **base, "X": _arr(pred._X), "y": _arr(pred._y), "k": int(pred.k)}
    if isinstance(pred, (TreePredictor, ForestPredictor)):
        kind = "tree" if isinstance(pred, TreePredictor) else "forest"
        return {"type": kind, **base, "feature": _arr(pred.feature), "threshold": _arr(pred.threshold),
                "left": _arr(pred.left), "right": _arr(pred.right), "value": _arr(pred.value)}
    if isinstance(pred, BoostedStumpsPredictor):
        return {"type": "boost", **base, "init": pred.init, "shrinkage": pred.shrinkage,
                "feature": _arr(pred.feature), "threshold": _arr(pred.threshold),
                "left_value": _arr(pred.left_value), "right_value": _arr(pred.right_value)}
    if isinstance(pred, ConstantPredictor):
        return {"type": "constant", **base, "value": pred.value}
    raise TypeError(f"cannot serialise {type(pred).__name__}")


def predictor_from_dict(d: dict) -> Predictor:
    kind = d["type"]
    n, p = int(d["n_train"]), int(d["n_features"])
    if kind == "linear":
        return LinearPredictor(d["method"], n, np.asarray(d["coef"], float), d["intercept"], d.get("lam"))
    if kind == "knn":
        X = np.asarray(d["X"], float).reshape(-1, p)
        return KNNPredictor(n, X, np.asarray(d["y"], float), d["k"])
    if kind in ("tree", "forest"):
        arrays = [np.asarray(d[k]) for k in ("feature", "threshold", "left", "right", "value")]
        if kind == "tree":
            return TreePredictor(n, p, *arrays, method=d["method"])
        return ForestPredictor(n, p, *arrays)
    if kind == "boost":
        return BoostedStumpsPredictor(n, p, d["init"], d["shrinkage"], np.asarray(d["feature"]),
                                      np.asarray(d["threshold"]), np.asarray(d["left_value"]),
                                      np.asarray(d["right_value"]))
    if kind == "constant":
        return ConstantPredictor(d["method"], n, p, d["value"])
    raise ValueError(f"unknown predictor type {kind!r}")


def _scaler_to_dict(s):
    if s is None:
        return None
    return {"x_mean": _arr(s.x_mean), "x_std": _arr(s.x_std), "y_mean": float(s.y_mean), "y_std": float(s.y_std)}


def _scaler_from_dict(d):
    if d is None:
        return None
    return StandardizationParams(np.asarray(d["x_mean"], float), np.asarray(d["x_std"], float),
                                 float(d["y_mean"]), float(d["y_std"]))


def info_to_dict(info: SharedInfo) -> dict:
    return {
        "learner_id": int(info.learner_id),
        "method": info.method.method,
        "overrides": {k: (list(v) if isinstance(v, tuple) else v) for k, v in info.method.overrides.items()},
        "predictor": predictor_to_dict(info.predictor),
        "fitted_mse": float(info.fitted_mse),
        "n": int(info.n),
        "scaler": _scaler_to_dict(info.scaler),
        "cv_scores": {k: float(v) for k, v in info.cv_scores.items()},
    }


def info_from_dict(d: dict) -> SharedInfo:
    return SharedInfo(
        learner_id=int(d["learner_id"]),
        method=MethodSpec(d["method"], dict(d.get("overrides", {}))),
        predictor=predictor_from_dict(d["predictor"]),
        fitted_mse=float(d["fitted_mse"]),
        n=int(d["n"]),
        scaler=_scaler_from_dict(d.get("scaler")),
        cv_scores=dict(d.get("cv_scores", {})),
    )


def save_model_store(infos: Sequence[SharedInfo], path) -> Path:
    path = Path(path)
    doc = {"version": STORE_VERSION, "learners": [info_to_dict(i) for i in infos]}
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def load_model_store(path) -> list[SharedInfo]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != STORE_VERSION:
        raise ValueError(f"{path}: unsupported model store version {doc.get('version')!r}")
    return [info_from_dict(d) for d in doc["learners"]]


def save_clusters(result: ClusterResult, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(result.to_dict()), encoding="utf-8")
    return path


def load_clusters(path) -> ClusterResult:
    return ClusterResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

"""JSON configuration for the experiment runners and the synthetic generator.

A config file is a JSON object whose keys are field names of the matching
dataclass; missing keys keep their documented defaults, unknown keys are an
error. Lists become tuples so configs compare and hash like the defaults.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Optional

from .bench import RUNNERS
from .dataset import SyntheticConfig


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def from_mapping(cls, values: dict, seed: Optional[int] = None):
    """Instantiate dataclass ``cls`` from ``values``; ``seed`` overrides the file."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys {unknown}; valid keys are {sorted(names)}")
    kwargs = {k: _tuplify(v) for k, v in values.items()}
    if seed is not None:
        kwargs["seed"] = int(seed)
    return cls(**kwargs)


def read_json(path) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def load_bench_config(experiment: str, path=None, seed: Optional[int] = None):
    """Config for ``experiment`` (sim1, sim2, fairness, adversarial) from a JSON file."""
    if experiment not in RUNNERS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {sorted(RUNNERS)}")
    cls, _ = RUNNERS[experiment]
    values = read_json(path)
    values.pop("experiment", None)
    cfg = from_mapping(cls, values, seed)
    cfg.validate()
    return cfg


def load_synthetic_config(path=None, seed: Optional[int] = None, **overrides) -> SyntheticConfig:
    values = {**read_json(path), **{k: v for k, v in overrides.items() if v is not None}}
    return from_mapping(SyntheticConfig, values, seed)


def default_config(experiment: str) -> dict:
    """The documented defaults of ``experiment`` as a JSON-ready dict."""
    cls, _ = RUNNERS[experiment]
    return json.loads(json.dumps(dataclasses.asdict(cls())))

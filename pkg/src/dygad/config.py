"""Declarative experiment configuration: YAML in, validated dict out.

Configuration is explicit-only (environment variables override nothing); a
content hash of the resolved config is embedded in every artifact name so
runs stay auditable.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .errors import ConfigError

DEFAULTS = {
    "task": "edge",
    "seed": 0,
    "out_dir": "runs/out",
    "dataset": {
        "kind": "synthetic_community",
        "path": None,
        "schema": {},
        "window": 10,
        "topk": 2,
        "n": 500,
        "m": 5000,
        "communities": 10,
        "p_intra": 0.95,
        "n_sensors": 8,
        "steps": 4000,
    },
    "split": {"train_frac": 0.5},
    "inject": {"ratio": 0.10, "seed": 0, "cross_community": False},
    "model": {
        "k": 2,
        "gnn_depth": 2,
        "hop_budget": 32,
        "gnn_hidden": 128,
        "model_dim": 256,
        "num_heads": 4,
        "num_layers": 6,
        "ffn_dim": 0,
        "use_structure": True,
        "time_sort": True,
        "use_markers": True,
        "dtype": "float32",
    },
    "train": {
        "lr": 1e-3,
        "epochs": 50,
        "batch_size": 64,
        "negative_ratio": 1,
    },
    "sweep": {"k": [1, 2, 3], "gnn_depth": [1, 2, 3]},
}

DATASET_KINDS = ("edge_stream", "multivariate", "canonical",
                 "synthetic_community", "synthetic_sensors")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    cfg = _merge(DEFAULTS, raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["task"] not in ("edge", "node"):
        raise ConfigError(f"task: must be 'edge' or 'node', got {cfg['task']!r}")
    ds = cfg["dataset"]
    if ds["kind"] not in DATASET_KINDS:
        raise ConfigError(f"dataset.kind: must be one of {DATASET_KINDS}, "
                          f"got {ds['kind']!r}")
    if ds["kind"] in ("edge_stream", "multivariate", "canonical") and not ds["path"]:
        raise ConfigError(f"dataset.path: required for kind {ds['kind']!r}")
    if not 0 < cfg["split"]["train_frac"] < 1:
        raise ConfigError("split.train_frac: must be in (0, 1), "
                          f"got {cfg['split']['train_frac']}")
    if not 0 < cfg["inject"]["ratio"] < 1:
        raise ConfigError(f"inject.ratio: must be in (0, 1), got {cfg['inject']['ratio']}")
    mdl = cfg["model"]
    for key in ("k", "gnn_depth", "hop_budget", "gnn_hidden", "model_dim",
                "num_heads", "num_layers"):
        if not isinstance(mdl[key], int) or mdl[key] < 1:
            raise ConfigError(f"model.{key}: must be a positive integer, "
                              f"got {mdl[key]!r}")
    if mdl["model_dim"] % mdl["num_heads"]:
        raise ConfigError(f"model.model_dim: {mdl['model_dim']} not divisible "
                          f"by model.num_heads {mdl['num_heads']}")
    if mdl["gnn_depth"] > 8:
        raise ConfigError("model.gnn_depth: values above 8 are unsupported")
    tr = cfg["train"]
    if tr["lr"] < 0:
        raise ConfigError(f"train.lr: must be >= 0, got {tr['lr']}")
    for key in ("epochs", "batch_size", "negative_ratio"):
        if not isinstance(tr[key], int) or tr[key] < 1:
            raise ConfigError(f"train.{key}: must be a positive integer, "
                              f"got {tr[key]!r}")


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:12]

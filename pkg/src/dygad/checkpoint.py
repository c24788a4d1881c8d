"""Versioned JSON checkpoints: model tensors, optimizer state, config hash.

Values are stored row-major as JSON numbers; Python's repr round-trips floats
exactly, so save/load is bit-exact for both float32 and float64 models.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import torch

from .errors import DataError
from .model import EventScorer, ModelConfig

CHECKPOINT_VERSION = 1


def _tensor_doc(t: torch.Tensor) -> dict:
    return {"shape": list(t.shape), "values": t.detach().reshape(-1).tolist()}


def _tensor_from_doc(doc: dict, dtype) -> torch.Tensor:
    return torch.tensor(doc["values"], dtype=dtype).reshape(doc["shape"])


def save_checkpoint(path, model: EventScorer, optimizer=None,
                    config_hash: str = "") -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "model_config": asdict(model.cfg),
        "tensors": {name: _tensor_doc(p) for name, p in
                    model.state_dict().items()},
    }
    if optimizer is not None:
        sd = optimizer.state_dict()
        doc["optimizer"] = {
            "param_groups": sd["param_groups"],
            "state": {
                str(idx): {k: (_tensor_doc(v) if torch.is_tensor(v) else v)
                           for k, v in st.items()}
                for idx, st in sd["state"].items()
            },
        }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))


def load_checkpoint(path) -> tuple[EventScorer, dict | None, dict]:
    """Rebuild the scorer (and optional optimizer state) from a checkpoint."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {doc.get('version')!r}")
    cfg = ModelConfig(**doc["model_config"])
    model = EventScorer(cfg)
    state = {name: _tensor_from_doc(td, cfg.torch_dtype)
             for name, td in doc["tensors"].items()}
    model.load_state_dict(state)

    opt_state = None
    if "optimizer" in doc:
        o = doc["optimizer"]
        opt_state = {
            "param_groups": o["param_groups"],
            "state": {
                int(idx): {k: (_tensor_from_doc(v, cfg.torch_dtype)
                               if isinstance(v, dict) and "shape" in v else v)
                           for k, v in st.items()}
                for idx, st in o["state"].items()
            },
        }
    meta = {"config_hash": doc.get("config_hash", ""), "version": doc["version"]}
    return model, opt_state, meta

"""Unsupervised training: corrupted negatives, the BCE objective, the Adam
loop, and a finite-difference gradient-check harness."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigError, DataError, NumericError
from .graph import EDGE, NODE, DatasetSplit, Event, TemporalGraph
from .model import EventScorer

BCE_EPS = 1e-7


@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    ``alpha``/``beta`` are the {0,1} indicators gating the node-level and
    edge-level loss terms.  ``lr`` may be 0 (a no-op run, useful for
    determinism checks).
    """

    k: int = 2
    gnn_depth: int = 2
    hop_budget: int = 32
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    alpha: int = 0
    beta: int = 1
    negative_ratio: int = 1

    def validate(self) -> None:
        if self.alpha not in (0, 1) or self.beta not in (0, 1):
            raise ConfigError("alpha and beta must be 0 or 1")
        if self.alpha + self.beta < 1:
            raise ConfigError("at least one of alpha, beta must be 1")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.epochs < 1 or self.batch_size < 1 or self.negative_ratio < 1:
            raise ConfigError("epochs, batch_size and negative_ratio must be >= 1")


# ---------------------------------------------------------------------------
# negatives
# ---------------------------------------------------------------------------

_MAX_TRIES = 1000


def negative_sample(events: list[Event], g: TemporalGraph, ratio: int,
                    rng: np.random.Generator) -> list[Event]:
    """Endpoint-corrupted pseudo-anomalous copies of normal edges.

    Each positive yields ``ratio`` copies with one endpoint replaced by a
    uniform random node such that the corrupted pair exists nowhere in ``g``;
    timestamp and features are kept, label set to 1.
    """
    out = []
    for ev in events:
        if ev.kind != EDGE:
            raise DataError("negative_sample expects edge events")
        for _ in range(ratio):
            for attempt in range(_MAX_TRIES):
                keep_src = bool(rng.integers(2))
                repl = int(rng.integers(g.n))
                u, v = (ev.src, repl) if keep_src else (repl, ev.dst)
                if u != v and not g.has_pair(u, v):
                    out.append(Event.virtual_edge(u, v, ev.t, ev.feat, label=1))
                    break
            else:
                raise DataError("could not corrupt edge into a non-existent "
                                f"pair after {_MAX_TRIES} attempts")
    return out


def corrupt_node_events(events: list[Event], g: TemporalGraph, ratio: int,
                        rng: np.random.Generator) -> list[Event]:
    """Feature-corrupted pseudo-anomalous copies of normal node events.

    A level shift of random sign and magnitude is applied to a random suffix
    of the history window, mimicking sensor deviations; label set to 1.
    """
    out = []
    for ev in events:
        if ev.kind != NODE:
            raise DataError("corrupt_node_events expects node events")
        d = len(ev.feat)
        for _ in range(ratio):
            feat = np.array(ev.feat, dtype=np.float64)
            start = int(rng.integers(d))
            shift = float(rng.uniform(0.3, 1.0)) * (1 if rng.integers(2) else -1)
            feat[start:] += shift
            out.append(Event.for_node(ev.ref, ev.t, feat, label=1))
    return out


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------


def bce_sum(scores, labels) -> torch.Tensor:
    """Summed binary cross-entropy with scores clamped to [eps, 1 - eps]."""
    f = torch.as_tensor(scores, dtype=torch.float64) \
        if not torch.is_tensor(scores) else scores
    y = torch.as_tensor(labels, dtype=f.dtype)
    if f.shape != y.shape:
        raise DataError(f"scores {tuple(f.shape)} and labels {tuple(y.shape)} "
                        "must match")
    f = torch.clamp(f, BCE_EPS, 1.0 - BCE_EPS)
    return -(y * torch.log(f) + (1 - y) * torch.log(1 - f)).sum()


def objective(node_scores, node_labels, edge_scores, edge_labels,
              alpha: int, beta: int) -> torch.Tensor:
    """alpha * BCE(node terms) + beta * BCE(edge terms)."""
    total = torch.zeros((), dtype=torch.float64)
    if len(node_scores):
        total = total + alpha * bce_sum(node_scores, node_labels)
    if len(edge_scores):
        total = total + beta * bce_sum(edge_scores, edge_labels)
    return total


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def train(model: EventScorer, data, cfg: TrainConfig, log_path=None,
          progress: bool = False):
    """Train the scorer on an all-normal stream; returns (model, epoch log).

    Deterministic given ``cfg.seed`` under single-threaded execution: batch
    order, negatives and per-event subsampling all derive from it.
    """
    cfg.validate()
    g = data.train if isinstance(data, DatasetSplit) else data
    task = model.cfg.task
    if task == EDGE:
        positives = g.edge_events()
        make_negatives = negative_sample
    else:
        positives = g.node_events()
        make_negatives = corrupt_node_events
    if not positives:
        raise DataError("training split is empty")
    if any(ev.label == 1 for ev in positives):
        raise DataError("training stream contains anomalous events")

    rng = np.random.default_rng(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr,
                           betas=(0.9, 0.999), eps=1e-8)
    log = []
    fh = open(log_path, "w") if log_path else None
    try:
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            perm = rng.permutation(len(positives))
            total_loss, total_events = 0.0, 0
            for bi, lo in enumerate(range(0, len(perm), cfg.batch_size)):
                pos = [positives[i] for i in perm[lo:lo + cfg.batch_size]]
                neg = make_negatives(pos, g, cfg.negative_ratio, rng)
                events = pos + neg
                labels = torch.tensor([0.0] * len(pos) + [1.0] * len(neg),
                                      dtype=model.cfg.torch_dtype)
                batch = model.encode_events(g, events, base_seed=cfg.seed)
                scores = model(batch)
                if task == EDGE:
                    loss = objective([], [], scores, labels, cfg.alpha, cfg.beta)
                else:
                    loss = objective(scores, labels, [], [], cfg.alpha, cfg.beta)
                if not torch.isfinite(loss):
                    norms = {n: float(p.detach().norm())
                             for n, p in model.named_parameters()}
                    raise NumericError(
                        f"non-finite loss at epoch {epoch} batch {bi}; "
                        f"parameter norms: {norms}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                total_loss += float(loss.detach())
                total_events += len(events)
            entry = {"epoch": epoch,
                     "mean_loss": total_loss / max(total_events, 1),
                     "wall_ms": 1000.0 * (time.perf_counter() - t0)}
            log.append(entry)
            if fh:
                fh.write(json.dumps(entry) + "\n")
                fh.flush()
            if progress:
                print(f"epoch {epoch}: mean_loss={entry['mean_loss']:.6f} "
                      f"({entry['wall_ms']:.0f} ms)", flush=True)
    finally:
        if fh:
            fh.close()
    return model, log


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


def grad_check(model, batch, labels=None, eps: float = 1e-5,
               entries_per_tensor: int = 16, seed: int = 0,
               rel_floor: float = 1e-6, loss_fn=None) -> dict:
    """Compare analytic gradients to central finite differences.

    Probes >= ``entries_per_tensor`` random entries of every parameter tensor;
    relative error uses max(|analytic|, |numeric|, rel_floor) as denominator
    so dead-path zeros are not dominated by finite-difference roundoff.
    Requires a float64 model.  The default loss is the BCE of the model's
    scores against ``labels``; pass ``loss_fn(model, batch)`` to override.
    """
    if eps == 0:
        raise ConfigError("eps must be nonzero")
    if any(p.dtype != torch.float64 for p in model.parameters()):
        raise ConfigError("grad_check requires a float64 model")
    if loss_fn is None:
        labels_t = torch.as_tensor(labels, dtype=torch.float64)

        def loss_value():
            return bce_sum(model(batch), labels_t)
    else:
        def loss_value():
            return loss_fn(model, batch)

    model.zero_grad()
    loss_value().backward()
    grads = {n: p.grad.detach().clone() for n, p in model.named_parameters()}

    rng = np.random.default_rng(seed)
    max_rel, worst = 0.0, ""
    with torch.no_grad():
        for name, p in model.named_parameters():
            flat = p.view(-1)
            count = min(entries_per_tensor, flat.numel())
            idxs = rng.choice(flat.numel(), size=count, replace=False)
            for i in idxs:
                orig = float(flat[i])
                flat[i] = orig + eps
                f_plus = float(loss_value())
                flat[i] = orig - eps
                f_minus = float(loss_value())
                flat[i] = orig
                fd = (f_plus - f_minus) / (2 * eps)
                an = float(grads[name].view(-1)[i])
                rel = abs(an - fd) / max(abs(an), abs(fd), rel_floor)
                if rel > max_rel:
                    max_rel, worst = rel, f"{name}[{int(i)}]"
    return {"max_rel_error": max_rel, "worst_param": worst}

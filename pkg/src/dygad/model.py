"""End-to-end event scorer: ego-graph encoding, structural extraction,
temporal-aware attention and the anomaly head, with batched execution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .attention import ScoringHead, TemporalAwareTransformer
from .errors import ConfigError
from .graph import EDGE, NODE, Event, TemporalGraph
from .sampler import KHS, EgoGraphSequence, build_sequence, khop_ego
from .tensgnn import SubgraphTensors, TensGnn


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and behavioural switches of the scorer."""

    task: str = EDGE
    node_dim: int = 1
    edge_dim: int = 1
    k: int = 2
    hop_budget: int = 32
    gnn_hidden: int = 128
    gnn_depth: int = 2
    model_dim: int = 256
    num_heads: int = 4
    num_layers: int = 6
    ffn_dim: int = 0            # 0 -> model_dim
    use_structure: bool = True
    time_sort: bool = True
    use_markers: bool = True
    dtype: str = "float32"

    def validate(self) -> None:
        if self.task not in (EDGE, NODE):
            raise ConfigError(f"task must be 'edge' or 'node', got {self.task!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.model_dim % self.num_heads:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by "
                              f"{self.num_heads} heads")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def torch_dtype(self):
        return torch.float64 if self.dtype == "float64" else torch.float32


@dataclass
class EncodedEvent:
    """One event's sampled sequence plus the tensors the model consumes."""

    event: Event
    seq: EgoGraphSequence
    sub_t: SubgraphTensors
    token_kind: np.ndarray    # 0 = marker, 1 = event
    token_local: np.ndarray   # row into H_v/H_e of the target kind, -1 for markers
    token_raw: torch.Tensor   # (tokens, d_raw) raw features, zero rows for markers
    center_pos: int


def event_seed(base_seed: int, event: Event) -> int:
    """Stable per-event sampling seed so cached encodings match fresh ones."""
    ref = -1 if event.ref is None else int(event.ref)
    src = -1 if event.src is None else int(event.src)
    dst = -1 if event.dst is None else int(event.dst)
    t_bits = int(np.float64(event.t).view(np.int64)) + 2**63
    ss = np.random.SeedSequence([base_seed, ref + 1, src + 1, dst + 1, t_bits])
    return int(ss.generate_state(1, np.uint64)[0] % (2**63 - 1))


class EventScorer(nn.Module):
    """TensGNN + temporal-aware transformer + scoring head for one task kind."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        d_raw = cfg.edge_dim if cfg.task == EDGE else cfg.node_dim
        ffn = cfg.ffn_dim or cfg.model_dim
        self.extractor = TensGnn(cfg.node_dim, cfg.edge_dim, cfg.gnn_hidden,
                                 cfg.gnn_depth)
        self.raw_proj = nn.Linear(d_raw, cfg.model_dim)
        self.khs_raw = nn.Parameter(torch.randn(cfg.model_dim) * 0.1)
        self.transformer = TemporalAwareTransformer(
            cfg.model_dim, cfg.num_heads, cfg.num_layers, ffn,
            struct_dim=cfg.gnn_hidden)
        self.head = ScoringHead(cfg.model_dim)
        self.to(cfg.torch_dtype)

    # -- encoding ----------------------------------------------------------

    def encode_event(self, g: TemporalGraph, event: Event,
                     base_seed: int = 0) -> EncodedEvent:
        cfg = self.cfg
        seed = event_seed(base_seed, event)
        sub = khop_ego(g, event, cfg.k, budget=cfg.hop_budget, seed=seed)
        seq = build_sequence(sub, time_sort=cfg.time_sort,
                             include_markers=cfg.use_markers, seed=seed)
        kinds = np.array([0 if tok.kind == KHS else 1 for tok in seq.tokens])
        local = np.array([-1 if tok.kind == KHS else tok.index
                          for tok in seq.tokens])
        raw_rows = sub.H_e0 if cfg.task == EDGE else sub.H_v0
        raw = np.zeros((len(seq.tokens), raw_rows.shape[1]))
        sel = kinds == 1
        raw[sel] = raw_rows[local[sel]]
        return EncodedEvent(
            event=event, seq=seq,
            sub_t=SubgraphTensors.from_subgraph(sub, dtype=cfg.torch_dtype),
            token_kind=kinds, token_local=local,
            token_raw=torch.as_tensor(raw, dtype=cfg.torch_dtype),
            center_pos=seq.center_position)

    def encode_events(self, g: TemporalGraph, events, base_seed: int = 0):
        return [self.encode_event(g, ev, base_seed) for ev in events]

    # -- forward -------------------------------------------------------------

    def token_streams(self, enc: EncodedEvent):
        """Per-token (raw-projected, structural) streams for one sequence."""
        H_v, H_e = self.extractor(enc.sub_t, self.cfg.task)
        rows = H_e if self.cfg.task == EDGE else H_v
        n_tok = len(enc.token_kind)
        struct = self.extractor.khs_struct.expand(n_tok, -1).clone()
        x0 = self.khs_raw.expand(n_tok, -1).clone()
        sel = torch.as_tensor(enc.token_kind == 1)
        if sel.any():
            idx = torch.as_tensor(enc.token_local[enc.token_kind == 1])
            struct[sel] = rows[idx]
            x0[sel] = self.raw_proj(enc.token_raw[sel])
        return x0, struct

    def forward(self, batch: list[EncodedEvent]) -> torch.Tensor:
        """Anomaly scores in (0, 1) for a batch of encoded events."""
        streams = [self.token_streams(enc) for enc in batch]
        lengths = [s[0].shape[0] for s in streams]
        B, T = len(batch), max(lengths)
        dt = self.cfg.torch_dtype
        x0 = torch.zeros(B, T, self.cfg.model_dim, dtype=dt)
        struct = torch.zeros(B, T, self.cfg.gnn_hidden, dtype=dt)
        mask = torch.zeros(B, T, dtype=torch.bool)
        for i, (xi, si) in enumerate(streams):
            x0[i, :lengths[i]] = xi
            struct[i, :lengths[i]] = si
            mask[i, :lengths[i]] = True
        out = self.transformer(x0, struct, mask=mask,
                               use_structure=self.cfg.use_structure)
        centers = torch.stack([out[i, batch[i].center_pos] for i in range(B)])
        return self.head(centers)

    @torch.no_grad()
    def score_events(self, g: TemporalGraph, events, base_seed: int = 0,
                     batch_size: int = 256) -> np.ndarray:
        self.eval()
        scores = []
        for lo in range(0, len(events), batch_size):
            batch = self.encode_events(g, events[lo:lo + batch_size], base_seed)
            scores.append(self.forward(batch).detach().cpu().numpy())
        self.train()
        return np.concatenate(scores) if scores else np.zeros(0)

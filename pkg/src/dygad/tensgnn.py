"""Alternating node-layer/edge-layer graph convolution over ego-subgraphs.

Each layer gates a normalized-adjacency convolution of one entity kind with
messages from the other kind routed through the incidence matrix:

    node update:  H_v' = relu( (T  H_e W'_e) * (A_v_norm H_v W_v) )
    edge update:  H_e' = relu( (T' H_v W'_v) * (A_e_norm H_e W_e) )

with A_norm = D^{-1/2} (A + I) D^{-1/2} and * the elementwise product.
Stacks alternate so the last applied layer matches the task's target kind.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import DataError
from .graph import EDGE, NODE
from .sampler import EgoSubgraph


def normalize_adjacency(A: torch.Tensor) -> torch.Tensor:
    """Symmetric normalization with self-loops: D^{-1/2} (A + I) D^{-1/2}."""
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"adjacency must be square, got shape {tuple(A.shape)}")
    a = A + torch.eye(A.shape[0], dtype=A.dtype, device=A.device)
    d = a.sum(dim=1)
    inv_sqrt = d.rsqrt()
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def node_layer(H_v, H_e, T, A_v_norm, W_v, W_e_gate):
    """One node update; with no edges the gate falls back to all-ones."""
    conv = A_v_norm @ H_v @ W_v
    if H_e.shape[0] == 0:
        return torch.relu(conv)
    gate = T @ H_e @ W_e_gate
    return torch.relu(gate * conv)


def edge_layer(H_e, H_v, T, A_e_norm, W_e, W_v_gate):
    """One edge update over the line graph, gated by incident node messages."""
    gate = T.transpose(0, 1) @ H_v @ W_v_gate
    conv = A_e_norm @ H_e @ W_e
    return torch.relu(gate * conv)


@dataclass
class SubgraphTensors:
    """Torch view of an EgoSubgraph with pre-normalized adjacencies."""

    A_v_norm: torch.Tensor
    A_e_norm: torch.Tensor
    T: torch.Tensor
    H_v0: torch.Tensor
    H_e0: torch.Tensor

    @staticmethod
    def from_subgraph(sub: EgoSubgraph, dtype=torch.float64) -> "SubgraphTensors":
        A_v = torch.as_tensor(sub.A_v, dtype=dtype)
        A_e = torch.as_tensor(sub.A_e, dtype=dtype)
        return SubgraphTensors(
            A_v_norm=normalize_adjacency(A_v),
            A_e_norm=(normalize_adjacency(A_e) if A_e.shape[0]
                      else torch.zeros((0, 0), dtype=dtype)),
            T=torch.as_tensor(sub.T, dtype=dtype),
            H_v0=torch.as_tensor(sub.H_v0, dtype=dtype),
            H_e0=torch.as_tensor(sub.H_e0, dtype=dtype),
        )


class TensGnn(nn.Module):
    """Structural extractor: depth alternating (node, edge) layer pairs.

    Edge-targeted stacks run (node_layer, edge_layer) per pair so the final
    layer is an edge layer, and vice versa for node targets.  Marker tokens
    receive a dedicated learned structural embedding.
    """

    def __init__(self, node_dim: int, edge_dim: int, hidden: int, depth: int):
        super().__init__()
        if depth < 1:
            raise DataError(f"gnn depth must be >= 1, got {depth}")
        if depth > 8:
            raise DataError(f"gnn depth {depth} unsupported (max 8)")
        self.hidden = hidden
        self.depth = depth
        self.proj_v = nn.Linear(node_dim, hidden)
        self.proj_e = nn.Linear(edge_dim, hidden)
        self.W_v = nn.ParameterList()
        self.W_e_gate = nn.ParameterList()
        self.W_e = nn.ParameterList()
        self.W_v_gate = nn.ParameterList()
        for _ in range(depth):
            for plist in (self.W_v, self.W_e_gate, self.W_e, self.W_v_gate):
                w = torch.empty(hidden, hidden)
                nn.init.xavier_uniform_(w)
                plist.append(nn.Parameter(w))
        self.khs_struct = nn.Parameter(torch.randn(hidden) * 0.1)

    def forward(self, sub: SubgraphTensors, target_kind: str):
        """Return final (H_v, H_e) for one subgraph."""
        H_v = self.proj_v(sub.H_v0)
        H_e = self.proj_e(sub.H_e0)
        for ell in range(self.depth):
            if target_kind == EDGE:
                H_v = node_layer(H_v, H_e, sub.T, sub.A_v_norm,
                                 self.W_v[ell], self.W_e_gate[ell])
                H_e = edge_layer(H_e, H_v, sub.T, sub.A_e_norm,
                                 self.W_e[ell], self.W_v_gate[ell])
            elif target_kind == NODE:
                H_e = edge_layer(H_e, H_v, sub.T, sub.A_e_norm,
                                 self.W_e[ell], self.W_v_gate[ell])
                H_v = node_layer(H_v, H_e, sub.T, sub.A_v_norm,
                                 self.W_v[ell], self.W_e_gate[ell])
            else:
                raise DataError(f"unknown target kind {target_kind!r}")
        return H_v, H_e

"""Temporal k-hop ego-graph extraction and token-sequence construction.

Hops are measured over the event-adjacency relation restricted to history
(timestamps <= the center's): two edges are adjacent iff they share an
endpoint (line-graph distance), two nodes are adjacent iff some qualifying
edge connects them (ordinary graph distance).  Breadth-first expansion runs
over events of the center's kind; entities of the other kind are closed over
afterwards so the incidence and adjacency matrices are always well formed.

A hop whose event count exceeds the per-hop budget is uniformly subsampled
(deterministically in the seed); expansion continues from the retained set
only, so the sampled ego-graph is self-consistent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError
from .graph import EDGE, NODE, Event, TemporalGraph

KHS = "khs"


@dataclass
class EgoSubgraph:
    """Induced subgraph around a center event, with local index maps.

    ``edge_ids`` uses -1 for a virtual center edge (one not stored in the
    graph, e.g. a corrupted negative sample).  ``A_v``/``A_e`` are binary
    symmetric with zero diagonal; ``T`` is the node-edge incidence matrix.
    """

    center: Event
    k: int
    node_ids: np.ndarray      # (N_v,) global node ids
    edge_ids: np.ndarray      # (N_e,) global edge ids, -1 for virtual center
    node_hop: np.ndarray      # (N_v,)
    edge_hop: np.ndarray      # (N_e,)
    edge_t: np.ndarray        # (N_e,)
    edge_ends: np.ndarray     # (N_e, 2) local endpoint indices
    A_v: np.ndarray
    A_e: np.ndarray
    T: np.ndarray
    H_v0: np.ndarray
    H_e0: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    def hop_of_event(self, kind: str, local_idx: int) -> int:
        hops = self.edge_hop if kind == EDGE else self.node_hop
        return int(hops[local_idx])


@dataclass(frozen=True)
class Token:
    """One sequence position: a hop-separator marker or an event reference."""

    kind: str                 # KHS, EDGE or NODE
    index: Optional[int]      # local index into the subgraph, None for KHS
    hop: Optional[int]
    t: Optional[float]
    gid: Optional[int]        # global id (edge or node), -1 for virtual center


@dataclass
class EgoGraphSequence:
    tokens: list[Token]
    k: int
    subgraph: EgoSubgraph

    @property
    def center_position(self) -> int:
        for i, tok in enumerate(self.tokens):
            if tok.kind != KHS:
                return i
        raise DataError("sequence has no event tokens")


def _check_center(g: TemporalGraph, center: Event) -> None:
    if center.kind == EDGE:
        if center.ref is not None:
            if not 0 <= center.ref < g.m:
                raise DataError(f"center edge {center.ref} not in graph")
        else:
            if center.src is None or center.dst is None:
                raise DataError("virtual edge center needs explicit endpoints")
            for v in (center.src, center.dst):
                if not 0 <= v < g.n:
                    raise DataError(f"center endpoint {v} not in graph")
    elif center.kind == NODE:
        if center.ref is None or not 0 <= center.ref < g.n:
            raise DataError(f"center node {center.ref} not in graph")
    else:
        raise DataError(f"unknown event kind {center.kind!r}")


def khop_ego(g: TemporalGraph, center: Event, k: int,
             budget: Optional[int] = 32, seed: int = 0) -> EgoSubgraph:
    """Extract the temporal k-hop ego-graph around ``center``.

    ``budget`` caps each hop's event count (None = unbounded).  The center is
    always retained.  Deterministic given (g, center, k, budget, seed).
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if budget is not None and budget < 1:
        raise DataError(f"budget must be >= 1, got {budget}")
    _check_center(g, center)
    rng = np.random.default_rng(seed)
    cutoff = center.t

    if center.kind == EDGE:
        return _khop_edges(g, center, k, budget, rng, cutoff)
    return _khop_nodes(g, center, k, budget, rng, cutoff)


def _subsample(candidates: np.ndarray, budget: Optional[int],
               rng: np.random.Generator) -> np.ndarray:
    if budget is None or len(candidates) <= budget:
        return candidates
    pick = rng.choice(len(candidates), size=budget, replace=False)
    return candidates[np.sort(pick)]


def _incident_union(g, nodes, cutoff) -> np.ndarray:
    arrs = [g.incident_edges(int(v), t_max=cutoff) for v in nodes]
    if not arrs:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(arrs))


def _khop_edges(g, center, k, budget, rng, cutoff) -> EgoSubgraph:
    center_ends = ((center.src, center.dst) if center.ref is None
                   else (int(g.src[center.ref]), int(g.dst[center.ref])))
    center_gid = -1 if center.ref is None else int(center.ref)

    # line-graph BFS; a real center edge must not rediscover itself
    visited = np.zeros(g.m, dtype=bool)
    if center_gid >= 0:
        visited[center_gid] = True
    hop_edges = [np.array([center_gid], dtype=np.int64)]
    frontier_nodes = np.unique(np.array(center_ends, dtype=np.int64))
    for _hop in range(1, k + 1):
        cand = _incident_union(g, frontier_nodes, cutoff)
        cand = cand[~visited[cand]]
        visited[cand] = True  # dropped candidates keep their hop; never revisited
        retained = _subsample(cand, budget, rng)
        hop_edges.append(retained)
        if len(retained) == 0:
            break
        frontier_nodes = np.unique(np.concatenate([g.src[retained],
                                                   g.dst[retained]]))

    edge_list: list[int] = []
    edge_hop: list[int] = []
    for h, es in enumerate(hop_edges):
        for e in es:
            edge_list.append(int(e))
            edge_hop.append(h)

    # node set = endpoints of retained edges (center endpoints always present)
    node_hop_map: dict[int, int] = {}
    ends = []
    for e, h in zip(edge_list, edge_hop):
        u, v = center_ends if e < 0 else (int(g.src[e]), int(g.dst[e]))
        ends.append((u, v))
        for x in (u, v):
            node_hop_map[x] = min(node_hop_map.get(x, k), max(h, 1))
    node_list = sorted(node_hop_map)

    return _assemble(g, center, k, node_list,
                     [node_hop_map[v] for v in node_list],
                     edge_list, edge_hop, ends, cutoff)


def _khop_nodes(g, center, k, budget, rng, cutoff) -> EgoSubgraph:
    center_node = int(center.ref)
    visited = np.zeros(g.n, dtype=bool)
    visited[center_node] = True
    hop_nodes = [np.array([center_node], dtype=np.int64)]
    frontier = hop_nodes[0]
    for _hop in range(1, k + 1):
        inc = _incident_union(g, frontier, cutoff)
        if len(inc) == 0:
            hop_nodes.append(np.empty(0, dtype=np.int64))
            break
        cand = np.unique(np.concatenate([g.src[inc], g.dst[inc]]))
        cand = cand[~visited[cand]]
        visited[cand] = True
        retained = _subsample(cand, budget, rng)
        hop_nodes.append(retained)
        frontier = retained
        if len(retained) == 0:
            break

    node_list: list[int] = []
    node_hop: list[int] = []
    for h, vs in enumerate(hop_nodes):
        for v in vs:
            node_list.append(int(v))
            node_hop.append(h)
    in_set = np.zeros(g.n, dtype=bool)
    in_set[node_list] = True

    # closure edges: every qualifying edge with both endpoints retained
    inc = _incident_union(g, node_list, cutoff)
    keep = inc[in_set[g.src[inc]] & in_set[g.dst[inc]]]
    edge_list = sorted((int(e) for e in keep), key=lambda e: (g.t[e], e))
    hop_by_node = dict(zip(node_list, node_hop))
    edge_hop = [max(min(hop_by_node[int(g.src[e])], hop_by_node[int(g.dst[e])]), 1)
                for e in edge_list]
    ends = [(int(g.src[e]), int(g.dst[e])) for e in edge_list]

    return _assemble(g, center, k, node_list, node_hop, edge_list, edge_hop,
                     ends, cutoff)


def _assemble(g, center, k, node_list, node_hop, edge_list, edge_hop, ends,
              cutoff) -> EgoSubgraph:
    node_local = {v: i for i, v in enumerate(node_list)}
    n_v, n_e = len(node_list), len(edge_list)

    A_v = np.zeros((n_v, n_v))
    T = np.zeros((n_v, n_e))
    edge_ends = np.zeros((n_e, 2), dtype=np.int64)
    edge_t = np.zeros(n_e)
    H_e0 = np.zeros((n_e, g.d_e))
    for col, (e, (u, v)) in enumerate(zip(edge_list, ends)):
        lu, lv = node_local[u], node_local[v]
        edge_ends[col] = (lu, lv)
        T[lu, col] = 1.0
        T[lv, col] = 1.0
        if lu != lv:
            A_v[lu, lv] = A_v[lv, lu] = 1.0
        if e < 0:
            edge_t[col] = center.t
            H_e0[col] = center.feat
        else:
            edge_t[col] = g.t[e]
            H_e0[col] = g.edge_feat[e]

    A_e = np.zeros((n_e, n_e))
    incident: dict[int, list[int]] = {}
    for col, (lu, lv) in enumerate(edge_ends):
        incident.setdefault(int(lu), []).append(col)
        if lv != lu:
            incident.setdefault(int(lv), []).append(col)
    for cols in incident.values():
        for i in range(len(cols)):
            for j in range(i + 1, len(cols)):
                A_e[cols[i], cols[j]] = A_e[cols[j], cols[i]] = 1.0

    H_v0 = (g.node_features_at(np.array(node_list, dtype=np.int64), cutoff)
            if n_v else np.zeros((0, g.d_n)))

    return EgoSubgraph(center=center, k=k,
                       node_ids=np.array(node_list, dtype=np.int64),
                       edge_ids=np.array(edge_list, dtype=np.int64),
                       node_hop=np.array(node_hop, dtype=np.int64),
                       edge_hop=np.array(edge_hop, dtype=np.int64),
                       edge_t=edge_t, edge_ends=edge_ends,
                       A_v=A_v, A_e=A_e, T=T, H_v0=H_v0, H_e0=H_e0)


def build_sequence(sub: EgoSubgraph, time_sort: bool = True,
                   include_markers: bool = True, seed: int = 0) -> EgoGraphSequence:
    """Hop-segmented token sequence: markers around time-sorted hop segments.

    Tokens are events of the center's kind.  Within a segment events are
    ordered by (t, global id); ``time_sort=False`` replaces that with a seeded
    shuffle (the "no temporal sorting" ablation).  ``include_markers=False``
    drops the separator tokens (the "no special token" ablation).
    """
    kind = sub.center.kind
    if kind == EDGE:
        hops, ts, gids = sub.edge_hop, sub.edge_t, sub.edge_ids
    else:
        hops, ts = sub.node_hop, np.full(sub.n_nodes, sub.center.t)
        gids = sub.node_ids

    rng = np.random.default_rng(seed) if not time_sort else None
    marker = Token(KHS, None, None, None, None)
    tokens: list[Token] = []
    if include_markers:
        tokens.append(marker)
    for h in range(sub.k + 1):
        members = [i for i in range(len(hops)) if hops[i] == h]
        if h == 0:
            pass  # the center event, already first in local order
        elif time_sort:
            members.sort(key=lambda i: (ts[i], gids[i]))
        else:
            rng.shuffle(members)
        for i in members:
            tokens.append(Token(kind, i, h, float(ts[i]), int(gids[i])))
        if include_markers:
            tokens.append(marker)
    return EgoGraphSequence(tokens=tokens, k=sub.k, subgraph=sub)


def sequence_stats(seq: EgoGraphSequence) -> dict:
    """Token count plus per-hop event counts (CLI inspection surface)."""
    per_hop = [0] * (seq.k + 1)
    for tok in seq.tokens:
        if tok.kind != KHS:
            per_hop[tok.hop] += 1
    return {"token_count": len(seq.tokens), "per_hop_counts": per_hop}

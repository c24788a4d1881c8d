"""Shared fixtures and independent oracles for the test suite.

The oracles here are deliberately naive re-implementations (dense adjacency
BFS, pairwise enumeration) kept separate from the package code paths they
check.
"""

import numpy as np
import pytest
import torch

from dygad.graph import EDGE, NODE, Event, TemporalGraph

torch.set_num_threads(1)


# ---------------------------------------------------------------------------
# random graphs
# ---------------------------------------------------------------------------


def random_graph(rng, n_max=40, m_max=120, d_n=2, d_e=2) -> TemporalGraph:
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    src = rng.integers(0, n, size=m)
    dst = rng.integers(0, n, size=m)
    bump = dst == src
    dst[bump] = (dst[bump] + 1) % n
    t = np.sort(rng.uniform(0, 1000, size=m))
    X = rng.standard_normal((n, d_n))
    feat = rng.standard_normal((m, d_e))
    return TemporalGraph(n, X, src, dst, t, feat, np.zeros(m, dtype=np.int64))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# brute-force time-cutoff BFS oracle (independent of the sampler internals)
# ---------------------------------------------------------------------------


def bfs_edge_oracle(g: TemporalGraph, center: Event, k: int):
    """Hop map over edges: line-graph BFS restricted to t <= center.t.

    Builds the full edge-edge adjacency by pairwise endpoint comparison and
    walks it with a plain frontier loop.  The virtual center is id -1.
    """
    cutoff = center.t
    ok = [e for e in range(g.m) if g.t[e] <= cutoff]
    ends = {e: (int(g.src[e]), int(g.dst[e])) for e in ok}
    cid = -1 if center.ref is None else int(center.ref)
    if cid == -1:
        ends[cid] = (int(center.src), int(center.dst))

    def adjacent(a, b):
        ua, va = ends[a]
        ub, vb = ends[b]
        return len({ua, va} & {ub, vb}) > 0

    hop = {cid: 0}
    frontier = [cid]
    for h in range(1, k + 1):
        nxt = []
        for e in ends:
            if e in hop:
                continue
            if any(adjacent(e, f) for f in frontier):
                nxt.append(e)
        for e in nxt:
            hop[e] = h
        frontier = nxt
        if not frontier:
            break
    return hop


def bfs_node_oracle(g: TemporalGraph, center: Event, k: int):
    """Hop map over nodes: ordinary-graph BFS via edges with t <= center.t."""
    cutoff = center.t
    neigh = {v: set() for v in range(g.n)}
    for e in range(g.m):
        if g.t[e] <= cutoff:
            u, v = int(g.src[e]), int(g.dst[e])
            neigh[u].add(v)
            neigh[v].add(u)
    hop = {int(center.ref): 0}
    frontier = [int(center.ref)]
    for h in range(1, k + 1):
        nxt = sorted({w for v in frontier for w in neigh[v] if w not in hop})
        for w in nxt:
            hop[w] = h
        frontier = nxt
        if not frontier:
            break
    return hop


# ---------------------------------------------------------------------------
# metric enumeration oracles
# ---------------------------------------------------------------------------


def auc_oracle(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos) * len(neg))


def ap_oracle(scores, labels) -> float:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    tp, total = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            tp += 1
            total += tp / rank
    return total / sum(labels)


def f1_oracle(scores, labels):
    best_f1, best_thr = -1.0, None
    for thr in sorted(set(scores)):
        tp = sum(1 for s, y in zip(scores, labels) if s >= thr and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= thr and y == 0)
        fn = sum(1 for s, y in zip(scores, labels) if s < thr and y == 1)
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        if f1 > best_f1:
            best_f1, best_thr = f1, thr
    return best_f1, best_thr

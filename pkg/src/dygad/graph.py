"""Continuous-time dynamic graph data model, ingestion, splitting and injection.

A :class:`TemporalGraph` is a chronologically ordered stream of attributed
edges over a fixed node set, stored columnar (numpy) and immutable after
construction.  Node-level datasets additionally carry a downsampled sensor
series from which time-dependent node features (sliding history windows) are
read.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

EDGE = "edge"
NODE = "node"

GRAPH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TemporalEdge:
    """One timestamped interaction (v_src -> v_dst at time t with feature vector)."""

    id: int
    src: int
    dst: int
    t: float
    feat: np.ndarray
    label: int = 0


@dataclass(frozen=True)
class Event:
    """A node or edge to be scored for anomaly.

    Edge events carry their endpoints so that synthetic (corrupted or
    injected) edges that are not stored in the graph can still be sampled
    around; for those ``ref`` is None.  A node event's ``t`` is the timestamp
    at which the node is evaluated.
    """

    kind: str  # EDGE or NODE
    ref: Optional[int]
    t: float
    feat: np.ndarray
    label: Optional[int] = None
    src: Optional[int] = None
    dst: Optional[int] = None

    @staticmethod
    def from_edge(g: "TemporalGraph", edge_id: int) -> "Event":
        e = g.edge(int(edge_id))
        return Event(EDGE, e.id, e.t, e.feat, e.label, e.src, e.dst)

    @staticmethod
    def virtual_edge(src: int, dst: int, t: float, feat: np.ndarray,
                     label: Optional[int] = None) -> "Event":
        return Event(EDGE, None, float(t), np.asarray(feat, dtype=np.float64),
                     label, int(src), int(dst))

    @staticmethod
    def for_node(node: int, t: float, feat: np.ndarray,
                 label: Optional[int] = None) -> "Event":
        return Event(NODE, int(node), float(t),
                     np.asarray(feat, dtype=np.float64), label)


@dataclass(frozen=True)
class SeriesData:
    """Downsampled multivariate sensor series attached to a node-level graph.

    ``values`` is (steps, n) after normalization, ``times`` the step
    timestamps, ``labels`` the per-step attack flags, ``history`` the length
    of the sliding window used as node features.
    """

    values: np.ndarray
    times: np.ndarray
    labels: np.ndarray
    history: int


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class TemporalGraph:
    """Immutable CTDG: node attributes plus a time-sorted attributed edge stream.

    Invariants enforced at construction: edge endpoints in [0, n), timestamps
    nondecreasing, feature matrices consistent with n and m.
    """

    def __init__(self, n: int, X: np.ndarray, src: np.ndarray, dst: np.ndarray,
                 t: np.ndarray, edge_feat: np.ndarray, edge_label: np.ndarray,
                 series: Optional[SeriesData] = None,
                 has_self_loops: bool = False):
        self.n = int(n)
        self.X = _readonly(np.asarray(X, dtype=np.float64))
        self.src = _readonly(np.asarray(src, dtype=np.int64))
        self.dst = _readonly(np.asarray(dst, dtype=np.int64))
        self.t = _readonly(np.asarray(t, dtype=np.float64))
        self.edge_feat = _readonly(np.asarray(edge_feat, dtype=np.float64))
        self.edge_label = _readonly(np.asarray(edge_label, dtype=np.int64))
        self.series = series
        self.has_self_loops = bool(has_self_loops)
        self._validate()
        self._incidence = None
        self._pairs = None

    # -- construction checks -------------------------------------------------

    def _validate(self) -> None:
        m = self.m
        if self.X.ndim != 2 or self.X.shape[0] != self.n:
            raise DataError(f"node attribute matrix has shape {self.X.shape}, "
                            f"expected ({self.n}, d_n)")
        for name, arr in (("src", self.src), ("dst", self.dst),
                          ("t", self.t), ("edge_label", self.edge_label)):
            if arr.shape != (m,):
                raise DataError(f"{name} has shape {arr.shape}, expected ({m},)")
        if self.edge_feat.ndim != 2 or self.edge_feat.shape[0] != m:
            raise DataError(f"edge feature matrix has shape "
                            f"{self.edge_feat.shape}, expected ({m}, d_e)")
        if m:
            if self.src.min(initial=0) < 0 or self.src.max(initial=0) >= self.n \
                    or self.dst.min(initial=0) < 0 or self.dst.max(initial=0) >= self.n:
                raise DataError("edge endpoint outside [0, n)")
            if np.any(np.diff(self.t) < 0):
                raise DataError("edge timestamps are not nondecreasing")
            if not self.has_self_loops and np.any(self.src == self.dst):
                raise DataError("self-loop present but has_self_loops not set")

    # -- basic accessors -----------------------------------------------------

    @property
    def m(self) -> int:
        return int(self.src.shape[0])

    @property
    def d_n(self) -> int:
        return int(self.X.shape[1])

    @property
    def d_e(self) -> int:
        return int(self.edge_feat.shape[1])

    def edge(self, i: int) -> TemporalEdge:
        if not 0 <= i < self.m:
            raise DataError(f"edge id {i} out of range [0, {self.m})")
        return TemporalEdge(i, int(self.src[i]), int(self.dst[i]),
                            float(self.t[i]), self.edge_feat[i],
                            int(self.edge_label[i]))

    def edge_events(self) -> list[Event]:
        return [Event.from_edge(self, i) for i in range(self.m)]

    # -- incidence index -----------------------------------------------------

    def _build_incidence(self):
        # CSR over (node -> incident edge ids), each node's list sorted by (t, id)
        nodes = np.concatenate([self.src, self.dst])
        eids = np.concatenate([np.arange(self.m), np.arange(self.m)])
        order = np.lexsort((eids, self.t[eids], nodes))
        nodes, eids = nodes[order], eids[order]
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(ptr, nodes + 1, 1)
        np.cumsum(ptr, out=ptr)
        self._incidence = (ptr, eids, self.t[eids])

    def incident_edges(self, node: int, t_max: Optional[float] = None) -> np.ndarray:
        """Edge ids incident to ``node``, time-sorted, optionally cut at t <= t_max."""
        if self._incidence is None:
            self._build_incidence()
        ptr, eids, ets = self._incidence
        lo, hi = ptr[node], ptr[node + 1]
        if t_max is not None:
            hi = lo + np.searchsorted(ets[lo:hi], t_max, side="right")
        return eids[lo:hi]

    def pair_set(self) -> frozenset:
        """Unordered endpoint pairs present in the graph."""
        if self._pairs is None:
            lo = np.minimum(self.src, self.dst)
            hi = np.maximum(self.src, self.dst)
            self._pairs = frozenset(zip(lo.tolist(), hi.tolist()))
        return self._pairs

    def has_pair(self, u: int, v: int) -> bool:
        a, b = (u, v) if u <= v else (v, u)
        return (a, b) in self.pair_set()

    # -- time-dependent node features ------------------------------------------

    def node_features_at(self, node_ids: Sequence[int], t: float) -> np.ndarray:
        """Node feature rows as seen at time ``t``.

        Static graphs return rows of X.  Graphs carrying a sensor series
        return each node's sliding history window ending at the last step
        with timestamp <= t (left-padded with the first value).
        """
        node_ids = np.asarray(node_ids, dtype=np.int64)
        if self.series is None:
            return self.X[node_ids].copy()
        s = self.series
        idx = int(np.searchsorted(s.times, t, side="right")) - 1
        if idx < 0:
            raise DataError(f"time {t} precedes the series start")
        h = s.history
        lo = idx - h + 1
        if lo >= 0:
            win = s.values[lo:idx + 1, node_ids]
        else:
            pad = np.repeat(s.values[0:1, node_ids], -lo, axis=0)
            win = np.concatenate([pad, s.values[:idx + 1, node_ids]], axis=0)
        return np.ascontiguousarray(win.T)

    def node_events(self, step_range: Optional[tuple[int, int]] = None) -> list[Event]:
        """One event per (sensor, downsampled timestep), labelled by the step flag."""
        if self.series is None:
            raise DataError("graph carries no sensor series")
        s = self.series
        lo, hi = step_range if step_range is not None else (0, len(s.times))
        events = []
        for step in range(lo, hi):
            t = float(s.times[step])
            feats = self.node_features_at(np.arange(self.n), t)
            lab = int(s.labels[step])
            for v in range(self.n):
                events.append(Event.for_node(v, t, feats[v], lab))
        return events

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> str:
        """Canonical, byte-stable JSON form (used by the CLI ``ingest`` command)."""
        doc = {
            "version": GRAPH_FORMAT_VERSION,
            "n": self.n,
            "d_n": self.d_n,
            "d_e": self.d_e,
            "nodes": self.X.tolist(),
            "edges": [
                [i, int(self.src[i]), int(self.dst[i]), float(self.t[i]),
                 int(self.edge_label[i]), self.edge_feat[i].tolist()]
                for i in range(self.m)
            ],
        }
        if self.has_self_loops:
            doc["self_loops"] = True
        if self.series is not None:
            doc["series"] = {
                "values": self.series.values.tolist(),
                "times": self.series.times.tolist(),
                "labels": self.series.labels.tolist(),
                "history": self.series.history,
            }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "TemporalGraph":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid graph JSON: {exc}") from exc
        if doc.get("version") != GRAPH_FORMAT_VERSION:
            raise DataError(f"unsupported graph format version {doc.get('version')!r}")
        edges = doc["edges"]
        m = len(edges)
        src = np.array([e[1] for e in edges], dtype=np.int64)
        dst = np.array([e[2] for e in edges], dtype=np.int64)
        t = np.array([e[3] for e in edges], dtype=np.float64)
        label = np.array([e[4] for e in edges], dtype=np.int64)
        feat = (np.array([e[5] for e in edges], dtype=np.float64)
                if m else np.zeros((0, doc["d_e"])))
        series = None
        if "series" in doc:
            s = doc["series"]
            series = SeriesData(np.array(s["values"], dtype=np.float64),
                                np.array(s["times"], dtype=np.float64),
                                np.array(s["labels"], dtype=np.int64),
                                int(s["history"]))
        return TemporalGraph(doc["n"], np.array(doc["nodes"], dtype=np.float64),
                             src, dst, t, feat, label, series=series,
                             has_self_loops=bool(doc.get("self_loops", False)))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path) -> "TemporalGraph":
        return TemporalGraph.from_json(Path(path).read_text())


@dataclass(frozen=True)
class DatasetSplit:
    """Chronological train/test split; train carries only normal (label-0) events."""

    train: TemporalGraph
    test: TemporalGraph
    injection_ratio: float = 0.0
    seed: int = 0


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeStreamSchema:
    """Column layout and load options for delimiter-separated edge streams."""

    src_col: int = 0
    dst_col: int = 1
    rating_col: int = 2
    time_col: int = 3
    delimiter: str = ","
    header: bool = False
    edge_dim: int = 1
    node_dim: int = 1


def load_edge_stream(path, schema: EdgeStreamSchema = EdgeStreamSchema()) -> TemporalGraph:
    """Load a (src, dst, rating, timestamp) text file into a TemporalGraph.

    Node ids are compacted to a dense range (sorted original ids), edges sorted
    by time (stable, so equal-time rows keep file order), the rating min-max
    normalized over the file and zero-padded to ``schema.edge_dim``.  Node
    attributes are all-zero; the model's first projection bias acts as a
    shared learnable node embedding.
    """
    rows = []
    needed = max(schema.src_col, schema.dst_col, schema.rating_col, schema.time_col) + 1
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        for lineno, row in enumerate(reader, start=1):
            if schema.header and lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < needed:
                raise DataError(f"{path}: line {lineno}: expected >= {needed} "
                                f"columns, got {len(row)}")
            try:
                rows.append((int(float(row[schema.src_col])),
                             int(float(row[schema.dst_col])),
                             float(row[schema.rating_col]),
                             float(row[schema.time_col])))
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no edges found")

    raw_src = np.array([r[0] for r in rows], dtype=np.int64)
    raw_dst = np.array([r[1] for r in rows], dtype=np.int64)
    rating = np.array([r[2] for r in rows], dtype=np.float64)
    t = np.array([r[3] for r in rows], dtype=np.float64)

    ids = np.unique(np.concatenate([raw_src, raw_dst]))
    remap = {int(v): i for i, v in enumerate(ids)}
    src = np.array([remap[int(v)] for v in raw_src], dtype=np.int64)
    dst = np.array([remap[int(v)] for v in raw_dst], dtype=np.int64)
    n = len(ids)

    self_loops = int(np.sum(src == dst))
    if self_loops:
        warnings.warn(f"{path}: {self_loops} self-loop edge(s) kept and flagged")

    lo, hi = rating.min(), rating.max()
    norm = (rating - lo) / (hi - lo) if hi > lo else np.zeros_like(rating)
    feat = np.zeros((len(rows), schema.edge_dim), dtype=np.float64)
    feat[:, 0] = norm

    order = np.argsort(t, kind="stable")
    return TemporalGraph(n, np.zeros((n, schema.node_dim)),
                         src[order], dst[order], t[order], feat[order],
                         np.zeros(len(rows), dtype=np.int64),
                         has_self_loops=bool(self_loops))


@dataclass(frozen=True)
class SensorSchema:
    """Column layout and preprocessing options for multivariate sensor series."""

    label_col: int = -1
    sensor_cols: Optional[tuple[int, ...]] = None
    delimiter: str = ","
    header: bool = True
    train_frac: float = 0.5
    history: int = 16
    edge_dim: int = 1


def load_multivariate_series(path, schema: SensorSchema, window: int,
                             topk: int) -> TemporalGraph:
    """Turn a (timesteps x sensors [+ attack flag]) table into a node-level graph.

    The series is median-downsampled over non-overlapping windows of length
    ``window`` (trailing remainder dropped, a window is anomalous when any raw
    step in it is), min-max normalized per sensor with statistics from the
    first ``schema.train_frac`` of downsampled steps, and each sensor is
    connected to its ``topk`` most |Pearson|-correlated peers on the train
    portion.  One node per sensor; node events read sliding history windows
    from the series.
    """
    if window < 1:
        raise DataError("window must be >= 1")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        for lineno, row in enumerate(reader, start=1):
            if schema.header and lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no rows found")
    table = np.asarray(rows, dtype=np.float64)

    label_col = schema.label_col % table.shape[1]
    if schema.sensor_cols is not None:
        sensor_cols = list(schema.sensor_cols)
    else:
        sensor_cols = [c for c in range(table.shape[1]) if c != label_col]
    n = len(sensor_cols)
    if not 1 <= topk < n:
        raise DataError(f"topk must be in [1, {n}), got {topk}")

    values = table[:, sensor_cols]
    labels = (table[:, label_col] != 0).astype(np.int64)

    steps = values.shape[0] // window
    if steps == 0:
        raise DataError(f"{path}: fewer than {window} rows, nothing after downsampling")
    trimmed = values[: steps * window].reshape(steps, window, n)
    down = np.median(trimmed, axis=1)
    down_labels = labels[: steps * window].reshape(steps, window).max(axis=1)

    n_train = max(1, int(math.floor(steps * schema.train_frac)))
    train_part = down[:n_train]
    lo = train_part.min(axis=0)
    hi = train_part.max(axis=0)
    span = hi - lo
    flat = span == 0
    if np.any(flat):
        warnings.warn(f"{path}: {int(flat.sum())} constant sensor(s) on the "
                      "train portion; correlation treated as 0")
    span = np.where(flat, 1.0, span)
    down = (down - lo) / span

    corr = _train_correlations(down[:n_train])
    src_l, dst_l = [], []
    seen = set()
    for i in range(n):
        peers = np.argsort(-corr[i], kind="stable")
        picked = 0
        for j in peers:
            if j == i:
                continue
            key = (min(i, int(j)), max(i, int(j)))
            if key not in seen:
                seen.add(key)
                src_l.append(key[0])
                dst_l.append(key[1])
            picked += 1
            if picked == topk:
                break

    times = np.arange(steps, dtype=np.float64)
    m = len(src_l)
    edge_feat = np.zeros((m, schema.edge_dim), dtype=np.float64)
    for e, (i, j) in enumerate(zip(src_l, dst_l)):
        edge_feat[e, 0] = corr[i, j]
    order = np.arange(m)  # all edges share t=0; keep construction order
    series = SeriesData(_readonly(down), _readonly(times),
                        _readonly(down_labels), schema.history)
    return TemporalGraph(n, np.zeros((n, schema.history)),
                         np.array(src_l, dtype=np.int64)[order],
                         np.array(dst_l, dtype=np.int64)[order],
                         np.zeros(m, dtype=np.float64), edge_feat,
                         np.zeros(m, dtype=np.int64), series=series)


def _train_correlations(train_part: np.ndarray) -> np.ndarray:
    """|Pearson| correlation matrix with zero-variance columns mapped to 0."""
    n = train_part.shape[1]
    sd = train_part.std(axis=0)
    safe = np.where(sd == 0, 1.0, sd)
    z = (train_part - train_part.mean(axis=0)) / safe
    corr = np.abs(z.T @ z) / max(1, train_part.shape[0])
    corr[sd == 0, :] = 0.0
    corr[:, sd == 0] = 0.0
    np.fill_diagonal(corr, 0.0)
    return corr


# ---------------------------------------------------------------------------
# splitting and injection
# ---------------------------------------------------------------------------


def chronological_split(g: TemporalGraph, train_frac: float) -> DatasetSplit:
    """First floor(train_frac * m) edges (by time) to train, rest to test.

    Node-level graphs (with a sensor series) are split over downsampled
    timesteps instead; the static sensor edges are shared by both sides.
    """
    if not 0 < train_frac < 1:
        raise DataError(f"train_frac must be in (0, 1), got {train_frac}")
    if g.series is not None:
        return _split_series(g, train_frac)
    m_train = int(math.floor(g.m * train_frac))
    if m_train == 0 or m_train == g.m:
        raise DataError(f"split at {train_frac} leaves an empty side (m={g.m})")
    train = TemporalGraph(g.n, g.X, g.src[:m_train], g.dst[:m_train],
                          g.t[:m_train], g.edge_feat[:m_train],
                          g.edge_label[:m_train], has_self_loops=g.has_self_loops)
    test = TemporalGraph(g.n, g.X, g.src[m_train:], g.dst[m_train:],
                         g.t[m_train:], g.edge_feat[m_train:],
                         g.edge_label[m_train:], has_self_loops=g.has_self_loops)
    if np.any(train.edge_label == 1):
        raise DataError("train split contains anomalous (label-1) edges")
    return DatasetSplit(train, test)


def _split_series(g: TemporalGraph, train_frac: float) -> DatasetSplit:
    s = g.series
    steps = len(s.times)
    cut = int(math.floor(steps * train_frac))
    if cut == 0 or cut == steps:
        raise DataError(f"split at {train_frac} leaves an empty side (steps={steps})")
    if np.any(s.labels[:cut] == 1):
        raise DataError("train portion of the series contains attack steps")
    train_series = SeriesData(s.values[:cut], s.times[:cut], s.labels[:cut], s.history)
    test_series = SeriesData(s.values, s.times, s.labels, s.history)
    train = TemporalGraph(g.n, g.X, g.src, g.dst, g.t, g.edge_feat,
                          g.edge_label, series=train_series)
    test = TemporalGraph(g.n, g.X, g.src, g.dst, g.t, g.edge_feat,
                         g.edge_label, series=test_series)
    # remember the boundary for test-event enumeration
    test._series_test_start = cut  # type: ignore[attr-defined]
    return DatasetSplit(train, test)


def inject_edge_anomalies(split: DatasetSplit, ratio: float, seed: int,
                          pair_ok=None) -> DatasetSplit:
    """Add ceil(ratio * |test edges|) synthetic anomalous edges to the test side.

    Each injected edge is a uniformly sampled node pair not present anywhere
    in the graph (u != v), timestamped uniformly in the test range, with the
    train-mean edge feature and label 1.  ``pair_ok`` optionally further
    constrains candidate pairs.  Deterministic given ``seed``.
    """
    if not 0 < ratio < 1:
        raise DataError(f"injection ratio must be in (0, 1), got {ratio}")
    train, test = split.train, split.test
    count = int(math.ceil(ratio * test.m))
    rng = np.random.default_rng(seed)

    existing = set(train.pair_set()) | set(test.pair_set())
    n = test.n
    mean_feat = train.edge_feat.mean(axis=0)
    t_lo, t_hi = float(test.t.min()), float(test.t.max())

    new_pairs = []
    attempts = 0
    max_attempts = 1000 * max(count, 1)
    while len(new_pairs) < count:
        if attempts >= max_attempts:
            raise DataError("could not find enough non-existent node pairs "
                            f"after {max_attempts} attempts")
        attempts += 1
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in existing:
            continue
        if pair_ok is not None and not pair_ok(u, v):
            continue
        existing.add(key)
        new_pairs.append((u, v))

    inj_src = np.array([p[0] for p in new_pairs], dtype=np.int64)
    inj_dst = np.array([p[1] for p in new_pairs], dtype=np.int64)
    inj_t = rng.uniform(t_lo, t_hi, size=count)

    src = np.concatenate([test.src, inj_src])
    dst = np.concatenate([test.dst, inj_dst])
    t = np.concatenate([test.t, inj_t])
    feat = np.concatenate([test.edge_feat, np.tile(mean_feat, (count, 1))])
    label = np.concatenate([test.edge_label, np.ones(count, dtype=np.int64)])
    order = np.argsort(t, kind="stable")
    new_test = TemporalGraph(test.n, test.X, src[order], dst[order], t[order],
                             feat[order], label[order],
                             has_self_loops=test.has_self_loops)
    return DatasetSplit(train, new_test, injection_ratio=ratio, seed=seed)


def combined_stream(split: DatasetSplit) -> tuple[TemporalGraph, list[Event]]:
    """Full chronological context (train + test) plus the test events to score.

    Test-time ego-graphs need the training history, so scoring always runs
    against the concatenated stream.  For node-level splits the context is the
    full-series test graph and the events are the post-boundary node events.
    """
    train, test = split.train, split.test
    if train.series is not None:
        cut = getattr(test, "_series_test_start", len(train.series.times))
        events = test.node_events(step_range=(cut, len(test.series.times)))
        return test, events
    src = np.concatenate([train.src, test.src])
    dst = np.concatenate([train.dst, test.dst])
    t = np.concatenate([train.t, test.t])
    feat = np.concatenate([train.edge_feat, test.edge_feat])
    label = np.concatenate([train.edge_label, test.edge_label])
    full = TemporalGraph(train.n, train.X, src, dst, t, feat, label,
                         has_self_loops=train.has_self_loops or test.has_self_loops)
    events = [Event.from_edge(full, i) for i in range(train.m, full.m)]
    return full, events

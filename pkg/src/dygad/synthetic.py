"""Synthetic datasets for desk-scale experiments and the acceptance suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError
from .graph import DatasetSplit, TemporalGraph, inject_edge_anomalies


def community_graph(n: int = 500, m: int = 5000, communities: int = 10,
                    p_intra: float = 0.95, edge_dim: int = 1,
                    seed: int = 0) -> tuple[TemporalGraph, np.ndarray]:
    """CTDG from a community model: most interactions stay inside a community.

    Edge features are mild noise (uninformative on their own), so separating
    injected cross-community pairs from real edges requires structural
    signal.  Returns the graph and the node -> community assignment.
    """
    rng = np.random.default_rng(seed)
    comm = np.arange(n) % communities
    members = [np.flatnonzero(comm == c) for c in range(communities)]

    src = np.empty(m, dtype=np.int64)
    dst = np.empty(m, dtype=np.int64)
    for i in range(m):
        c = int(rng.integers(communities))
        u = int(rng.choice(members[c]))
        if rng.random() < p_intra:
            v = int(rng.choice(members[c]))
            while v == u:
                v = int(rng.choice(members[c]))
        else:
            v = int(rng.integers(n))
            while v == u:
                v = int(rng.integers(n))
        src[i], dst[i] = u, v

    t = np.sort(rng.uniform(0.0, 1e6, size=m))
    feat = rng.uniform(0.0, 1.0, size=(m, edge_dim))
    return (TemporalGraph(n, np.zeros((n, 1)), src, dst, t, feat,
                          np.zeros(m, dtype=np.int64)), comm)


def inject_cross_community(split: DatasetSplit, ratio: float, seed: int,
                           comm: np.ndarray) -> DatasetSplit:
    """Anomaly injection restricted to non-existent cross-community pairs."""
    return inject_edge_anomalies(split, ratio, seed,
                                 pair_ok=lambda u, v: comm[u] != comm[v])


def sensor_series(n_sensors: int = 8, steps: int = 4000,
                  n_anomalies: int = 12, anomaly_len: int = 20,
                  seed: int = 0) -> np.ndarray:
    """Multivariate sine-mixture series with attack windows in the second half.

    Returns a (steps, n_sensors + 1) array whose last column is the binary
    attack flag.  Attacks are level shifts on a random subset of sensors.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(steps)
    base = np.stack([
        np.sin(2 * np.pi * t / rng.uniform(40, 200)) +
        0.5 * np.sin(2 * np.pi * t / rng.uniform(10, 30)) +
        0.1 * rng.standard_normal(steps)
        for _ in range(n_sensors)
    ], axis=1)
    # couple sensors in pairs so the correlation graph is informative
    for i in range(0, n_sensors - 1, 2):
        base[:, i + 1] = 0.7 * base[:, i] + 0.3 * base[:, i + 1]

    labels = np.zeros(steps, dtype=np.int64)
    half = steps // 2
    if n_anomalies * anomaly_len > steps - half:
        raise DataError("anomaly windows do not fit in the test half")
    starts = rng.choice(steps - half - anomaly_len, size=n_anomalies,
                        replace=False) + half
    for s in starts:
        hit = rng.choice(n_sensors, size=max(1, n_sensors // 3), replace=False)
        shift = rng.uniform(1.5, 3.0) * rng.choice([-1.0, 1.0])
        base[s:s + anomaly_len, hit] += shift
        labels[s:s + anomaly_len] = 1
    return np.column_stack([base, labels])


def write_sensor_csv(path, table: np.ndarray, delimiter: str = ",") -> None:
    n = table.shape[1] - 1
    header = delimiter.join([f"s{i}" for i in range(n)] + ["attack"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in table:
            cells = [repr(float(x)) for x in row[:-1]] + [str(int(row[-1]))]
            fh.write(delimiter.join(cells) + "\n")

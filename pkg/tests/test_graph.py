import json

import numpy as np
import pytest

from dygad.errors import DataError
from dygad.graph import (EdgeStreamSchema, SensorSchema, TemporalGraph,
                         chronological_split, combined_stream,
                         inject_edge_anomalies, load_edge_stream,
                         load_multivariate_series)

from conftest import random_graph


def write(tmp_path, text, name="edges.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadEdgeStream:
    def test_three_line_file_sorted(self, tmp_path):
        p = write(tmp_path, "1,2,5,100\n2,3,-1,50\n1,3,2,70\n")
        g = load_edge_stream(p)
        assert g.n == 3 and g.m == 3
        assert g.t.tolist() == [50.0, 70.0, 100.0]
        # ratings -1,2,5 min-max normalized; sorted by t: (-1, 2, 5)
        assert g.edge_feat[:, 0].tolist() == [0.0, 0.5, 1.0]

    def test_non_numeric_row_reports_line(self, tmp_path):
        p = write(tmp_path, "a,b,c,d\n")
        with pytest.raises(DataError, match="line 1"):
            load_edge_stream(p)

    def test_bad_line_number_past_good_rows(self, tmp_path):
        p = write(tmp_path, "1,2,5,100\n1,2,oops,100\n")
        with pytest.raises(DataError, match="line 2"):
            load_edge_stream(p)

    def test_empty_file(self, tmp_path):
        p = write(tmp_path, "")
        with pytest.raises(DataError, match="no edges"):
            load_edge_stream(p)

    def test_short_row(self, tmp_path):
        p = write(tmp_path, "1,2,5\n")
        with pytest.raises(DataError, match="line 1"):
            load_edge_stream(p)

    def test_node_ids_compacted(self, tmp_path):
        p = write(tmp_path, "100,7,1,10\n7,42,2,20\n")
        g = load_edge_stream(p)
        assert g.n == 3
        assert set(g.src.tolist()) | set(g.dst.tolist()) == {0, 1, 2}

    def test_idempotent_and_byte_stable(self, tmp_path):
        p = write(tmp_path, "1,2,5,100\n2,3,-1,50\n1,3,2,70\n")
        a = load_edge_stream(p).to_json()
        b = load_edge_stream(p).to_json()
        assert a == b

    def test_edge_dim_padding(self, tmp_path):
        p = write(tmp_path, "1,2,5,100\n2,3,-1,50\n")
        g = load_edge_stream(p, EdgeStreamSchema(edge_dim=3))
        assert g.d_e == 3
        assert np.all(g.edge_feat[:, 1:] == 0)

    def test_self_loops_flagged(self, tmp_path):
        p = write(tmp_path, "1,1,5,100\n1,2,2,50\n")
        with pytest.warns(UserWarning, match="self-loop"):
            g = load_edge_stream(p)
        assert g.has_self_loops

    def test_header_and_delimiter(self, tmp_path):
        p = write(tmp_path, "s;d;r;t\n1;2;5;100\n")
        g = load_edge_stream(p, EdgeStreamSchema(delimiter=";", header=True))
        assert g.m == 1


class TestGraphInvariants:
    def test_sorted_dense_after_load(self, rng):
        for _ in range(20):
            g = random_graph(rng)
            assert np.all(np.diff(g.t) >= 0)
            assert g.src.max() < g.n and g.dst.max() < g.n

    def test_immutable_arrays(self, rng):
        g = random_graph(rng)
        with pytest.raises(ValueError):
            g.t[0] = -1

    def test_edge_accessor_bounds(self, rng):
        g = random_graph(rng)
        with pytest.raises(DataError):
            g.edge(g.m)

    def test_unsorted_timestamps_rejected(self):
        with pytest.raises(DataError, match="nondecreasing"):
            TemporalGraph(2, np.zeros((2, 1)), np.array([0, 0]),
                          np.array([1, 1]), np.array([5.0, 1.0]),
                          np.zeros((2, 1)), np.zeros(2, dtype=np.int64))

    def test_json_roundtrip(self, rng):
        g = random_graph(rng)
        g2 = TemporalGraph.from_json(g.to_json())
        assert g.to_json() == g2.to_json()


class TestChronologicalSplit:
    def test_half_split(self, rng):
        g = random_graph(rng, n_max=10, m_max=10)
        while g.m != 10:
            g = random_graph(rng, n_max=10, m_max=10)
        split = chronological_split(g, 0.5)
        assert split.train.m == 5 and split.test.m == 5

    def test_floor_split(self):
        g = TemporalGraph(3, np.zeros((3, 1)), np.array([0, 1, 2]),
                          np.array([1, 2, 0]), np.array([1.0, 2.0, 3.0]),
                          np.zeros((3, 1)), np.zeros(3, dtype=np.int64))
        split = chronological_split(g, 0.9)
        assert split.train.m == 2 and split.test.m == 1

    def test_empty_side_rejected(self, rng):
        g = random_graph(rng)
        with pytest.raises(DataError):
            chronological_split(g, 1.0)
        with pytest.raises(DataError):
            chronological_split(g, 1e-9)

    def test_time_ordering_between_sides(self, rng):
        for _ in range(10):
            g = random_graph(rng)
            if g.m < 4:
                continue
            split = chronological_split(g, 0.5)
            assert split.train.t.max() <= split.test.t.min()


class TestInjection:
    def make_split(self, rng, m_test=100):
        g = random_graph(rng, n_max=40, m_max=2 * m_test)
        while g.m < 2 * m_test:
            g = random_graph(rng, n_max=40, m_max=2 * m_test)
        return chronological_split(g, 0.5)

    def test_count_and_labels(self, rng):
        split = self.make_split(rng)
        inj = inject_edge_anomalies(split, 0.05, seed=3)
        added = inj.test.m - split.test.m
        assert added == int(np.ceil(0.05 * split.test.m))
        assert int(inj.test.edge_label.sum()) == added

    def test_no_duplicate_pairs(self, rng):
        split = self.make_split(rng)
        inj = inject_edge_anomalies(split, 0.10, seed=3)
        existing = split.train.pair_set() | split.test.pair_set()
        lab = inj.test.edge_label == 1
        for u, v in zip(inj.test.src[lab], inj.test.dst[lab]):
            assert (min(u, v), max(u, v)) not in existing

    def test_deterministic(self, rng):
        split = self.make_split(rng)
        a = inject_edge_anomalies(split, 0.05, seed=11)
        b = inject_edge_anomalies(split, 0.05, seed=11)
        assert a.test.to_json() == b.test.to_json()

    def test_complete_graph_fails(self):
        # complete graph on 3 nodes, all pairs present in both sides
        src = np.array([0, 0, 1, 0, 0, 1])
        dst = np.array([1, 2, 2, 1, 2, 2])
        t = np.arange(6, dtype=np.float64)
        g = TemporalGraph(3, np.zeros((3, 1)), src, dst, t,
                          np.zeros((6, 1)), np.zeros(6, dtype=np.int64))
        split = chronological_split(g, 0.5)
        with pytest.raises(DataError, match="non-existent"):
            inject_edge_anomalies(split, 0.5, seed=0)

    def test_timestamps_within_test_range_and_sorted(self, rng):
        split = self.make_split(rng)
        inj = inject_edge_anomalies(split, 0.10, seed=5)
        assert np.all(np.diff(inj.test.t) >= 0)
        lab = inj.test.edge_label == 1
        assert inj.test.t[lab].min() >= split.test.t.min()
        assert inj.test.t[lab].max() <= split.test.t.max()

    def test_injected_features_are_train_mean(self, rng):
        split = self.make_split(rng)
        inj = inject_edge_anomalies(split, 0.05, seed=5)
        lab = inj.test.edge_label == 1
        expect = split.train.edge_feat.mean(axis=0)
        assert np.allclose(inj.test.edge_feat[lab], expect)


class TestCombinedStream:
    def test_events_cover_test_edges(self, rng):
        split = self.make(rng)
        full, events = combined_stream(split)
        assert full.m == split.train.m + split.test.m
        assert len(events) == split.test.m
        assert all(ev.label in (0, 1) for ev in events)

    def make(self, rng):
        g = random_graph(rng, n_max=20, m_max=60)
        while g.m < 10:
            g = random_graph(rng, n_max=20, m_max=60)
        return chronological_split(g, 0.5)


SENSOR_CSV = """a,b,c,attack
1.0,1.0,5.0,0
2.0,2.0,4.0,0
3.0,3.0,3.0,0
4.0,4.0,2.0,0
5.0,5.0,1.0,0
6.0,6.0,1.0,0
7.0,7.0,2.0,0
8.0,8.0,3.0,1
"""


class TestMultivariateLoader:
    def test_two_perfectly_correlated_topk1(self, tmp_path):
        p = write(tmp_path, "a,b,attack\n" +
                  "\n".join(f"{i},{i},0" for i in range(1, 9)) + "\n",
                  name="sensors.csv")
        g = load_multivariate_series(p, SensorSchema(history=2), window=1, topk=1)
        assert g.n == 2 and g.m == 1
        assert {int(g.src[0]), int(g.dst[0])} == {0, 1}

    def test_topk_picks_most_correlated(self, tmp_path):
        # corr(0,1)=1 by construction; column 2 is noise-free anti-pattern
        rows = ["a,b,c,attack"]
        vals = [1, 2, 3, 4, 5, 6, 7, 8]
        other = [5, 1, 4, 2, 6, 3, 7, 1]
        for v, o in zip(vals, other):
            rows.append(f"{v},{v},{o},0")
        p = write(tmp_path, "\n".join(rows) + "\n", name="s.csv")
        g = load_multivariate_series(p, SensorSchema(history=2), window=1, topk=1)
        pairs = {(min(a, b), max(a, b)) for a, b in zip(g.src, g.dst)}
        assert (0, 1) in pairs

    def test_window_floor_division(self, tmp_path):
        rows = ["a,b,attack"] + [f"{i},{i},0" for i in range(25)]
        p = write(tmp_path, "\n".join(rows) + "\n", name="s.csv")
        g = load_multivariate_series(p, SensorSchema(history=2), window=10, topk=1)
        assert len(g.series.times) == 2  # trailing remainder dropped

    def test_topk_too_large(self, tmp_path):
        p = write(tmp_path, SENSOR_CSV, name="s.csv")
        with pytest.raises(DataError, match="topk"):
            load_multivariate_series(p, SensorSchema(), window=1, topk=3)

    def test_constant_column_warns(self, tmp_path):
        rows = ["a,b,c,attack"] + [f"{i},{i},1.0,0" for i in range(1, 9)]
        p = write(tmp_path, "\n".join(rows) + "\n", name="s.csv")
        with pytest.warns(UserWarning, match="constant"):
            g = load_multivariate_series(p, SensorSchema(), window=1, topk=1)
        assert g.n == 3

    def test_window_label_any(self, tmp_path):
        p = write(tmp_path, SENSOR_CSV, name="s.csv")
        g = load_multivariate_series(p, SensorSchema(history=2), window=4, topk=1)
        assert g.series.labels.tolist() == [0, 1]

    def test_node_events_and_windows(self, tmp_path):
        p = write(tmp_path, SENSOR_CSV, name="s.csv")
        g = load_multivariate_series(p, SensorSchema(history=3), window=1, topk=1)
        events = g.node_events()
        assert len(events) == 8 * g.n
        first = events[0]
        assert first.feat.shape == (3,)
        # left padding repeats the first value
        assert first.feat[0] == first.feat[1] == first.feat[2]

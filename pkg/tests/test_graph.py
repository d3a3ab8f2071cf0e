import numpy as np
import pytest

from disengraph.graph import (
    DataError,
    degree_probabilities,
    load_dataset,
    sample_neighbors,
    sample_neighbor_table,
    save_dataset,
)
from disengraph.synthetic import graph_from_edges, path_graph, star_graph
from tests.conftest import write_dataset


class TestLoader:
    def test_path_graph_degrees(self, tmp_path):
        d = write_dataset(tmp_path / "p", [(0, 1), (1, 2)], np.eye(3),
                          [(u, "x") for u in range(3)], [(0, "train"), (1, "val"), (2, "test")])
        g = load_dataset(d)
        assert np.allclose(g.adj0.degrees(), [1, 2, 1])

    def test_single_edge_symmetrized(self, tmp_path):
        d = write_dataset(tmp_path / "s", [(0, 1)], np.eye(2),
                          [(0, "a"), (1, "b")], [(0, "train"), (1, "val")])
        g = load_dataset(d)
        assert g.adj0.weight(0, 1) == 1.0 and g.adj0.weight(1, 0) == 1.0

    def test_roundtrip_identical(self, tiny_graph, tmp_path):
        save_dataset(tiny_graph, tmp_path / "copy")
        again = load_dataset(tmp_path / "copy")
        assert again.adj0.equal(tiny_graph.adj0)
        assert np.array_equal(again.features, tiny_graph.features)
        assert np.array_equal(again.labels, tiny_graph.labels)
        assert again.classes == tiny_graph.classes
        for part in ("train", "val", "test"):
            assert np.array_equal(again.splits[part], tiny_graph.splits[part])
        save_dataset(again, tmp_path / "copy2")
        for name in ("edges.tsv", "features.csv", "labels.tsv", "splits.tsv"):
            assert (tmp_path / "copy" / name).read_text() == (tmp_path / "copy2" / name).read_text()

    def test_dangling_node_id_errors(self, tmp_path):
        d = write_dataset(tmp_path / "d", [(0, 9)], np.eye(3),
                          [(0, "a")], [(0, "train")])
        with pytest.raises(DataError, match="out of range"):
            load_dataset(d)

    def test_ragged_features_error(self, tmp_path):
        d = write_dataset(tmp_path / "r", [(0, 1)], np.eye(2), [(0, "a")], [(0, "train")])
        (d / "features.csv").write_text("1.0,2.0\n3.0\n")
        with pytest.raises(DataError, match="features"):
            load_dataset(d)

    def test_overlapping_splits_error(self, tmp_path):
        d = write_dataset(tmp_path / "o", [(0, 1)], np.eye(2), [(0, "a")],
                          [(0, "train"), (0, "val")])
        with pytest.raises(DataError, match="overlapping"):
            load_dataset(d)

    def test_duplicate_edge_error(self, tmp_path):
        d = write_dataset(tmp_path / "dup", [(0, 1), (1, 0)], np.eye(2),
                          [(0, "a")], [(0, "train")])
        with pytest.raises(DataError, match="duplicate"):
            load_dataset(d)

    def test_weight_out_of_range_error(self, tmp_path):
        d = write_dataset(tmp_path / "w", [(0, 1)], np.eye(2), [(0, "a")],
                          [(0, "train")], weights=[1.5])
        with pytest.raises(DataError, match="weight"):
            load_dataset(d)

    def test_self_loops_skipped(self, tmp_path):
        d = write_dataset(tmp_path / "sl", [(0, 0), (0, 1)], np.eye(2),
                          [(0, "a")], [(0, "train")])
        g = load_dataset(d)
        assert g.adj0.weight(0, 0) == 0.0 and g.adj0.edge_count() == 1

    def test_multilabel_detection(self, tmp_path):
        d = write_dataset(tmp_path / "ml", [(0, 1)], np.eye(2),
                          [(0, "a,b"), (1, "b")], [(0, "train"), (1, "val")])
        g = load_dataset(d)
        assert g.multi_label
        assert np.array_equal(g.label_matrix, [[1, 1], [0, 1]])

    def test_adj_as_features(self, tmp_path):
        d = write_dataset(tmp_path / "af", [(0, 1), (1, 2)], np.eye(3),
                          [(u, "x") for u in range(3)], [(0, "train")])
        g = load_dataset(d, adj_as_features=True)
        assert np.array_equal(g.features, g.adj0.to_csr().toarray())

    def test_missing_file_errors(self, tmp_path):
        d = write_dataset(tmp_path / "mf", [(0, 1)], np.eye(2), [(0, "a")], [(0, "train")])
        (d / "features.csv").unlink()
        with pytest.raises(DataError, match="features.csv"):
            load_dataset(d)


class TestSampling:
    def test_small_neighborhood_returned_whole(self):
        g = star_graph(3)
        rng = np.random.default_rng(0)
        batch = sample_neighbors(g, 0, 5, rng)
        assert sorted(batch.ids.tolist()) == [1, 2, 3]

    def test_distinct_neighbors_of_target(self):
        edges = [(0, v) for v in range(1, 101)]
        g = graph_from_edges(101, edges)
        rng = np.random.default_rng(1)
        batch = sample_neighbors(g, 0, 10, rng)
        assert len(batch.ids) == 10
        assert len(set(batch.ids.tolist())) == 10
        assert set(batch.ids.tolist()) <= set(range(1, 101))

    def test_weighted_sampling_law(self):
        # one heavy edge of 0.99 against 99 edges of 1e-4
        weights = [0.99] + [1e-4] * 99
        g = star_graph(100, weights=weights)
        rng = np.random.default_rng(7)
        hits = sum(sample_neighbors(g, 0, 1, rng).ids[0] == 1 for _ in range(10000))
        assert abs(hits / 10000 - 0.99) < 0.02

    def test_isolated_node_empty_batch(self):
        g = graph_from_edges(3, [(0, 1)])
        batch = sample_neighbors(g, 2, 4, np.random.default_rng(0))
        assert len(batch.ids) == 0

    def test_never_returns_nonneighbor_property(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(5, 30))
            edges = set()
            for _ in range(int(rng.integers(4, 60))):
                u, v = rng.integers(0, n, 2)
                if u != v:
                    edges.add((min(u, v), max(u, v)))
            g = graph_from_edges(n, sorted(edges))
            for u in range(n):
                batch = sample_neighbors(g, u, 3, rng)
                for v in batch.ids:
                    assert g.adj.weight(u, int(v)) > 0

    def test_table_shapes_and_mask(self):
        g = path_graph(4)
        idx, mask = sample_neighbor_table(g, 3, np.random.default_rng(0))
        assert idx.shape == (4, 3) and mask.shape == (4, 3)
        assert mask.sum(axis=1).tolist() == [1, 2, 2, 1]


class TestDegreeProbabilities:
    def test_star(self):
        g = star_graph(4)
        p = degree_probabilities(g)
        assert p[0] == pytest.approx(0.5)
        assert np.allclose(p[1:], 0.125)

    def test_regular_uniform(self):
        g = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        assert np.allclose(degree_probabilities(g), 0.25)

    def test_sums_to_one(self):
        g = path_graph(9)
        assert degree_probabilities(g).sum() == pytest.approx(1.0, abs=1e-12)

    def test_empty_graph_errors(self):
        g = graph_from_edges(3, [])
        with pytest.raises(ValueError):
            degree_probabilities(g)

    def test_uses_initial_adjacency(self):
        g = path_graph(3)
        g.adj.set_pair(0, 2, 1.0)  # mutate the refined copy only
        assert np.allclose(degree_probabilities(g), [0.25, 0.5, 0.25])

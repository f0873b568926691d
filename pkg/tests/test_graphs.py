import numpy as np
import pytest

from gfnlab.graphs import (
    AttributedGraph,
    Dataset,
    DatasetMeta,
    Graph,
    StructureError,
    ValidationError,
    degree_one_hot,
    generate_dense_synthetic,
    generate_synthetic_dataset,
    node_degrees,
    normalized_adjacency,
    stratified_kfold,
)


class TestGraph:
    def test_from_edges_symmetrizes_and_dedupes(self):
        g = Graph.from_edges(3, [(0, 1), (1, 0), (0, 1), (1, 2)])
        assert g.edge_count == 2
        np.testing.assert_array_equal(g.neighbors(1), [0, 2])
        np.testing.assert_array_equal(g.neighbors(0), [1])

    def test_self_loops_dropped_with_warning(self):
        with pytest.warns(UserWarning, match="self-loop"):
            g = Graph.from_edges(2, [(0, 0), (0, 1)])
        assert g.edge_count == 1

    def test_endpoint_out_of_range(self):
        with pytest.raises(StructureError):
            Graph.from_edges(2, [(0, 2)])

    def test_empty_graph(self):
        g = Graph.from_edges(4, [])
        assert g.edge_count == 0
        np.testing.assert_array_equal(node_degrees(g), [0, 0, 0, 0])

    def test_degrees(self):
        g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
        np.testing.assert_array_equal(node_degrees(g), [3, 1, 1, 1])


class TestNormalizedAdjacency:
    def test_two_node_path_hand_value(self):
        # one edge, epsilon 1: degrees become 2, every entry is 1/2
        g = Graph.from_edges(2, [(0, 1)])
        at = normalized_adjacency(g).matrix.to_dense()
        np.testing.assert_allclose(at, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_triangle_hand_value(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
        at = normalized_adjacency(g).matrix.to_dense()
        np.testing.assert_allclose(at, np.full((3, 3), 1.0 / 3.0), atol=1e-15)

    def test_isolated_node_gets_identity_row(self):
        g = Graph.from_edges(3, [(0, 1)])
        at = normalized_adjacency(g).matrix.to_dense()
        np.testing.assert_allclose(at[2], [0, 0, 1.0], atol=1e-15)

    def test_symmetry(self, random_graph):
        rng = np.random.default_rng(2)
        for _ in range(20):
            g = random_graph(rng, int(rng.integers(2, 12)))
            at = normalized_adjacency(g).matrix.to_dense()
            np.testing.assert_allclose(at, at.T, atol=1e-15)

    def test_eigenvalues_in_unit_interval(self, random_graph):
        rng = np.random.default_rng(4)
        for _ in range(50):
            g = random_graph(rng, int(rng.integers(2, 12)))
            at = normalized_adjacency(g).matrix.to_dense()
            ev = np.linalg.eigvalsh(at)
            assert ev.min() >= -1 - 1e-9 and ev.max() <= 1 + 1e-9

    def test_epsilon_scales_smoothing(self):
        g = Graph.from_edges(2, [(0, 1)])
        at = normalized_adjacency(g, epsilon=3.0).matrix.to_dense()
        # degrees become 4; off-diagonal 1/4, diagonal 3/4
        np.testing.assert_allclose(at, [[0.75, 0.25], [0.25, 0.75]], atol=1e-15)


def test_degree_one_hot_clamps():
    oh = degree_one_hot(np.array([0, 2, 7]), max_bucket=3)
    assert oh.shape == (3, 4)
    np.testing.assert_array_equal(oh[0], [1, 0, 0, 0])
    np.testing.assert_array_equal(oh[1], [0, 0, 1, 0])
    np.testing.assert_array_equal(oh[2], [0, 0, 0, 1])  # clamped into the top bucket


class TestDataset:
    def test_label_range_enforced(self):
        g = Graph.from_edges(2, [(0, 1)])
        with pytest.raises(StructureError):
            Dataset("d", [AttributedGraph(g, np.ones((2, 1)), 5)], num_classes=2, feature_dim=1)

    def test_feature_dim_enforced(self):
        g = Graph.from_edges(2, [(0, 1)])
        with pytest.raises(StructureError):
            Dataset("d", [AttributedGraph(g, np.ones((2, 2)), 0)], num_classes=1, feature_dim=1)

    def test_feature_row_count_enforced(self):
        g = Graph.from_edges(2, [(0, 1)])
        with pytest.raises(StructureError):
            AttributedGraph(g, np.ones((3, 1)), 0)

    def test_validate_meta(self):
        g = Graph.from_edges(2, [(0, 1)])
        ds = Dataset("d", [AttributedGraph(g, np.ones((2, 1)), 0)], 1, 1,
                     meta=DatasetMeta(expected_graph_count=2))
        with pytest.raises(ValidationError, match="expected 2 graphs"):
            ds.validate_meta()


class TestStratifiedKFold:
    def _dataset_with_labels(self, labels):
        g = Graph.from_edges(2, [(0, 1)])
        graphs = [AttributedGraph(g, np.ones((2, 1)), int(y)) for y in labels]
        return Dataset("d", graphs, num_classes=int(max(labels)) + 1, feature_dim=1)

    def test_partition_is_exact(self):
        ds = self._dataset_with_labels([0] * 30 + [1] * 17)
        plan = stratified_kfold(ds, 5, seed=0)
        seen = np.concatenate([plan.test_indices(f) for f in range(5)])
        np.testing.assert_array_equal(np.sort(seen), np.arange(47))
        for f in range(5):
            assert np.intersect1d(plan.test_indices(f), plan.train_indices(f)).size == 0

    def test_fold_sizes_within_one(self):
        ds = self._dataset_with_labels([0] * 33 + [1] * 14 + [2] * 8)
        plan = stratified_kfold(ds, 4, seed=3)
        sizes = [plan.test_indices(f).size for f in range(4)]
        assert max(sizes) - min(sizes) <= 1

    def test_class_counts_within_one_per_fold(self):
        labels = [0] * 125 + [1] * 63
        ds = self._dataset_with_labels(labels)
        plan = stratified_kfold(ds, 10, seed=1)
        y = ds.labels
        for cls in (0, 1):
            per_fold = [int((y[plan.test_indices(f)] == cls).sum()) for f in range(10)]
            assert max(per_fold) - min(per_fold) <= 1

    def test_188_graph_two_class_split_sizes(self):
        # 125/63 class mix over 10 folds must land on eight 19s and two 18s
        ds = self._dataset_with_labels([0] * 125 + [1] * 63)
        plan = stratified_kfold(ds, 10, seed=0)
        sizes = sorted(plan.test_indices(f).size for f in range(10))
        assert sizes == [18, 18] + [19] * 8

    def test_deterministic_per_seed(self):
        ds = self._dataset_with_labels([0] * 20 + [1] * 20)
        a = stratified_kfold(ds, 5, seed=7).assignments
        b = stratified_kfold(ds, 5, seed=7).assignments
        c = stratified_kfold(ds, 5, seed=8).assignments
        np.testing.assert_array_equal(a, b)
        assert (a != c).any()

    def test_small_class_warns(self):
        ds = self._dataset_with_labels([0] * 20 + [1] * 2)
        with pytest.warns(UserWarning, match="fewer than k"):
            stratified_kfold(ds, 5, seed=0)

    def test_k_below_two_rejected(self):
        ds = self._dataset_with_labels([0, 1])
        with pytest.raises(ValueError):
            stratified_kfold(ds, 1, seed=0)


class TestSyntheticCorpora:
    def test_cycles_vs_stars_structure(self):
        ds = generate_synthetic_dataset(40, seed=1)
        assert len(ds) == 40 and ds.num_classes == 2
        for g in ds.graphs:
            degs = node_degrees(g.graph)
            if g.label == 0:
                assert (degs == 2).all()  # cycle
            else:
                assert degs.max() == g.graph.num_nodes - 1  # star hub

    def test_generation_is_deterministic(self):
        a = generate_synthetic_dataset(10, seed=3)
        b = generate_synthetic_dataset(10, seed=3)
        for ga, gb in zip(a.graphs, b.graphs):
            np.testing.assert_array_equal(ga.graph.indices, gb.graph.indices)

    def test_dense_corpus_edge_ratio(self):
        ds = generate_dense_synthetic(20, seed=2, edge_factor=5)
        for g in ds.graphs:
            assert g.graph.edge_count >= 5 * g.graph.num_nodes

    def test_too_small_corpus_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic_dataset(1, seed=0)

"""Graph data model, degree features, normalized adjacency, fold planning, synthetic corpora."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .sparse import CSRMatrix, from_coo


class DataError(Exception):
    """Base class for dataset construction problems."""


class ParseError(DataError):
    """A required file is missing or cannot be read as the expected format."""


class StructureError(DataError):
    """Indices or shapes are inconsistent with the declared graph structure."""


class ValidationError(DataError):
    """Parsed data disagrees with the dataset's reference statistics."""


@dataclass
class Graph:
    """Undirected graph in compressed-row adjacency form.

    Each undirected edge is stored in both directions; self-loops are never
    stored (they enter normalization only through the epsilon term). Node
    indices are dense in ``[0, num_nodes)``. Instances are immutable.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        if self.indptr.shape != (self.num_nodes + 1,):
            raise StructureError("adjacency indptr length must be num_nodes + 1")
        if self.indices.size % 2 != 0:
            raise StructureError("undirected adjacency must store both edge directions")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.num_nodes):
            raise StructureError("neighbor index out of range")
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def edge_count(self) -> int:
        """Number of undirected edges."""
        return int(self.indices.size) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "Graph":
        """Build a graph from an iterable of (u, v) pairs.

        Edges may appear in one or both directions and may repeat; the result
        is symmetrized and deduplicated. Self-loops are dropped with a warning.
        """
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise StructureError("edges must be pairs of node indices")
        if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
            raise StructureError(
                f"edge endpoint out of range for graph with {num_nodes} nodes"
            )
        loops = arr[:, 0] == arr[:, 1]
        if loops.any():
            warnings.warn(f"dropping {int(loops.sum())} self-loop(s)", stacklevel=2)
            arr = arr[~loops]
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        und = np.unique(np.stack([lo, hi], axis=1), axis=0) if arr.size else arr
        src = np.concatenate([und[:, 0], und[:, 1]])
        dst = np.concatenate([und[:, 1], und[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(num_nodes, indptr, dst)


@dataclass
class AttributedGraph:
    """A graph together with its node feature matrix and class label."""

    graph: Graph
    node_features: np.ndarray
    label: int

    def __post_init__(self):
        self.node_features = np.ascontiguousarray(self.node_features, dtype=np.float64)
        if self.node_features.ndim != 2:
            raise StructureError("node_features must be 2-D")
        if self.node_features.shape[0] != self.graph.num_nodes:
            raise StructureError(
                f"feature rows ({self.node_features.shape[0]}) != num_nodes "
                f"({self.graph.num_nodes})"
            )
        self.node_features.setflags(write=False)
        self.label = int(self.label)


@dataclass
class DatasetMeta:
    """Optional reference statistics used to validate a parsed dataset."""

    expected_graph_count: int | None = None
    expected_class_count: int | None = None
    expected_feature_dim: int | None = None
    avg_nodes: float | None = None
    avg_edges: float | None = None


@dataclass
class Dataset:
    """Labeled collection of attributed graphs sharing one feature schema."""

    name: str
    graphs: list[AttributedGraph]
    num_classes: int
    feature_dim: int
    meta: DatasetMeta = field(default_factory=DatasetMeta)

    def __post_init__(self):
        for g in self.graphs:
            if g.node_features.shape[1] != self.feature_dim:
                raise StructureError("all graphs must share feature_dim")
            if not 0 <= g.label < self.num_classes:
                raise StructureError(f"label {g.label} outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    def validate_meta(self) -> None:
        """Check parsed counts against reference statistics; raise on mismatch."""
        m = self.meta
        if m.expected_graph_count is not None and len(self.graphs) != m.expected_graph_count:
            raise ValidationError(
                f"{self.name}: expected {m.expected_graph_count} graphs, parsed {len(self.graphs)}"
            )
        if m.expected_class_count is not None and self.num_classes != m.expected_class_count:
            raise ValidationError(
                f"{self.name}: expected {m.expected_class_count} classes, parsed {self.num_classes}"
            )
        if m.expected_feature_dim is not None and self.feature_dim != m.expected_feature_dim:
            raise ValidationError(
                f"{self.name}: expected feature_dim {m.expected_feature_dim}, parsed {self.feature_dim}"
            )


@dataclass
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with epsilon-weighted self-loops."""

    matrix: CSRMatrix
    epsilon: float = 1.0


def node_degrees(graph: Graph) -> np.ndarray:
    """Per-node neighbor counts (self-loops excluded by construction)."""
    return np.diff(graph.indptr)


def normalized_adjacency(graph: Graph, epsilon: float = 1.0) -> NormalizedAdjacency:
    """Degree-normalized adjacency: entry (u, v) is (A + eps*I)_uv / sqrt(dt_u * dt_v)
    where dt_i = degree(i) + eps.

    The nonzero pattern is the adjacency pattern plus the full diagonal, and
    the matrix is exactly symmetric.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = graph.num_nodes
    inv_sqrt = 1.0 / np.sqrt(node_degrees(graph) + epsilon)
    src = np.repeat(np.arange(n), np.diff(graph.indptr))
    dst = graph.indices
    rows = np.concatenate([src, np.arange(n)])
    cols = np.concatenate([dst, np.arange(n)])
    vals = np.concatenate([inv_sqrt[src] * inv_sqrt[dst], epsilon * inv_sqrt**2])
    return NormalizedAdjacency(from_coo((n, n), rows, cols, vals), epsilon)


def degree_one_hot(degrees: np.ndarray, max_bucket: int) -> np.ndarray:
    """One-hot encode degrees into ``max_bucket + 1`` buckets, clamping the tail."""
    if max_bucket < 1:
        raise ValueError("max_bucket must be at least 1")
    degrees = np.asarray(degrees, dtype=np.int64)
    out = np.zeros((degrees.size, max_bucket + 1), dtype=np.float64)
    out[np.arange(degrees.size), np.minimum(degrees, max_bucket)] = 1.0
    return out


@dataclass
class FoldPlan:
    """Deterministic stratified fold assignment for cross-validation."""

    k: int
    seed: int
    assignments: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def stratified_kfold(dataset: Dataset, k: int, seed: int) -> FoldPlan:
    """Assign graphs to ``k`` folds, keeping per-fold class counts within one of
    each other and overall fold sizes balanced.

    Classes with fewer than ``k`` members trigger a warning and a best-effort
    assignment (some folds simply receive none of that class).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    labels = dataset.labels
    rng = np.random.default_rng(seed)
    assignments = np.full(len(dataset), -1, dtype=np.int64)
    fold_loads = np.zeros(k, dtype=np.int64)
    for cls in range(dataset.num_classes):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            warnings.warn(
                f"class {cls} has {members.size} graphs, fewer than k={k}; "
                "stratification is best-effort",
                stacklevel=2,
            )
        rng.shuffle(members)
        quota, extra = divmod(members.size, k)
        # The `extra` leftover graphs go to the currently lightest folds.
        fold_order = np.lexsort((np.arange(k), fold_loads))
        counts = np.full(k, quota, dtype=np.int64)
        counts[fold_order[:extra]] += 1
        pos = 0
        for f in fold_order:
            assignments[members[pos : pos + counts[f]]] = f
            pos += counts[f]
        fold_loads += counts
    return FoldPlan(k=k, seed=seed, assignments=assignments)


def _cycle_edges(size: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % size) for i in range(size)]


def _star_edges(size: int) -> list[tuple[int, int]]:
    return [(0, i) for i in range(1, size)]


def generate_synthetic_dataset(num_graphs: int, seed: int) -> Dataset:
    """Offline two-class corpus: cycles (class 0) vs stars (class 1).

    Sizes are drawn uniformly from 4..12 regardless of class, so graph size
    carries no label signal; the degree distribution does (stars have a hub).
    Node features are a single all-ones column.
    """
    if num_graphs < 2:
        raise ValueError("num_graphs must be at least 2")
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        size = int(rng.integers(4, 13))
        label = i % 2
        edges = _cycle_edges(size) if label == 0 else _star_edges(size)
        g = Graph.from_edges(size, edges)
        graphs.append(AttributedGraph(g, np.ones((size, 1)), label))
    return Dataset(name="synthetic", graphs=graphs, num_classes=2, feature_dim=1)


def generate_dense_synthetic(num_graphs: int, seed: int, edge_factor: int = 5) -> Dataset:
    """Edge-dense random corpus for timing runs: every graph has at least
    ``edge_factor`` times more edges than nodes.

    Class 1 graphs are drawn slightly denser than class 0 so the labels are
    weakly learnable, but the corpus exists for benchmarking, not accuracy.
    """
    if num_graphs < 2:
        raise ValueError("num_graphs must be at least 2")
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(num_graphs):
        n = int(rng.integers(24, 41))
        label = i % 2
        target = (edge_factor + label) * n
        iu, ju = np.triu_indices(n, k=1)
        target = min(target, iu.size)
        pick = rng.choice(iu.size, size=target, replace=False)
        g = Graph.from_edges(n, np.stack([iu[pick], ju[pick]], axis=1))
        graphs.append(AttributedGraph(g, np.ones((n, 1)), label))
    return Dataset(name="synthetic-dense", graphs=graphs, num_classes=2, feature_dim=1)

"""Multi-scale propagated node features with an on-disk cache.

For a graph with node features X and normalized adjacency At, the augmented
matrix concatenates column blocks in the fixed order

    [degree, X, At @ X, At^2 @ X, ..., At^K @ X]

where the degree block is one-hot (or raw) node degrees and each propagated
block is computed iteratively, never by materializing powers of At.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .graphs import Dataset, Graph, degree_one_hot, node_degrees, normalized_adjacency
from .sparse import spmm


@dataclass(frozen=True)
class FeatureSpec:
    """Which blocks enter the augmented feature matrix.

    ``K`` is the propagation depth; ``raw_degree`` swaps the one-hot degree
    block for a single raw-degree column.
    """

    use_degree: bool = True
    include_raw: bool = True
    K: int = 3
    epsilon: float = 1.0
    raw_degree: bool = False

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (self.use_degree or self.include_raw or self.K > 0):
            raise ValueError("feature spec selects no blocks")

    def cache_token(self) -> str:
        deg = ("rawdeg" if self.raw_degree else "deg") if self.use_degree else "nodeg"
        raw = "raw" if self.include_raw else "noraw"
        return f"{deg}-{raw}-k{self.K}-eps{self.epsilon:g}"


@dataclass(frozen=True)
class ColumnBlock:
    name: str
    start: int
    width: int


@dataclass
class AugmentedFeatures:
    """Dense per-graph feature matrix plus its ordered column-block schema."""

    matrix: np.ndarray
    blocks: tuple[ColumnBlock, ...]

    @property
    def width(self) -> int:
        return self.matrix.shape[1]

    def block(self, name: str) -> np.ndarray:
        for b in self.blocks:
            if b.name == name:
                return self.matrix[:, b.start : b.start + b.width]
        raise KeyError(f"no block named {name!r}")

    def column_names(self) -> list[str]:
        return [f"{b.name}_{j}" for b in self.blocks for j in range(b.width)]


def augment(graph: Graph, X: np.ndarray, spec: FeatureSpec, degree_cap: int) -> AugmentedFeatures:
    """Build the augmented feature matrix for one graph.

    ``degree_cap`` is the one-hot clamp bucket, normally the dataset-wide
    maximum degree so all graphs share one schema. All arithmetic is float64.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != graph.num_nodes:
        raise ValueError(f"X must be ({graph.num_nodes}, d), got {X.shape}")
    parts: list[np.ndarray] = []
    blocks: list[ColumnBlock] = []

    def push(name: str, mat: np.ndarray) -> None:
        blocks.append(ColumnBlock(name, sum(p.shape[1] for p in parts), mat.shape[1]))
        parts.append(mat)

    if spec.use_degree:
        degs = node_degrees(graph)
        if spec.raw_degree:
            push("deg", degs.astype(np.float64)[:, None])
        else:
            push("deg", degree_one_hot(degs, max(degree_cap, 1)))
    if spec.include_raw:
        push("x", X)
    if spec.K > 0:
        adj = normalized_adjacency(graph, spec.epsilon).matrix
        prop = X
        for k in range(1, spec.K + 1):
            prop = spmm(adj, prop)
            push(f"a{k}x", prop)
    return AugmentedFeatures(np.concatenate(parts, axis=1), tuple(blocks))


def dataset_degree_cap(dataset: Dataset) -> int:
    """Dataset-wide maximum node degree, the one-hot clamp bucket."""
    cap = 0
    for g in dataset.graphs:
        degs = node_degrees(g.graph)
        if degs.size:
            cap = max(cap, int(degs.max()))
    return max(cap, 1)


def default_cache_dir() -> Path:
    env = os.environ.get("GFNLAB_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "gfnlab"


def _cache_path(cache_dir: Path, dataset: Dataset, spec: FeatureSpec, cap: int) -> Path:
    return cache_dir / f"{dataset.name}_{spec.cache_token()}_cap{cap}_n{len(dataset)}.npz"


def precompute_dataset(
    dataset: Dataset,
    spec: FeatureSpec,
    cache_dir: Path | str | None = None,
) -> list[AugmentedFeatures]:
    """Compute augmented features for every graph, reusing the on-disk cache.

    The cache key is (dataset name, spec, degree cap); a corrupt or
    schema-incompatible cache file is recomputed with a warning. Results are
    ordered by graph index.
    """
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cap = dataset_degree_cap(dataset)
    path = _cache_path(cache_dir, dataset, spec, cap)
    if path.is_file():
        try:
            return _load_cache(path, dataset)
        except Exception as exc:  # corrupt cache: recompute below
            warnings.warn(f"feature cache {path} unusable ({exc}); recomputing", stacklevel=2)
    feats = [augment(g.graph, g.node_features, spec, cap) for g in dataset.graphs]
    _store_cache(path, feats)
    return feats


def _store_cache(path: Path, feats: list[AugmentedFeatures]) -> None:
    schema = {
        "blocks": [asdict(b) for b in feats[0].blocks],
        "offsets": np.concatenate([[0], np.cumsum([f.matrix.shape[0] for f in feats])]).tolist(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        schema=np.frombuffer(json.dumps(schema, sort_keys=True).encode(), dtype=np.uint8),
        matrix=np.concatenate([f.matrix for f in feats], axis=0),
    )


def _load_cache(path: Path, dataset: Dataset) -> list[AugmentedFeatures]:
    with np.load(path) as npz:
        schema = json.loads(bytes(npz["schema"]))
        matrix = npz["matrix"]
    blocks = tuple(ColumnBlock(**b) for b in schema["blocks"])
    offsets = schema["offsets"]
    if len(offsets) != len(dataset) + 1 or matrix.dtype != np.float64:
        raise ValueError("cache does not match dataset")
    feats = []
    for i, g in enumerate(dataset.graphs):
        rows = matrix[offsets[i] : offsets[i + 1]]
        if rows.shape[0] != g.graph.num_nodes:
            raise ValueError("cache row count mismatch")
        feats.append(AugmentedFeatures(rows, blocks))
    return feats


def export_csv(dataset: Dataset, feats: list[AugmentedFeatures], out_dir: Path | str) -> list[Path]:
    """Write one CSV per graph with a leading schema comment line."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    digits = max(5, len(str(len(dataset))))
    for i, f in enumerate(feats):
        p = out_dir / f"{dataset.name}_graph_{i:0{digits}d}.csv"
        header = "# " + ",".join(f.column_names())
        with p.open("w") as fh:
            fh.write(header + "\n")
            np.savetxt(fh, f.matrix, delimiter=",", fmt="%.17g")
        written.append(p)
    return written

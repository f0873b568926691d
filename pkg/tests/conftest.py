import numpy as np
import pytest

from gfnlab.graphs import Graph


@pytest.fixture(autouse=True)
def _isolated_feature_cache(tmp_path, monkeypatch):
    """Every test gets its own feature cache so no state leaks between runs."""
    monkeypatch.setenv("GFNLAB_CACHE", str(tmp_path / "feature-cache"))


@pytest.fixture
def random_graph():
    """Factory for Erdos-Renyi style graphs: random_graph(rng, n, p=0.5)."""

    def make(rng: np.random.Generator, n: int, p: float = 0.5) -> Graph:
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < p
        return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1))

    return make


def write_tu_files(directory, name, indicator, edges, graph_labels,
                   node_labels=None, node_attributes=None):
    """Lay out a benchmark directory from python lists of text lines."""
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{name}_graph_indicator.txt").write_text("\n".join(indicator) + "\n")
    (directory / f"{name}_A.txt").write_text("\n".join(edges) + "\n")
    (directory / f"{name}_graph_labels.txt").write_text("\n".join(graph_labels) + "\n")
    if node_labels is not None:
        (directory / f"{name}_node_labels.txt").write_text("\n".join(node_labels) + "\n")
    if node_attributes is not None:
        (directory / f"{name}_node_attributes.txt").write_text("\n".join(node_attributes) + "\n")
    return directory

import numpy as np
import pytest

from perigen.pgraph import Decomposition, PeriodicGraph


def random_decomposition(rng: np.random.Generator, n_max: int = 6, m_max: int = 8) -> Decomposition:
    """Random triple in the image of decompose: bonds are zero iff the
    layout has no edges (an all-zero bond pattern next to a connected
    layout assembles to the same graph as a disconnected one)."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    unit = rng.integers(0, 2, size=(n, n))
    unit = np.triu(unit, 1)
    unit = unit + unit.T
    layout = rng.integers(0, 2, size=(m, m))
    layout = np.triu(layout, 1)
    layout = layout + layout.T
    if layout.any():
        bonds = rng.integers(0, 2, size=(n, n))
        if not bonds.any():
            bonds[rng.integers(0, n), rng.integers(0, n)] = 1
    else:
        bonds = np.zeros((n, n), dtype=np.int64)
    return Decomposition(unit=unit, layout=layout, bonds=bonds)


def graph_from_edges(num_nodes: int, edges) -> PeriodicGraph:
    adj = np.zeros((num_nodes, num_nodes), dtype=np.int64)
    for i, j in edges:
        adj[i, j] = adj[j, i] = 1
    return PeriodicGraph(adjacency=adj)


@pytest.fixture
def two_triangle_bridge() -> PeriodicGraph:
    """Two K3 units joined by one bond: the worked example used across modules."""
    return graph_from_edges(
        6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]
    )

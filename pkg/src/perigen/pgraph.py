"""Periodic-graph algebra.

A periodic graph is m copies of an n-node basic unit plus a shared
inter-unit bond pattern. Under the intrinsic node ordering (unit u owns
indices [u*n, (u+1)*n)), the full adjacency is determined by three small
matrices:

* ``unit``   (n x n)  adjacency of the repeated basic unit,
* ``layout`` (m x m)  adjacency over units (which unit pairs connect),
* ``bonds``  (n x n)  incidence of node pairs bridging every connected
  unit pair (row = node in the lower-indexed unit).

``assemble`` expands the triple into the full adjacency with a closed-form
block construction; ``decompose`` inverts it. Everything here is exact
integer arithmetic on 0/1 matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PeriodicityError(ValueError):
    """Input matrix is not periodic with the requested unit size."""


def _as_binary_matrix(a, name: str) -> np.ndarray:
    a = np.array(a, dtype=np.int64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 entries")
    return a


def _require_symmetric_hollow(a: np.ndarray, name: str) -> None:
    if (a != a.T).any():
        raise ValueError(f"{name} must be symmetric")
    if np.diagonal(a).any():
        raise ValueError(f"{name} must have a zero diagonal")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """The deduplicated triple (unit, layout, bonds) with sizes n, m."""

    unit: np.ndarray
    layout: np.ndarray
    bonds: np.ndarray

    def __post_init__(self):
        unit = _as_binary_matrix(self.unit, "unit")
        layout = _as_binary_matrix(self.layout, "layout")
        bonds = _as_binary_matrix(self.bonds, "bonds")
        _require_symmetric_hollow(unit, "unit")
        _require_symmetric_hollow(layout, "layout")
        if bonds.shape != unit.shape:
            raise ValueError(
                f"bonds shape {bonds.shape} must match unit shape {unit.shape}"
            )
        for name, arr in (("unit", unit), ("layout", layout), ("bonds", bonds)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.unit.shape[0]

    @property
    def m(self) -> int:
        return self.layout.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Decomposition):
            return NotImplemented
        return (
            self.unit.shape == other.unit.shape
            and self.layout.shape == other.layout.shape
            and np.array_equal(self.unit, other.unit)
            and np.array_equal(self.layout, other.layout)
            and np.array_equal(self.bonds, other.bonds)
        )


@dataclass(frozen=True, eq=False)
class PeriodicGraph:
    """A graph as a padded adjacency matrix plus its true node count.

    ``adjacency`` may carry trailing all-zero padding rows/columns;
    ``num_nodes`` is the count of real nodes (padding starts at that
    index). ``n``/``m``/``unit_label``/``decomposition`` are optional
    bookkeeping when the periodic structure is known.
    """

    adjacency: np.ndarray
    num_nodes: int = -1
    unit_label: str | None = None
    n: int | None = None
    m: int | None = None
    decomposition: Decomposition | None = None

    def __post_init__(self):
        adj = _as_binary_matrix(self.adjacency, "adjacency")
        _require_symmetric_hollow(adj, "adjacency")
        num = self.num_nodes if self.num_nodes >= 0 else adj.shape[0]
        if num > adj.shape[0]:
            raise ValueError(
                f"num_nodes {num} exceeds adjacency size {adj.shape[0]}"
            )
        if adj[num:, :].any() or adj[:, num:].any():
            raise ValueError("padding region (index >= num_nodes) must be zero")
        if self.n is not None and self.m is not None and self.n * self.m != num:
            raise ValueError(f"n*m = {self.n * self.m} does not match num_nodes {num}")
        adj.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "num_nodes", num)

    @property
    def stripped(self) -> np.ndarray:
        """Adjacency restricted to real (non-padding) nodes."""
        return self.adjacency[: self.num_nodes, : self.num_nodes]


@dataclass(frozen=True, eq=False)
class StructureMatrices:
    """Constant block matrices used by the assembler for sizes (n, m).

    * ``replicator`` (nm x m): column u marks the nodes of unit u; the
      product replicator @ layout @ replicator.T tiles each layout entry
      over a full n x n block.
    * ``stacker`` (nm x n): m vertically stacked identities; the product
      stacker @ X @ stacker.T tiles X into every n x n block.
    * ``block_ones`` (nm x nm): ones on the m diagonal blocks, equals
      replicator @ replicator.T.
    * ``diag_mask`` / ``upper_mask``: 0/1 masks keeping the diagonal
      blocks resp. the strictly upper-triangular blocks.
    """

    n: int
    m: int
    replicator: np.ndarray = field(init=False)
    stacker: np.ndarray = field(init=False)
    block_ones: np.ndarray = field(init=False)
    diag_mask: np.ndarray = field(init=False)
    upper_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        n, m = self.n, self.m
        if n < 1 or m < 1:
            raise ValueError(f"unit size and unit count must be >= 1, got n={n}, m={m}")
        replicator = np.kron(np.eye(m, dtype=np.int64), np.ones((n, 1), dtype=np.int64))
        stacker = np.tile(np.eye(n, dtype=np.int64), (m, 1))
        block_ones = np.kron(np.eye(m, dtype=np.int64), np.ones((n, n), dtype=np.int64))
        diag_mask = block_ones.copy()
        upper_mask = np.kron(
            np.triu(np.ones((m, m), dtype=np.int64), k=1),
            np.ones((n, n), dtype=np.int64),
        )
        for name, arr in (
            ("replicator", replicator),
            ("stacker", stacker),
            ("block_ones", block_ones),
            ("diag_mask", diag_mask),
            ("upper_mask", upper_mask),
        ):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def build_structure(n: int, m: int) -> StructureMatrices:
    """Build the constant assembler matrices for unit size n and unit count m."""
    return StructureMatrices(n=n, m=m)


def assemble(d: Decomposition) -> PeriodicGraph:
    """Expand a decomposition into the full adjacency matrix.

    The (u, v) off-diagonal n x n block (u < v) equals
    ``layout[u, v] * bonds`` and every diagonal block equals ``unit``;
    the lower blocks follow by symmetry. Exact over integers.
    """
    s = build_structure(d.n, d.m)
    tiled_bonds = s.stacker @ d.bonds @ s.stacker.T
    tiled_layout = s.replicator @ d.layout @ s.replicator.T
    tiled_unit = s.stacker @ d.unit @ s.stacker.T
    upper = s.upper_mask * tiled_bonds
    adjacency = (upper + upper.T) * tiled_layout + s.diag_mask * tiled_unit
    return PeriodicGraph(
        adjacency=adjacency, num_nodes=d.n * d.m, n=d.n, m=d.m, decomposition=d
    )


def decompose(g: PeriodicGraph, n: int) -> Decomposition:
    """Recover (unit, layout, bonds) from an assembled adjacency.

    Requires the intrinsic ordering: unit u occupies indices
    [u*n, (u+1)*n). Raises :class:`PeriodicityError` when the diagonal
    blocks differ or the nonzero off-diagonal blocks are not all equal,
    i.e. the input is not periodic with unit size n.
    """
    if n < 1:
        raise ValueError(f"unit size must be >= 1, got {n}")
    size = g.num_nodes
    if size == 0:
        raise PeriodicityError("cannot decompose an empty graph")
    if size % n != 0:
        raise PeriodicityError(f"graph size {size} is not divisible by unit size {n}")
    m = size // n
    adj = g.stripped
    blocks = adj.reshape(m, n, m, n).swapaxes(1, 2)  # blocks[u, v] is n x n

    unit = blocks[0, 0]
    for u in range(1, m):
        if not np.array_equal(blocks[u, u], unit):
            raise PeriodicityError(f"inconsistent diagonal blocks: unit {u} differs from unit 0")

    layout = np.zeros((m, m), dtype=np.int64)
    bonds = None
    for u in range(m):
        for v in range(u + 1, m):
            block = blocks[u, v]
            if not block.any():
                continue
            layout[u, v] = layout[v, u] = 1
            if bonds is None:
                bonds = block
            elif not np.array_equal(block, bonds):
                raise PeriodicityError(
                    f"inconsistent off-diagonal blocks: block ({u},{v}) differs"
                )
    if bonds is None:
        bonds = np.zeros((n, n), dtype=np.int64)
    return Decomposition(unit=unit, layout=layout, bonds=bonds)


def pad_adjacency(adjacency: np.ndarray, size: int) -> np.ndarray:
    """Zero-pad a square matrix to `size` at the highest indices."""
    adjacency = np.asarray(adjacency, dtype=np.int64)
    cur = adjacency.shape[0]
    if cur > size:
        raise ValueError(f"matrix of size {cur} does not fit padding target {size}")
    out = np.zeros((size, size), dtype=np.int64)
    out[:cur, :cur] = adjacency
    return out


def degrees(g: PeriodicGraph) -> np.ndarray:
    """Degree of each non-padding node."""
    return g.stripped.sum(axis=1)


def avg_clustering(g: PeriodicGraph) -> float:
    """Average clustering coefficient over non-padding nodes.

    Per-node coefficient is triangles(v) / (deg(v) choose 2), defined as
    0 when deg(v) < 2.
    """
    if g.num_nodes == 0:
        raise ValueError("average clustering of an empty graph is undefined")
    adj = g.stripped
    deg = adj.sum(axis=1)
    # diagonal of A^3 counts closed 2-paths through each node, twice per triangle
    tri = np.diagonal(adj @ adj @ adj) / 2.0
    pairs = deg * (deg - 1) / 2.0
    coeffs = np.divide(tri, pairs, out=np.zeros(len(deg)), where=pairs > 0)
    return float(coeffs.mean())


def density(g: PeriodicGraph) -> float:
    """Edge count over the maximum possible, on non-padding nodes."""
    size = g.num_nodes
    if size < 2:
        raise ValueError(f"density needs at least 2 nodes, got {size}")
    edges = g.stripped.sum() / 2
    return float(edges / (size * (size - 1) / 2))


def bfs_canonical_order(g: PeriodicGraph) -> np.ndarray:
    """Canonical node order: degree-aware BFS over non-padding nodes.

    The root is the node of maximum degree (ties to the smallest
    original index); the queue expands each node's neighbors in
    degree-descending order, ties again to the smallest index.
    Remaining components are visited the same way until all nodes
    are ordered.
    """
    size = g.num_nodes
    adj = g.stripped
    deg = adj.sum(axis=1)
    visited = np.zeros(size, dtype=bool)
    order: list[int] = []
    # sorting by (-degree, index) once gives both the root rule and the tie-break
    by_rank = sorted(range(size), key=lambda v: (-deg[v], v))
    for root in by_rank:
        if visited[root]:
            continue
        visited[root] = True
        queue = [root]
        while queue:
            v = queue.pop(0)
            order.append(v)
            nbrs = np.flatnonzero(adj[v])
            nbrs = sorted(nbrs, key=lambda u: (-deg[u], u))
            for u in nbrs:
                if not visited[u]:
                    visited[u] = True
                    queue.append(u)
    return np.asarray(order, dtype=np.int64)


def canonical_adjacency(g: PeriodicGraph) -> np.ndarray:
    """Adjacency relabeled into the BFS canonical order."""
    order = bfs_canonical_order(g)
    return g.stripped[np.ix_(order, order)]

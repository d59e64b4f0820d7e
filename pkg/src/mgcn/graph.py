"""Undirected graphs, the renormalised adjacency, and block-diagonal batching."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .sparse import SparseMatrix


def to_undirected(edges) -> np.ndarray:
    """Canonical undirected edge list: pairs (i, j) with i < j, sorted, no duplicates.

    Self-loops are dropped; normalisation adds them back.
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    e = e[e[:, 0] != e[:, 1]]
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


@dataclass(frozen=True, eq=False)
class Graph:
    """An undirected graph with node features.

    ``node_labels`` carries per-node classes (citation networks) and ``label``
    the single class of the whole graph (graph classification); either may be
    absent.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    node_labels: Optional[np.ndarray] = None
    label: Optional[int] = None

    def __post_init__(self):
        n = int(self.num_nodes)
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise DataError(f"edge endpoint outside [0, {n})")
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", to_undirected(e))
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != n:
            raise DataError(f"features must be {n} x d, got {x.shape}")
        object.__setattr__(self, "features", x)
        if self.node_labels is not None:
            y = np.asarray(self.node_labels, dtype=np.int64)
            if y.shape != (n,):
                raise DataError(f"expected {n} node labels, got {y.shape}")
            object.__setattr__(self, "node_labels", y)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_nodes)

    @cached_property
    def adjacency(self) -> SparseMatrix:
        """Renormalised adjacency, computed once per graph."""
        return renormalized_adjacency(self)

    def permute(self, perm) -> "Graph":
        """Relabel nodes so new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        labels = None if self.node_labels is None else self.node_labels[perm]
        return Graph(self.num_nodes, inv[self.edges], self.features[perm], labels, self.label)


def renormalized_adjacency(g: Graph, self_loops_only_if_isolated: bool = False) -> SparseMatrix:
    """D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.

    With ``self_loops_only_if_isolated`` the identity is added only on nodes
    without neighbours.
    """
    n = g.num_nodes
    i, j = g.edges[:, 0], g.edges[:, 1]
    if self_loops_only_if_isolated:
        loops = np.flatnonzero(g.degrees() == 0)
    else:
        loops = np.arange(n)
    rows = np.concatenate([i, j, loops])
    cols = np.concatenate([j, i, loops])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    inv_sqrt = np.zeros(n)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    return SparseMatrix.from_coo(n, rows, cols, vals, symmetric=True)


@dataclass(frozen=True, eq=False)
class BatchedGraph:
    """Disjoint union of graphs sharing one block-diagonal adjacency."""

    adjacency: SparseMatrix
    features: np.ndarray
    graph_index: np.ndarray
    offsets: np.ndarray
    graph_labels: Optional[np.ndarray] = field(default=None)

    @property
    def num_graphs(self) -> int:
        return int(self.offsets.size - 1)

    @property
    def num_nodes(self) -> int:
        return int(self.features.shape[0])


def batch_graphs(graphs: Sequence[Graph]) -> BatchedGraph:
    if not graphs:
        raise DataError("cannot batch an empty list of graphs")
    d = graphs[0].num_features
    for k, g in enumerate(graphs):
        if g.num_features != d:
            raise DataError(f"graph {k} has {g.num_features} features, expected {d}")
    sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    labels = None
    if all(g.label is not None for g in graphs):
        labels = np.array([g.label for g in graphs], dtype=np.int64)
    return BatchedGraph(
        adjacency=SparseMatrix.block_diag([g.adjacency for g in graphs]),
        features=np.vstack([g.features for g in graphs]),
        graph_index=np.repeat(np.arange(len(graphs)), sizes),
        offsets=offsets,
        graph_labels=labels,
    )

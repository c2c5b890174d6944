"""Graph model, dataset presets, partitioning and connection statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class GraphError(ValueError):
    pass


class EdgeListError(GraphError):
    """Base class for edge-list parse failures."""


class MalformedLineError(EdgeListError):
    pass


class NodeIndexError(EdgeListError):
    pass


class SelfLoopError(EdgeListError):
    pass


class EmptyEdgeListError(EdgeListError):
    pass


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph plus the per-layer feature widths of the GCN run on it.

    ``edges`` is an ``(E, 2)`` int64 array with ``u < v`` on every row, sorted
    lexicographically. ``feature_dims`` is ``[a(1), ..., a(L+1)]`` in elements.
    """

    num_nodes: int
    edges: np.ndarray
    feature_dims: tuple[int, ...]

    def __post_init__(self):
        if self.num_nodes < 1:
            raise GraphError("num_nodes must be positive")
        dims = tuple(int(d) for d in self.feature_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise GraphError(f"feature_dims must hold >= 2 positive ints, got {dims}")
        object.__setattr__(self, "feature_dims", dims)

        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if (e[:, 0] == e[:, 1]).any():
                raise GraphError("self-loops are not allowed")
            if e.min() < 0 or e.max() >= self.num_nodes:
                raise GraphError("edge endpoint out of range")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        object.__setattr__(self, "edges", _freeze(e))

    @property
    def num_layers(self) -> int:
        return len(self.feature_dims) - 1

    @property
    def num_edges(self) -> int:
        """Undirected edge count."""
        return int(self.edges.shape[0])

    @property
    def num_directed_edges(self) -> int:
        return 2 * self.num_edges

    def adjacency(self, dtype=np.int64) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix (no self-loops)."""
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=dtype)
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1
            a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.feature_dims == other.feature_dims
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):
        return hash((self.num_nodes, self.feature_dims, self.edges.tobytes()))


@dataclass(frozen=True)
class DatasetPreset:
    name: str
    num_nodes: int
    num_edges: int  # directed count, as tabulated for the public datasets
    num_features: int
    num_labels: int
    num_layers: int = 2
    hidden_width: int = 16

    @property
    def feature_dims(self) -> tuple[int, ...]:
        hidden = (self.hidden_width,) * (self.num_layers - 1)
        return (self.num_features, *hidden, self.num_labels)

    @property
    def undirected_edges(self) -> int:
        return self.num_edges // 2

    def synthesize(self, seed: int = 0) -> Graph:
        """Uniform random stand-in with the dataset's node/edge/feature counts."""
        return generate_synthetic(self.num_nodes, self.undirected_edges, self.feature_dims, seed)


PRESETS: dict[str, DatasetPreset] = {
    p.name: p
    for p in (
        DatasetPreset("cora", 2708, 10556, 1433, 7),
        DatasetPreset("citeseer", 3327, 9228, 3703, 6),
        DatasetPreset("pubmed", 19717, 88651, 500, 3),
        DatasetPreset("extended-cora", 19793, 130622, 8710, 70),
        DatasetPreset("nell", 65755, 266144, 5414, 210),
    )
}


def preset(name: str) -> DatasetPreset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise GraphError(f"unknown dataset preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_edge_list(path: str | Path, num_nodes: int, feature_dims: Sequence[int]) -> Graph:
    """Read a whitespace-separated ``u v`` edge list (0-indexed, ``#`` comments)."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MalformedLineError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise MalformedLineError(f"{path}:{lineno}: non-integer node index") from None
            if u < 0 or v < 0 or u >= num_nodes or v >= num_nodes:
                raise NodeIndexError(f"{path}:{lineno}: node index out of range [0, {num_nodes})")
            if u == v:
                raise SelfLoopError(f"{path}:{lineno}: self-loop on node {u}")
            pairs.append((u, v))
    if not pairs:
        raise EmptyEdgeListError(f"{path}: no edges")
    return Graph(num_nodes, np.array(pairs, dtype=np.int64), tuple(feature_dims))


def _unrank_pairs(idx: np.ndarray, n: int) -> np.ndarray:
    """Map indices in [0, n(n-1)/2) to pairs (u, v), u < v, in row-major upper-triangle order."""
    idx = idx.astype(np.int64)
    # row u starts at S(u) = u*n - u(u+1)/2
    b = 2 * n - 1
    u = np.floor((b - np.sqrt(float(b) ** 2 - 8.0 * idx)) / 2).astype(np.int64)
    # float rounding can be off by one near row boundaries
    start = u * n - u * (u + 1) // 2
    u = np.where(start > idx, u - 1, u)
    start = u * n - u * (u + 1) // 2
    nxt = (u + 1) * n - (u + 1) * (u + 2) // 2
    u = np.where(idx >= nxt, u + 1, u)
    start = u * n - u * (u + 1) // 2
    v = idx - start + u + 1
    return np.stack([u, v], axis=1)


def generate_synthetic(num_nodes: int, num_edges: int, feature_dims: Sequence[int], seed: int) -> Graph:
    """Uniformly random simple graph with exactly ``num_edges`` undirected edges."""
    total = num_nodes * (num_nodes - 1) // 2
    if num_edges < 0 or num_edges > total:
        raise GraphError(f"cannot place {num_edges} edges on {num_nodes} nodes (max {total})")
    rng = np.random.default_rng(seed)
    idx = rng.choice(total, size=num_edges, replace=False) if num_edges else np.empty(0, np.int64)
    return Graph(num_nodes, _unrank_pairs(np.asarray(idx), num_nodes), tuple(feature_dims))


def canonical_two_ce_graph(feature_dims: Sequence[int] = (4, 2, 2)) -> Graph:
    """8-node illustration: nodes 0-3 and 4-7 form two CEs, 4+2 intra edges, 4 cut edges."""
    edges = [(0, 1), (0, 2), (1, 2), (2, 3), (5, 6), (6, 7), (1, 4), (2, 5), (2, 6), (2, 7)]
    return Graph(8, np.array(edges), tuple(feature_dims))


@dataclass(frozen=True, eq=False)
class Partition:
    k: int
    assignment: np.ndarray
    ce_sizes: tuple[int, ...]
    p1: np.ndarray
    p2: np.ndarray
    intra_edges: np.ndarray = field(repr=False)
    cut_edges: np.ndarray = field(repr=False)

    @property
    def uniform_p1(self) -> float:
        return float(self.p1.mean())

    @property
    def uniform_p2(self) -> float:
        if self.k < 2:
            return 0.0
        off = ~np.eye(self.k, dtype=bool)
        return float(self.p2[off].mean())


def _edge_counts(graph: Graph, assignment: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-CE intra edge counts and symmetric k x k cut-edge counts (zero diagonal)."""
    intra = np.zeros(k, dtype=np.int64)
    cut = np.zeros((k, k), dtype=np.int64)
    if graph.num_edges:
        cu = assignment[graph.edges[:, 0]]
        cv = assignment[graph.edges[:, 1]]
        same = cu == cv
        intra = np.bincount(cu[same], minlength=k).astype(np.int64)
        a, b = cu[~same], cv[~same]
        np.add.at(cut, (a, b), 1)
        cut = cut + cut.T
    return intra, cut


def estimate_probabilities(graph: Graph, assignment: np.ndarray, k: int | None = None):
    """Intra-CE (p1) and inter-CE (p2) connection probabilities for an assignment."""
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (graph.num_nodes,):
        raise GraphError("assignment must give one CE per node")
    if k is None:
        k = int(assignment.max()) + 1
    if assignment.min() < 0 or assignment.max() >= k:
        raise GraphError("assignment refers to a CE outside [0, k)")
    sizes = np.bincount(assignment, minlength=k).astype(np.float64)
    intra, cut = _edge_counts(graph, assignment, k)
    pairs = sizes * (sizes - 1)
    p1 = np.divide(2.0 * intra, pairs, out=np.zeros(k), where=pairs > 0)
    cross = np.outer(sizes, sizes)
    np.fill_diagonal(cross, 0.0)
    p2 = np.divide(cut.astype(np.float64), cross, out=np.zeros((k, k)), where=cross > 0)
    return p1, p2


def contiguous_assignment(num_nodes: int, k: int) -> np.ndarray:
    if not 1 <= k <= num_nodes:
        raise GraphError(f"k={k} outside [1, {num_nodes}]")
    return (np.arange(num_nodes, dtype=np.int64) * k) // num_nodes


def make_partition(graph: Graph, assignment: np.ndarray, k: int) -> Partition:
    assignment = _freeze(np.asarray(assignment, dtype=np.int64).copy())
    p1, p2 = estimate_probabilities(graph, assignment, k)
    intra, cut = _edge_counts(graph, assignment, k)
    sizes = tuple(int(s) for s in np.bincount(assignment, minlength=k))
    return Partition(k, assignment, sizes, _freeze(p1), _freeze(p2), _freeze(intra), _freeze(cut))


def partition_contiguous(graph: Graph, k: int) -> Partition:
    """Node i goes to CE floor(i*k/N): contiguous, size-balanced blocks."""
    return make_partition(graph, contiguous_assignment(graph.num_nodes, k), k)


def communication_volume(graph: Graph, assignment: np.ndarray, per_edge_bits: float, k: int | None = None):
    """Bidirectional per-edge traffic: intra volume per CE and k x k inter volume matrix.

    Every edge carries ``per_edge_bits`` in each direction. The returned inter
    matrix is symmetric; ``inter[i, j]`` is the volume exchanged between CE i and j.
    """
    if per_edge_bits <= 0:
        raise GraphError("per_edge_bits must be positive")
    assignment = np.asarray(assignment, dtype=np.int64)
    if k is None:
        k = int(assignment.max()) + 1
    intra, cut = _edge_counts(graph, assignment, k)
    return 2 * intra * per_edge_bits, 2 * cut * per_edge_bits


def mesh_side(n: int) -> int:
    return math.isqrt(n - 1) + 1 if n > 1 else 1

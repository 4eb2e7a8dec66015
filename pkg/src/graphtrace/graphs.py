"""Undirected lattice graphs that define the in-context tracing task."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import DataError, InvalidSizeError

TOPOLOGIES = ("ring", "square_grid", "hex", "custom")


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    Edges are stored as sorted ``(u, v)`` pairs with ``u < v``, in sorted
    order, so two graphs with the same edge set compare and serialize equal.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    topology: str = "custom"
    shape: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSizeError(f"graph needs at least one node, got n={self.n}")
        if self.topology not in TOPOLOGIES:
            raise DataError(f"unknown topology tag {self.topology!r}")
        canon = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise DataError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DataError(f"edge ({u}, {v}) out of range for n={self.n}")
            pair = (min(u, v), max(u, v))
            if pair in canon:
                raise DataError(f"duplicate edge {pair}")
            canon.add(pair)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], topology="custom", shape=()):
        """Build a graph, silently merging duplicate and reversed pairs."""
        unique = {(min(u, v), max(u, v)) for u, v in edges}
        return cls(n, tuple(sorted(unique)), topology, tuple(shape))

    @cached_property
    def adjacency_lists(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.array([len(x) for x in self.adjacency_lists], dtype=np.int64)

    def neighbors(self, v: int) -> frozenset[int]:
        if not 0 <= v < self.n:
            raise IndexError(f"node {v} out of range for n={self.n}")
        return frozenset(self.adjacency_lists[v])

    def adjacency(self) -> np.ndarray:
        """Dense integer adjacency matrix."""
        a = np.zeros((self.n, self.n), dtype=np.int64)
        if self.edges:
            e = np.asarray(self.edges)
            a[e[:, 0], e[:, 1]] = 1
            a[e[:, 1], e[:, 0]] = 1
        return a

    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    def subgraph(self, nodes: Iterable[int]) -> tuple["Graph", np.ndarray]:
        """Induced subgraph, relabelled to ``0..k-1``; also returns the kept node ids."""
        keep = np.array(sorted(set(int(x) for x in nodes)), dtype=np.int64)
        index = {int(v): i for i, v in enumerate(keep)}
        sub = [(index[u], index[v]) for u, v in self.edges if u in index and v in index]
        return Graph(max(len(keep), 1), tuple(sub), "custom"), keep

    @property
    def graph_id(self) -> str:
        digest = hashlib.sha1(self.to_json().encode()).hexdigest()[:10]
        return f"{self.topology}-n{self.n}-{digest}"

    def to_dict(self) -> dict:
        return {"n": self.n, "topology": self.topology, "edges": [list(e) for e in self.edges]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "Graph":
        try:
            n = int(obj["n"])
            topology = str(obj.get("topology", "custom"))
            edges = tuple((int(u), int(v)) for u, v in obj["edges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed graph JSON: {exc}") from exc
        return cls(n, edges, topology)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"graph file is not valid JSON: {exc}") from exc
        return cls.from_dict(obj)


@dataclass(frozen=True)
class ComponentDecomposition:
    count: int
    membership: np.ndarray
    components: tuple[frozenset[int], ...]

    def sizes(self) -> list[int]:
        return [len(c) for c in self.components]

    def largest(self) -> int:
        return max(self.sizes())


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.max_size = 1 if n else 0
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.max_size = max(self.max_size, self.size[ra])
        self.count -= 1
        return True


def build_ring(n: int) -> Graph:
    if n < 3:
        raise InvalidSizeError(f"ring needs n >= 3, got {n}")
    return Graph.from_edges(n, ((i, (i + 1) % n) for i in range(n)), "ring", (n,))


def build_square_grid(m: int) -> Graph:
    """``m x m`` grid; cell ``(r, c)`` is node ``r*m + c``."""
    if m < 2:
        raise InvalidSizeError(f"square grid needs side m >= 2, got {m}")
    edges = []
    for r in range(m):
        for c in range(m):
            v = r * m + c
            if c + 1 < m:
                edges.append((v, v + 1))
            if r + 1 < m:
                edges.append((v, v + m))
    return Graph.from_edges(m * m, edges, "square_grid", (m, m))


def build_hex(rows: int, cols: int) -> Graph:
    """Brick-wall honeycomb on a ``rows x cols`` array of nodes.

    Every row is a path; cell ``(r, c)`` links down to ``(r+1, c)`` only when
    ``r + c`` is even, which gives maximum degree 3 and hexagonal faces.
    """
    if rows < 2 or cols < 2:
        raise InvalidSizeError(f"hex lattice needs rows, cols >= 2, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows and (r + c) % 2 == 0:
                edges.append((v, v + cols))
    return Graph.from_edges(rows * cols, edges, "hex", (rows, cols))


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``D - A`` as an integer matrix."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def connected_components(g: Graph) -> ComponentDecomposition:
    """Components ordered by their smallest node index."""
    uf = UnionFind(g.n)
    for u, v in g.edges:
        uf.union(u, v)
    groups: dict[int, list[int]] = {}
    for v in range(g.n):
        groups.setdefault(uf.find(v), []).append(v)
    ordered = sorted(groups.values(), key=lambda c: c[0])
    membership = np.empty(g.n, dtype=np.int64)
    for i, comp in enumerate(ordered):
        membership[comp] = i
    return ComponentDecomposition(len(ordered), membership, tuple(frozenset(c) for c in ordered))


def is_connected(g: Graph) -> bool:
    return connected_components(g).count == 1


def neighbors(g: Graph, v: int) -> frozenset[int]:
    return g.neighbors(v)


def build(topology: str, *size: int) -> Graph:
    """Dispatch on a topology name: ``ring n``, ``square_grid m`` or ``hex rows cols``."""
    if topology == "ring":
        return build_ring(*size)
    if topology in ("square_grid", "grid"):
        return build_square_grid(*size)
    if topology == "hex":
        if len(size) == 1:
            return build_hex(size[0], size[0])
        return build_hex(*size)
    raise DataError(f"unknown topology {topology!r}")

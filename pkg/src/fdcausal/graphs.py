"""Graphs with directed and undirected edges: DAGs, skeletons, CPDAGs."""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError


class MixedGraph:
    """Adjacency over labelled nodes with disjoint directed/undirected edge sets.

    Nodes are referred to by integer index; labels are kept for input/output.
    Directed edges are ordered pairs (i, j) meaning i -> j, undirected edges
    unordered pairs.  No self-loops, no parallel edges.
    """

    def __init__(self, labels: list[str]):
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError("node labels must be unique")
        self.labels = list(labels)
        self.directed: set[tuple[int, int]] = set()
        self.undirected: set[frozenset] = set()
        self.meta: dict = {}

    # -- construction -----------------------------------------------------
    @classmethod
    def empty(cls, d: int, labels: list[str] | None = None) -> "MixedGraph":
        return cls(labels or [f"X{i}" for i in range(d)])

    @classmethod
    def complete_undirected(cls, labels: list[str]) -> "MixedGraph":
        g = cls(labels)
        d = len(labels)
        for i in range(d):
            for j in range(i + 1, d):
                g.add_undirected(i, j)
        return g

    @property
    def d(self) -> int:
        return len(self.labels)

    def copy(self) -> "MixedGraph":
        g = MixedGraph(self.labels)
        g.directed = set(self.directed)
        g.undirected = set(self.undirected)
        g.meta = dict(self.meta)
        return g

    # -- edge editing ------------------------------------------------------
    def _check_pair(self, i: int, j: int):
        if i == j:
            raise InvalidArgumentError("self-loops are not allowed")
        if not (0 <= i < self.d and 0 <= j < self.d):
            raise InvalidArgumentError("node index out of range")

    def add_directed(self, i: int, j: int):
        self._check_pair(i, j)
        self.undirected.discard(frozenset((i, j)))
        self.directed.discard((j, i))
        self.directed.add((i, j))

    def add_undirected(self, i: int, j: int):
        self._check_pair(i, j)
        self.directed.discard((i, j))
        self.directed.discard((j, i))
        self.undirected.add(frozenset((i, j)))

    def remove_edge(self, i: int, j: int):
        self.directed.discard((i, j))
        self.directed.discard((j, i))
        self.undirected.discard(frozenset((i, j)))

    def orient(self, i: int, j: int):
        """Turn the undirected edge i - j into i -> j."""
        if frozenset((i, j)) not in self.undirected:
            raise InvalidArgumentError(f"no undirected edge between {i} and {j}")
        self.undirected.discard(frozenset((i, j)))
        self.directed.add((i, j))

    # -- queries -----------------------------------------------------------
    def has_directed(self, i: int, j: int) -> bool:
        return (i, j) in self.directed

    def has_undirected(self, i: int, j: int) -> bool:
        return frozenset((i, j)) in self.undirected

    def adjacent(self, i: int, j: int) -> bool:
        return (
            (i, j) in self.directed
            or (j, i) in self.directed
            or frozenset((i, j)) in self.undirected
        )

    def neighbors(self, i: int) -> list[int]:
        """All nodes connected to i by any edge type."""
        out = set()
        for a, b in self.directed:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        for e in self.undirected:
            if i in e:
                out.add(next(iter(e - {i})))
        return sorted(out)

    def parents(self, j: int) -> list[int]:
        return sorted(a for a, b in self.directed if b == j)

    def children(self, i: int) -> list[int]:
        return sorted(b for a, b in self.directed if a == i)

    def undirected_neighbors(self, i: int) -> list[int]:
        return sorted(next(iter(e - {i})) for e in self.undirected if i in e)

    @property
    def num_edges(self) -> int:
        return len(self.directed) + len(self.undirected)

    def adjacency(self) -> np.ndarray:
        """0/1 matrix: directed i->j sets [i, j]; undirected sets both entries."""
        A = np.zeros((self.d, self.d), dtype=int)
        for i, j in self.directed:
            A[i, j] = 1
        for e in self.undirected:
            i, j = tuple(e)
            A[i, j] = 1
            A[j, i] = 1
        return A

    def topological_order(self) -> list[int] | None:
        """Order of the directed part, or None if it contains a cycle."""
        indeg = {i: 0 for i in range(self.d)}
        for _, j in self.directed:
            indeg[j] += 1
        ready = sorted(i for i, k in indeg.items() if k == 0)
        order = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for child in self.children(node):
                indeg[child] -= 1
                if indeg[child] == 0:
                    ready.append(child)
            ready.sort()
        return order if len(order) == self.d else None

    def directed_part_acyclic(self) -> bool:
        return self.topological_order() is not None

    def as_dag(self) -> "MixedGraph":
        """The graph itself, provided it is a DAG."""
        if self.undirected:
            raise InvalidArgumentError("graph has undirected edges")
        if not self.directed_part_acyclic():
            raise InvalidArgumentError("directed edges contain a cycle")
        return self

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MixedGraph)
            and self.labels == other.labels
            and self.directed == other.directed
            and self.undirected == other.undirected
        )

    def __hash__(self):
        return hash(
            (tuple(self.labels), frozenset(self.directed), frozenset(self.undirected))
        )

    def __repr__(self):
        dirs = ", ".join(f"{self.labels[i]}->{self.labels[j]}" for i, j in sorted(self.directed))
        undirs = ", ".join(
            "-".join(sorted(self.labels[k] for k in e)) for e in self.undirected
        )
        return f"MixedGraph(directed=[{dirs}], undirected=[{undirs}])"

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "nodes": list(self.labels),
            "directed": sorted([self.labels[i], self.labels[j]] for i, j in self.directed),
            "undirected": sorted(
                sorted([self.labels[a] for a in e]) for e in self.undirected
            ),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "MixedGraph":
        g = cls(list(payload["nodes"]))
        index = {name: i for i, name in enumerate(g.labels)}
        for a, b in payload.get("directed", []):
            g.add_directed(index[a], index[b])
        for a, b in payload.get("undirected", []):
            g.add_undirected(index[a], index[b])
        return g


def unshielded_triples(g: MixedGraph):
    """Yield (i, k, j) with i, j both adjacent to k but not to each other, i < j."""
    for k in range(g.d):
        nbrs = g.neighbors(k)
        for ai in range(len(nbrs)):
            for bi in range(ai + 1, len(nbrs)):
                i, j = nbrs[ai], nbrs[bi]
                if not g.adjacent(i, j):
                    yield i, k, j


def colliders(g: MixedGraph) -> set[tuple[int, int, int]]:
    """Unshielded colliders (i, k, j) with i -> k <- j and i, j nonadjacent."""
    out = set()
    for i, k, j in unshielded_triples(g):
        if g.has_directed(i, k) and g.has_directed(j, k):
            out.add((min(i, j), k, max(i, j)))
    return out

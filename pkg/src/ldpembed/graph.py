"""Undirected graph storage and edge-list IO.

Graphs are stored in compressed sparse row form (offset array plus a flat,
per-node-sorted neighbor array). Construction symmetrizes, deduplicates and
drops self-loops, so downstream code can assume a clean simple graph.
Instances are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph in CSR layout.

    neighbor_offsets has length n + 1; the neighbors of v occupy
    neighbors[neighbor_offsets[v]:neighbor_offsets[v + 1]], sorted ascending.
    Isolated nodes are legal.
    """

    n: int
    neighbor_offsets: np.ndarray
    neighbors: np.ndarray
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        degrees = np.diff(self.neighbor_offsets).astype(np.int64)
        object.__setattr__(self, "degrees", degrees)
        self.neighbor_offsets.setflags(write=False)
        self.neighbors.setflags(write=False)
        degrees.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.neighbors.size) // 2

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.neighbor_offsets[v]:self.neighbor_offsets[v + 1]]

    def edges(self) -> np.ndarray:
        """All edges as an (m, 2) array with u < v."""
        u = np.repeat(np.arange(self.n), self.degrees)
        mask = u < self.neighbors
        return np.column_stack([u[mask], self.neighbors[mask]])

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors_of(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < nbrs.size and nbrs[i] == v)

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build a graph from (u, v) pairs.

        Pairs may appear in either orientation; duplicates are merged and
        self-loops dropped. Ids must lie in [0, n).
        """
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= n:
                bad = pairs[(pairs < 0).any(axis=1) | (pairs >= n).any(axis=1)][0]
                raise InputError(f"edge ({bad[0]}, {bad[1]}) out of range for n={n}")
            pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        if pairs.size == 0:
            offsets = np.zeros(n + 1, dtype=np.int64)
            return cls(n=n, neighbor_offsets=offsets,
                       neighbors=np.empty(0, dtype=np.int64))
        both = np.concatenate([pairs, pairs[:, ::-1]])
        both = np.unique(both, axis=0)  # sorts by (source, target) and dedups
        src, dst = both[:, 0], both[:, 1]
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.add.at(offsets, src + 1, 1)
        np.cumsum(offsets, out=offsets)
        return cls(n=n, neighbor_offsets=offsets, neighbors=dst.copy())

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.neighbor_offsets, other.neighbor_offsets)
                and np.array_equal(self.neighbors, other.neighbors))


def load_edge_list(path) -> Graph:
    """Parse an edge-list file into a Graph.

    One edge per line as `u v` separated by any ASCII whitespace. Lines
    starting with `#` are ignored. An optional first data line `n=<count>`
    fixes the node count; otherwise n = 1 + max id.
    """
    path = Path(path)
    edges = []
    n_override = None
    saw_content = False
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not saw_content and line.startswith("n="):
                saw_content = True
                try:
                    n_override = int(line[2:])
                except ValueError:
                    raise ParseError(f"bad node-count header {line!r}", line=lineno)
                continue
            saw_content = True
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected two node ids, got {line!r}", line=lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node id in {line!r}", line=lineno)
            edges.append((u, v))
    if not saw_content:
        raise ParseError(f"{path}: empty edge list")
    if n_override is not None:
        n = n_override
    else:
        n = 1 + max(max(u, v) for u, v in edges) if edges else 0
    return Graph.from_edges(n, edges)


def save_edge_list(g: Graph, path) -> None:
    """Write a Graph in the edge-list format read by load_edge_list.

    The `n=` header is always emitted so isolated trailing nodes survive a
    round trip.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"n={g.n}\n")
        for u, v in g.edges():
            fh.write(f"{u}\t{v}\n")

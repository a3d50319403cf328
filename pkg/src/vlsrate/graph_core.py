"""Bipartite revealed-entry graphs and their row projection.

Row node ``i`` and column node ``j`` are 0-based internally; text files and
user-facing docs use 1-based indices. The bipartite graph has ``2n`` vertices,
numbered ``0..n-1`` for rows and ``n..2n-1`` for columns when a single vertex
index is needed (BFS).

Family conventions on the ``2n`` vertices (r = row, c = column):

line
    alternating path r1-c1-r2-c2-...-rn-cn.
star
    hub r1 adjacent to every column; every other row adjacent to c1 only.
grid2d / grid3d
    the standard square/cubic lattice on ``2n`` sites, sides chosen as the most
    balanced factorization of ``2n`` with every side >= 2. Sites with even
    coordinate sum are rows, odd ones are columns, each class numbered in
    lexicographic order of coordinates.
complete
    K_{n,n}.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    DisconnectedGraphError,
    InvalidInputError,
    UnknownFamilyError,
)

FAMILIES = ("line", "star", "grid2d", "grid3d", "complete")


@dataclass(frozen=True)
class RevealedGraph:
    """Revealed entries of an ``n x n`` matrix as a bipartite graph.

    ``edges`` is stored sorted and deduplicated; every row and every column
    must have at least one revealed entry.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    family: str = field(default="custom", compare=False)

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidInputError(f"n must be positive, got {self.n}")
        edges = tuple(sorted({(int(i), int(j)) for i, j in self.edges}))
        for i, j in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidInputError(f"edge ({i + 1}, {j + 1}) out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "n", int(self.n))
        rdeg, cdeg = self.row_degrees, self.col_degrees
        if rdeg.min() < 1 or cdeg.min() < 1:
            bad_r = [int(i) + 1 for i in np.flatnonzero(rdeg == 0)]
            bad_c = [int(j) + 1 for j in np.flatnonzero(cdeg == 0)]
            raise InvalidInputError(
                f"every row and column needs a revealed entry (empty rows {bad_r}, columns {bad_c})"
            )

    @cached_property
    def rows(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.int64)

    @cached_property
    def cols(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.int64)

    @cached_property
    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        A[self.rows, self.cols] = 1.0
        A.flags.writeable = False
        return A

    @cached_property
    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n)

    @cached_property
    def col_degrees(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n)

    @property
    def max_degree(self) -> int:
        return int(max(self.row_degrees.max(), self.col_degrees.max()))

    def neighbors(self) -> list[list[int]]:
        """Adjacency lists over the ``2n`` bipartite vertices."""
        nbrs: list[list[int]] = [[] for _ in range(2 * self.n)]
        for i, j in self.edges:
            nbrs[i].append(self.n + j)
            nbrs[self.n + j].append(i)
        return nbrs


@dataclass(frozen=True)
class RowProjectionGraph:
    """Rows joined when they share a column; self-loops included."""

    n: int
    edges: frozenset

    @property
    def adjacency(self) -> np.ndarray:
        S = np.zeros((self.n, self.n), dtype=bool)
        for i, k in self.edges:
            S[i, k] = S[k, i] = True
        return S


def _balanced_factorization(size: int, parts: int) -> tuple[int, ...] | None:
    """Most balanced ``size = s1 * ... * s_parts`` with sorted sides >= 2."""
    best = None
    for sides in _factorizations(size, parts, 2):
        key = (sides[-1] - sides[0], sides[-1])
        if best is None or key < best[0]:
            best = (key, sides)
    return None if best is None else best[1]


def _factorizations(size, parts, lo):
    if parts == 1:
        if size >= lo:
            yield (size,)
        return
    s = lo
    while s ** parts <= size:
        if size % s == 0:
            for rest in _factorizations(size // s, parts - 1, s):
                yield (s,) + rest
        s += 1


def lattice_sides(family: str, n: int) -> tuple[int, ...]:
    parts = {"grid2d": 2, "grid3d": 3}[family]
    sides = _balanced_factorization(2 * n, parts)
    if sides is None:
        raise DimensionError(
            f"{family} needs 2n = {2 * n} to factor into {parts} sides >= 2"
        )
    return sides


def _lattice_edges(sides: tuple[int, ...]) -> list[tuple[int, int]]:
    sites = list(itertools.product(*(range(s) for s in sides)))
    evens = [s for s in sites if sum(s) % 2 == 0]
    odds = [s for s in sites if sum(s) % 2 == 1]
    row_id = {s: k for k, s in enumerate(evens)}
    col_id = {s: k for k, s in enumerate(odds)}
    edges = []
    for s in evens:
        for axis, side in enumerate(sides):
            for step in (-1, 1):
                c = list(s)
                c[axis] += step
                if 0 <= c[axis] < side:
                    edges.append((row_id[s], col_id[tuple(c)]))
    return edges


def generate_family(family: str, n: int) -> RevealedGraph:
    n = int(n)
    if family not in FAMILIES:
        raise UnknownFamilyError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if n < 1:
        raise InvalidInputError(f"n must be positive, got {n}")
    if family == "line":
        edges = [(i, i) for i in range(n)] + [(i + 1, i) for i in range(n - 1)]
    elif family == "star":
        edges = [(0, j) for j in range(n)] + [(i, 0) for i in range(1, n)]
    elif family == "complete":
        edges = [(i, j) for i in range(n) for j in range(n)]
    else:
        edges = _lattice_edges(lattice_sides(family, n))
    return RevealedGraph(n, tuple(edges), family=family)


def _bfs(nbrs, source):
    dist = [-1] * len(nbrs)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in nbrs[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def is_connected(g: RevealedGraph) -> bool:
    return min(_bfs(g.neighbors(), 0)) >= 0


def graph_stats(g: RevealedGraph) -> tuple[int, int]:
    """Return ``(max_degree, diameter)`` over all ``2n`` vertices."""
    nbrs = g.neighbors()
    diameter = 0
    for v in range(2 * g.n):
        dist = _bfs(nbrs, v)
        if min(dist) < 0:
            raise DisconnectedGraphError("diameter is undefined on a disconnected graph")
        diameter = max(diameter, max(dist))
    return g.max_degree, diameter


def project_rows(g: RevealedGraph) -> RowProjectionGraph:
    by_col: list[list[int]] = [[] for _ in range(g.n)]
    for i, j in g.edges:
        by_col[j].append(i)
    edges = set()
    for members in by_col:
        for a in members:
            for c in members:
                edges.add((min(a, c), max(a, c)))
    return RowProjectionGraph(g.n, frozenset(edges))


def read_edge_list(path) -> RevealedGraph:
    """Parse ``n <value>`` followed by 1-based ``i j`` lines."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InvalidInputError(f"{path}: empty edge-list file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise InvalidInputError(f"{path}: first line must be 'n <value>'")
    try:
        n = int(head[1])
        edges = []
        for ln in lines[1:]:
            i, j = ln.split()
            edges.append((int(i) - 1, int(j) - 1))
    except ValueError as exc:
        raise InvalidInputError(f"{path}: malformed edge line ({exc})") from None
    return RevealedGraph(n, tuple(edges))


def format_edge_list(g: RevealedGraph) -> str:
    out = [f"n {g.n}"]
    out += [f"{i + 1} {j + 1}" for i, j in g.edges]
    return "\n".join(out) + "\n"


def write_edge_list(g: RevealedGraph, path) -> None:
    Path(path).write_text(format_edge_list(g))

"""Sparse directed trust graphs.

A :class:`TrustGraph` keeps two things per agent: the set of structural
neighbours (who can exchange ratings) and the direct trust weight towards
each of them. A neighbour with weight 0 is still a neighbour, which is what
lets a freshly generated simulation graph pass ratings around before any
trust exists.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphFormatError(ValueError):
    """Raised when an edge-list file violates the graph invariants."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class TrustGraph:
    """Directed graph with direct-trust weights in [0, 1].

    Rows are stored as ``{neighbour: weight}`` dicts. Self-loops are
    rejected. Weight-0 entries are kept as structural neighbours only and
    are not reported by :meth:`edges`.
    """

    def __init__(self, n_agents: int):
        if n_agents < 0:
            raise ValueError("n_agents must be non-negative")
        self.n_agents = int(n_agents)
        self._rows: list[dict[int, float]] = [{} for _ in range(self.n_agents)]

    def _check_index(self, i):
        if not 0 <= i < self.n_agents:
            raise IndexError(f"agent {i} out of range [0, {self.n_agents})")

    def add_edge(self, i: int, j: int, w: float) -> "TrustGraph":
        """Set T_ij = w, making j a structural neighbour of i."""
        self._check_index(i)
        self._check_index(j)
        if i == j:
            raise ValueError(f"self-loop ({i}, {i}) is not allowed")
        w = float(w)
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"trust weight {w} outside [0, 1]")
        self._rows[i][j] = w
        return self

    def add_neighbour(self, i: int, j: int) -> "TrustGraph":
        """Make j a structural neighbour of i without touching its weight."""
        self._check_index(i)
        self._check_index(j)
        if i == j:
            raise ValueError(f"self-loop ({i}, {i}) is not allowed")
        self._rows[i].setdefault(j, 0.0)
        return self

    def remove_neighbour(self, i: int, j: int) -> "TrustGraph":
        self._rows[i].pop(j, None)
        return self

    def weight(self, i: int, j: int) -> float:
        return self._rows[i].get(j, 0.0)

    def neighbours(self, i: int) -> list[int]:
        """Structural out-neighbours N_i in ascending order."""
        return sorted(self._rows[i])

    def has_neighbour(self, i: int, j: int) -> bool:
        return j in self._rows[i]

    def edges(self):
        """Yield ``(i, j, w)`` for every stored positive weight."""
        for i, row in enumerate(self._rows):
            for j in sorted(row):
                if row[j] > 0.0:
                    yield i, j, row[j]

    @property
    def n_edges(self) -> int:
        return sum(1 for row in self._rows for w in row.values() if w > 0.0)

    @property
    def n_structural(self) -> int:
        return sum(len(row) for row in self._rows)

    def out_degrees(self) -> np.ndarray:
        return np.array([len(row) for row in self._rows], dtype=np.int64)

    def mean_degree(self) -> float:
        if self.n_agents == 0:
            return 0.0
        return self.n_structural / self.n_agents

    def copy(self) -> "TrustGraph":
        g = TrustGraph(self.n_agents)
        g._rows = [dict(row) for row in self._rows]
        return g

    def to_csr(self):
        """Structural edges as CSR arrays ``(indptr, indices, weights)``.

        Column indices are sorted within each row, and weight-0 structural
        entries are included.
        """
        indptr = np.zeros(self.n_agents + 1, dtype=np.int64)
        indices = []
        weights = []
        for i, row in enumerate(self._rows):
            cols = sorted(row)
            indices.extend(cols)
            weights.extend(row[j] for j in cols)
            indptr[i + 1] = indptr[i] + len(cols)
        return (
            indptr,
            np.asarray(indices, dtype=np.int64),
            np.asarray(weights, dtype=np.float64),
        )

    @classmethod
    def from_csr(cls, n_agents, indptr, indices, weights) -> "TrustGraph":
        g = cls(n_agents)
        for i in range(n_agents):
            for k in range(indptr[i], indptr[i + 1]):
                g.add_edge(i, int(indices[k]), float(weights[k]))
        return g

    def weight_matrix(self) -> sp.csr_matrix:
        """n x n CSR matrix of trust weights; zero weights are not stored."""
        indptr, indices, weights = self.to_csr()
        m = sp.csr_matrix(
            (weights, indices, indptr), shape=(self.n_agents, self.n_agents)
        )
        m.eliminate_zeros()
        return m

    def structure_matrix(self) -> sp.csr_matrix:
        """n x n CSR 0/1 adjacency of structural neighbours."""
        indptr, indices, _ = self.to_csr()
        return sp.csr_matrix(
            (np.ones(len(indices)), indices, indptr),
            shape=(self.n_agents, self.n_agents),
        )

    def __eq__(self, other):
        if not isinstance(other, TrustGraph):
            return NotImplemented
        return self.n_agents == other.n_agents and self._rows == other._rows

    def __repr__(self):
        return (
            f"TrustGraph(n_agents={self.n_agents}, "
            f"structural={self.n_structural}, weighted={self.n_edges})"
        )


@dataclass(frozen=True)
class RandomGraphSpec:
    n_agents: int
    mean_degree: float
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("a random graph needs at least 2 agents")
        if self.mean_degree <= 0:
            raise ValueError("mean_degree must be positive")
        # d = n - 1 is the complete graph (p = 1)
        if self.mean_degree > self.n_agents - 1:
            raise ValueError("mean_degree must not exceed n_agents - 1")

    @property
    def edge_probability(self) -> float:
        return self.mean_degree / (self.n_agents - 1)


def generate_random_graph(spec: RandomGraphSpec) -> TrustGraph:
    """Erdos-Renyi G(n, p) with p = d / (n - 1).

    Each undirected pair becomes two directed structural edges with weight 0.
    """
    n = spec.n_agents
    rng = np.random.default_rng(spec.seed)
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < spec.edge_probability
    g = TrustGraph(n)
    for i, j in zip(iu[mask].tolist(), ju[mask].tolist()):
        g._rows[i][j] = 0.0
        g._rows[j][i] = 0.0
    return g


def strongly_connected_components(g: TrustGraph) -> list[set[int]]:
    """SCCs of the digraph of positive-weight edges.

    Components are ordered by decreasing size, ties broken by smallest member.
    """
    if g.n_agents == 0:
        return []
    _, labels = connected_components(
        g.weight_matrix(), directed=True, connection="strong"
    )
    comps: dict[int, set[int]] = {}
    for agent, label in enumerate(labels.tolist()):
        comps.setdefault(label, set()).add(agent)
    return sorted(comps.values(), key=lambda c: (-len(c), min(c)))


def load_edgelist(path, n_agents: int | None = None) -> TrustGraph:
    """Read ``truster<TAB>trustee<TAB>weight`` lines into a graph.

    Blank lines and lines starting with ``#`` are skipped. When
    ``n_agents`` is not given it is one more than the largest id seen.
    """
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise GraphFormatError(path, lineno, "expected 3 tab-separated fields")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(path, lineno, "could not parse ids/weight") from None
            if i < 0 or j < 0:
                raise GraphFormatError(path, lineno, "ids must be non-negative")
            if i == j:
                raise GraphFormatError(path, lineno, "self-loop")
            if not 0.0 <= w <= 1.0:
                raise GraphFormatError(path, lineno, f"weight {w} outside [0, 1]")
            records.append((lineno, i, j, w))

    max_id = max((max(i, j) for _, i, j, _ in records), default=-1)
    if n_agents is None:
        n_agents = max_id + 1
    elif max_id >= n_agents:
        bad = next(r for r in records if max(r[1], r[2]) >= n_agents)
        raise GraphFormatError(path, bad[0], f"id exceeds n_agents={n_agents}")
    g = TrustGraph(n_agents)
    for _, i, j, w in records:
        g.add_edge(i, j, w)
    return g


def save_edgelist(g: TrustGraph, path, include_zero: bool = True):
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(g.n_agents):
            for j in g.neighbours(i):
                w = g.weight(i, j)
                if w > 0.0 or include_zero:
                    fh.write(f"{i}\t{j}\t{w!r}\n")

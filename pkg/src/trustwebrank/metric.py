"""TrustWebRank indirect trust and related matrix computations.

Indirect trust solves ``T~ = S + beta * S @ T~`` where ``S`` is the
row-normalised direct trust. Three interchangeable strategies are provided:

* :func:`indirect_trust_exact` -- dense linear solve of ``(I - beta S) T~ = S``
* :func:`indirect_trust_iterative` -- fixed-point (Jacobi) iteration
* :func:`indirect_trust_truncated` -- first ``L`` terms of the walk series,
  row by row, for selected source agents only

For row-stochastic-or-zero ``S`` every entry of ``T~`` lies in
``[0, 1 / (1 - beta)]`` and the tail after ``L`` terms is at most
``beta**L / (1 - beta)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import kernels
from .graph import TrustGraph

DEFAULT_BETA = 0.8
DENSE_THRESHOLD = 2000
DROP_TOL = 1e-9


class DenseLimitError(ValueError):
    """Raised when the exact solver is asked for more agents than it allows."""


@dataclass
class RowNormalizedMatrix:
    """Row-stochastic-or-zero matrix on a structural sparsity pattern.

    ``mode`` records how zero rows were treated (``strict`` / ``bootstrap``
    for direct trust, ``neighbours`` / ``reach`` for normalised indirect
    trust). ``zero_row[i]`` is True when row i had nothing to normalise.
    """

    values: sp.csr_matrix
    structure: sp.csr_matrix
    zero_row: np.ndarray
    mode: str

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.values.sum(axis=1)).ravel()

    def toarray(self) -> np.ndarray:
        return self.values.toarray()

    def row(self, i):
        """``(columns, values)`` of the stored entries of row i."""
        lo, hi = self.values.indptr[i], self.values.indptr[i + 1]
        return self.values.indices[lo:hi], self.values.data[lo:hi]


@dataclass
class IndirectTrustMatrix:
    """Result of an indirect-trust computation plus solver metadata."""

    values: np.ndarray | sp.csr_matrix
    beta: float
    strategy: str
    structure: sp.csr_matrix
    residual: float = float("nan")
    iterations: int | None = None
    walk_cutoff: int | None = None
    converged: bool = True
    truncation_bound: float = 0.0
    source_rows: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def is_dense(self) -> bool:
        return isinstance(self.values, np.ndarray)

    def toarray(self) -> np.ndarray:
        if self.is_dense:
            return self.values
        return self.values.toarray()

    def tocsr(self) -> sp.csr_matrix:
        if self.is_dense:
            return sp.csr_matrix(self.values)
        return self.values

    def row(self, i):
        """``(columns, values)`` of non-zero entries in row i."""
        if self.is_dense:
            r = self.values[i]
            cols = np.flatnonzero(r)
            return cols, r[cols]
        lo, hi = self.values.indptr[i], self.values.indptr[i + 1]
        return self.values.indices[lo:hi], self.values.data[lo:hi]


@dataclass
class CentralityVector:
    c: np.ndarray
    beta: float
    iterations: int
    residual: float


@dataclass
class NaiveRecursionReport:
    """Outcome of power-iterating ``V <- S V``.

    ``degeneracy`` is one of ``constant_columns`` (every agent trusts each
    agent equally), ``vanishing`` (all trust dies out), ``oscillating``
    (periodic, no limit), ``fixed_point`` (some other limit) or
    ``not_converged``.
    """

    converged: bool
    iterations: int
    degeneracy: str
    column_variance: float
    variance_trace: list = field(default_factory=list)
    final: np.ndarray | None = None


def _check_beta(beta):
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta={beta} outside [0, 1)")


# -- normalisation ----------------------------------------------------------


def normalize_csr(indptr, indices, weights, n, mode="strict") -> RowNormalizedMatrix:
    """Row-normalise structural CSR arrays (weights may contain zeros)."""
    if mode not in ("strict", "bootstrap"):
        raise ValueError(f"unknown normalisation mode {mode!r}")
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    degree = np.diff(indptr)
    rows = np.repeat(np.arange(n), degree)
    sums = np.bincount(rows, weights=weights, minlength=n)
    zero = sums <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(zero[rows], 0.0, weights / sums[rows])
    if mode == "bootstrap":
        uniform = 1.0 / np.maximum(degree, 1)
        vals = np.where(zero[rows], uniform[rows], vals)
    structure = sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=(n, n))
    values = sp.csr_matrix((vals, indices, indptr), shape=(n, n))
    values.eliminate_zeros()
    return RowNormalizedMatrix(values=values, structure=structure, zero_row=zero, mode=mode)


def normalize_direct(g: TrustGraph, mode: str = "strict") -> RowNormalizedMatrix:
    """S_ij = T_ij / sum_{k in N_i} T_ik.

    Rows whose trust sums to zero are flagged. In ``strict`` mode they stay
    zero; in ``bootstrap`` mode they become uniform over the structural
    neighbours (still zero for an agent with no neighbours).
    """
    indptr, indices, weights = g.to_csr()
    return normalize_csr(indptr, indices, weights, g.n_agents, mode)


def normalize_indirect(
    tt: IndirectTrustMatrix, mode: str = "neighbours", drop_tol: float = DROP_TOL
) -> RowNormalizedMatrix:
    """Row-normalise indirect trust into S~.

    ``neighbours`` keeps only the structural neighbours N_i and divides by
    their indirect-trust total. ``reach`` keeps every agent j != i with
    T~_ij > drop_tol and divides by that total instead.
    """
    n = tt.n
    if mode == "neighbours":
        m = tt.structure.multiply(tt.values)
        m = sp.csr_matrix(m)
    elif mode == "reach":
        m = tt.tocsr().copy()
        m.data[m.data <= drop_tol] = 0.0
        m.setdiag(0.0)
        m = sp.csr_matrix(m)
    else:
        raise ValueError(f"unknown indirect normalisation mode {mode!r}")
    m.eliminate_zeros()
    m.sort_indices()
    sums = np.asarray(m.sum(axis=1)).ravel()
    zero = sums <= 0.0
    scale = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, sums))
    values = sp.csr_matrix(sp.diags(scale) @ m)
    values.eliminate_zeros()
    return RowNormalizedMatrix(values=values, structure=tt.structure, zero_row=zero, mode=mode)


# -- indirect trust ---------------------------------------------------------


def identity_residual(S: RowNormalizedMatrix, T, beta: float) -> float:
    """max_ij |T - S - beta S T|."""
    Sv = S.values
    if sp.issparse(T):
        defect = T - Sv - beta * (Sv @ T)
        defect = sp.csr_matrix(defect)
        return float(np.abs(defect.data).max()) if defect.nnz else 0.0
    defect = T - Sv.toarray() - beta * (Sv @ T)
    return float(np.abs(defect).max()) if defect.size else 0.0


def indirect_trust_exact(
    S: RowNormalizedMatrix, beta: float = DEFAULT_BETA, dense_threshold: int = DENSE_THRESHOLD
) -> IndirectTrustMatrix:
    """T~ = (I - beta S)^-1 S by one dense LU factorisation."""
    _check_beta(beta)
    n = S.n
    if n > dense_threshold:
        raise DenseLimitError(
            f"{n} agents exceeds dense_threshold={dense_threshold}; "
            "use the iterative or truncated strategy"
        )
    Sd = S.toarray()
    if beta == 0.0:
        T = Sd.copy()
    else:
        A = np.eye(n) - beta * Sd
        T = la.lu_solve(la.lu_factor(A, check_finite=False), Sd, check_finite=False)
        # round-off can leave tiny negatives where the exact value is 0
        np.maximum(T, 0.0, out=T)
    return IndirectTrustMatrix(
        values=T,
        beta=beta,
        strategy="exact",
        structure=S.structure,
        residual=identity_residual(S, T, beta),
    )


def default_max_iter(tol: float, beta: float) -> int:
    if beta == 0.0:
        return 1
    return 10 * math.ceil(math.log(tol) / math.log(beta))


def indirect_trust_iterative(
    S: RowNormalizedMatrix,
    beta: float = DEFAULT_BETA,
    tol: float = 1e-8,
    max_iter: int | None = None,
) -> IndirectTrustMatrix:
    """Iterate T~ <- S + beta S T~ from T~ = S until the update is below tol.

    Stopping is on the max-abs change between successive iterates. If
    ``max_iter`` is reached first a warning is issued and the result carries
    ``converged=False``.
    """
    _check_beta(beta)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = default_max_iter(tol, beta)
    Sv = S.values
    Sd = Sv.toarray()
    T = Sd.copy()
    converged = False
    k = 0
    while k < max_iter:
        T_next = Sd + beta * (Sv @ T)
        step = float(np.abs(T_next - T).max()) if T.size else 0.0
        T = T_next
        k += 1
        if step < tol:
            converged = True
            break
    residual = identity_residual(S, T, beta)
    if not converged:
        warnings.warn(
            f"indirect_trust_iterative stopped after {k} iterations, residual {residual:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return IndirectTrustMatrix(
        values=T,
        beta=beta,
        strategy="iterative",
        structure=S.structure,
        residual=residual,
        iterations=k,
        converged=converged,
    )


def walk_cutoff_for(beta: float, bound: float) -> int:
    """Smallest L with beta**L / (1 - beta) < bound."""
    if beta == 0.0:
        return 1
    L = 1
    while beta**L / (1.0 - beta) >= bound:
        L += 1
    return L


def indirect_trust_truncated(
    S: RowNormalizedMatrix,
    beta: float = DEFAULT_BETA,
    walk_cutoff: int = 50,
    source_rows=None,
    drop_tol: float = DROP_TOL,
) -> IndirectTrustMatrix:
    """Sum of the first ``walk_cutoff`` walk terms, for chosen rows only.

    Rows not listed in ``source_rows`` are left empty. Costs roughly
    O(walk_cutoff * reach * degree) per source row.
    """
    _check_beta(beta)
    if walk_cutoff < 1:
        raise ValueError("walk_cutoff must be >= 1")
    n = S.n
    Sv = S.values
    all_rows = source_rows is None
    rows = np.arange(n) if all_rows else np.unique(np.asarray(source_rows, dtype=np.int64))
    indptr, indices, data = kernels.truncated_walk_rows(
        Sv.indptr.astype(np.int64),
        Sv.indices.astype(np.int64),
        Sv.data,
        n,
        rows,
        float(beta),
        int(walk_cutoff),
        float(drop_tol),
    )
    sub = sp.csr_matrix((data, indices, indptr), shape=(rows.size, n))
    if all_rows:
        T = sub
    else:
        # scatter the computed rows into their positions
        place = sp.csr_matrix(
            (np.ones(rows.size), (rows, np.arange(rows.size))), shape=(n, rows.size)
        )
        T = sp.csr_matrix(place @ sub)
    T.sort_indices()
    bound = beta**walk_cutoff / (1.0 - beta)
    residual = identity_residual(S, T, beta) if all_rows else float("nan")
    return IndirectTrustMatrix(
        values=T,
        beta=beta,
        strategy="truncated",
        structure=S.structure,
        residual=residual,
        walk_cutoff=int(walk_cutoff),
        truncation_bound=bound,
        source_rows=None if all_rows else rows,
    )


def indirect_trust(S: RowNormalizedMatrix, beta: float = DEFAULT_BETA, strategy: str = "exact",
                   **kwargs) -> IndirectTrustMatrix:
    """Dispatch to one of the three strategies by name."""
    if strategy == "exact":
        return indirect_trust_exact(S, beta, **kwargs)
    if strategy == "iterative":
        return indirect_trust_iterative(S, beta, **kwargs)
    if strategy == "truncated":
        return indirect_trust_truncated(S, beta, **kwargs)
    raise ValueError(f"unknown strategy {strategy!r}")


# -- baselines ---------------------------------------------------------------


def global_centrality(
    g: TrustGraph, beta: float = 0.85, tol: float = 1e-10, max_iter: int = 100_000
) -> CentralityVector:
    """PageRank-style score c = beta P c + (1 - beta), solved by Jacobi iteration.

    P_ij = 1/|N_j| for each link j -> i on the unweighted structure. A
    dangling agent j (no out-links) spreads uniformly: column j is 1/n.
    """
    _check_beta(beta)
    n = g.n_agents
    A = g.structure_matrix()
    out_deg = np.asarray(A.sum(axis=1)).ravel()
    dangling = out_deg == 0
    inv_deg = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out_deg))
    PT = sp.csr_matrix(sp.diags(inv_deg) @ A).T.tocsr()

    def apply_P(c):
        return PT @ c + c[dangling].sum() / n

    c = np.ones(n)
    residual = float("inf")
    for k in range(1, max_iter + 1):
        c = beta * apply_P(c) + (1.0 - beta)
        residual = float(np.abs(c - beta * apply_P(c) - (1.0 - beta)).max()) if n else 0.0
        if residual < tol:
            return CentralityVector(c=c, beta=beta, iterations=k, residual=residual)
    raise RuntimeError(f"global_centrality did not reach residual {tol} (got {residual:.3g})")


def naive_recursion_demo(
    S: RowNormalizedMatrix, tol: float = 1e-10, max_iter: int = 10_000
) -> NaiveRecursionReport:
    """Power-iterate the undamped recursion ``V <- S V`` starting from S.

    Used to show why the damped metric is needed: on a primitive stochastic
    S the columns flatten to constants, on a nilpotent S everything
    vanishes, and on a periodic S the iteration never settles.
    """
    Sv = S.values
    V = S.toarray()
    prev = None
    trace = []
    k = 0
    converged = False
    while k < max_iter:
        V_next = Sv @ V
        k += 1
        trace.append(float(V_next.var(axis=0).max()) if V_next.size else 0.0)
        if float(np.abs(V_next - V).max()) < tol:
            V = V_next
            converged = True
            break
        prev, V = V, V_next
    var = trace[-1] if trace else 0.0
    if converged:
        if float(np.abs(V).max()) < tol:
            kind = "vanishing"
        elif var < tol:
            kind = "constant_columns"
        else:
            kind = "fixed_point"
    elif prev is not None and float(np.abs(Sv @ V - prev).max()) < tol:
        kind = "oscillating"
    else:
        kind = "not_converged"
    return NaiveRecursionReport(
        converged=converged,
        iterations=k,
        degeneracy=kind,
        column_variance=var,
        variance_trace=trace,
        final=V,
    )


# -- dump format --------------------------------------------------------------


def format_matrix_dump(matrix, beta, strategy, residual) -> str:
    """Coordinate-triple text dump with a ``# n=... beta=...`` header."""
    m = sp.coo_matrix(matrix)
    m = sp.csr_matrix(m)
    m.eliminate_zeros()
    m.sort_indices()
    n = m.shape[0]
    lines = [f"# n={n} beta={float(beta)!r} strategy={strategy} residual={float(residual)!r}"]
    data = m.data.tolist()
    for i in range(n):
        for k in range(m.indptr[i], m.indptr[i + 1]):
            lines.append(f"{i}\t{m.indices[k]}\t{data[k]!r}")
    return "\n".join(lines) + "\n"


def write_matrix_dump(path, matrix, beta, strategy, residual):
    Path(path).write_text(format_matrix_dump(matrix, beta, strategy, residual), encoding="utf-8")


def read_matrix_dump(path):
    """Parse a dump back into ``(header_dict, csr_matrix)``."""
    header = {}
    rows, cols, vals = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    header[key] = value
                continue
            i, j, v = line.split("\t")
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    n = header["n"] = int(header["n"])
    for key in ("beta", "residual"):
        if key in header:
            header[key] = float(header[key])
    return header, sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

"""Trust dynamics: per-step utility and update, and the mean-field map.

The update rule follows the four-case definition literally: trust goes up
by ``(1 - gamma) |u|`` when ``u > u_thr`` or ``-u_thr <= u <= 0`` and down
by the same amount when ``u < -u_thr`` or ``0 < u <= u_thr``, then is
clipped to [0, 1]. ``sign_follows_utility=True`` switches to the variant
where trust rises iff ``u > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TrustGraph
from .metric import (
    DEFAULT_BETA,
    RowNormalizedMatrix,
    indirect_trust,
    normalize_csr,
    normalize_indirect,
)


@dataclass(frozen=True)
class DynamicsParams:
    gamma: float = 0.75
    u_thr: float = 0.5
    beta: float = DEFAULT_BETA
    eta: float = 0.1
    sign_follows_utility: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must be in [0, 1)")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")


def check_profiles(profiles) -> np.ndarray:
    pi = np.asarray(profiles, dtype=np.float64)
    if not np.all(np.abs(pi) == 1.0):
        raise ValueError("profiles must be exactly +1 or -1")
    return pi


def utility(r_i: float, neighbour_output: float, signalled: bool = True) -> float:
    """1 - |r_i - x| where x is the neighbour's rating (if it signalled) or
    the system's prediction for it (if not)."""
    if r_i not in (-1, 1):
        raise ValueError("own rating must be -1 or +1")
    if signalled and neighbour_output not in (-1, 1):
        raise ValueError("a signalled rating must be -1 or +1")
    if not -1.0 <= neighbour_output <= 1.0:
        raise ValueError("prediction must be in [-1, 1]")
    return 1.0 - abs(r_i - neighbour_output)


def update_trust(t: float, u: float, params: DynamicsParams = DynamicsParams()) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"trust {t} outside [0, 1]")
    if not -1.0 <= u <= 1.0:
        raise ValueError(f"utility {u} outside [-1, 1]")
    g, thr = params.gamma, params.u_thr
    if params.sign_follows_utility:
        raw = g * t + (1.0 - g) * u
    elif u > thr or -thr <= u <= 0.0:
        raw = g * t + (1.0 - g) * abs(u)
    else:
        raw = g * t - (1.0 - g) * abs(u)
    return max(0.0, min(1.0, raw))


def expected_utility(profiles, S_tilde: RowNormalizedMatrix, eta: float, i: int, j: int) -> float:
    """eta (1 - |pi_i - pi_j|) + (1 - eta)(1 - |pi_i - sum_k S~_jk pi_k|)."""
    pi = check_profiles(profiles)
    cols, w = S_tilde.row(j)
    expected_pred = float(np.dot(w, pi[cols]))
    return eta * (1.0 - abs(pi[i] - pi[j])) + (1.0 - eta) * (1.0 - abs(pi[i] - expected_pred))


def smoothed_trust(indptr, indices, weights, n, beta, mode="bootstrap", strategy="exact",
                   **solver_kwargs) -> RowNormalizedMatrix:
    """Direct weights -> S -> T~ -> S~ restricted to structural neighbours."""
    S = normalize_csr(indptr, indices, weights, n, mode)
    tt = indirect_trust(S, beta, strategy, **solver_kwargs)
    return normalize_indirect(tt, mode="neighbours")


def _map_arrays(indptr, indices, weights, n, pi, eta, beta, mode, strategy, **kw):
    S_tilde = smoothed_trust(indptr, indices, weights, n, beta, mode, strategy, **kw)
    pred = S_tilde.values @ pi
    src = np.repeat(np.arange(n), np.diff(indptr))
    u = eta * (1.0 - np.abs(pi[src] - pi[indices])) + (1.0 - eta) * (
        1.0 - np.abs(pi[src] - pred[indices])
    )
    return np.clip(u, 0.0, 1.0)


def _with_structure(T: TrustGraph, T0: TrustGraph | None) -> TrustGraph:
    """T's weights on the union of T's and T0's structural neighbourhoods."""
    if T0 is None:
        return T
    merged = T.copy()
    for i in range(T0.n_agents):
        for j in T0.neighbours(i):
            merged.add_neighbour(i, j)
    return merged


def mean_field_map(
    T: TrustGraph,
    T0: TrustGraph | None,
    profiles,
    eta: float,
    beta: float = DEFAULT_BETA,
    mode: str = "bootstrap",
    strategy: str = "exact",
) -> TrustGraph:
    """Apply the equilibrium self-consistency map once to every structural edge.

    S~ is built from the current weights (direct normalisation in ``mode``,
    indirect trust, neighbour-restricted normalisation) and each edge gets
    ``clip(expected_utility, 0, 1)``. ``T0`` only contributes structural
    neighbours; the initial weights do not enter the map itself.
    """
    pi = check_profiles(profiles)
    T = _with_structure(T, T0)
    indptr, indices, weights = T.to_csr()
    new = _map_arrays(indptr, indices, weights, T.n_agents, pi, eta, beta, mode, strategy)
    return TrustGraph.from_csr(T.n_agents, indptr, indices, new)


def fixed_point_residual(
    T: TrustGraph,
    T0: TrustGraph | None,
    profiles,
    eta: float,
    beta: float = DEFAULT_BETA,
    mode: str = "bootstrap",
    strategy: str = "exact",
    norm: str = "max",
) -> float:
    """|f(T)_ij - T_ij| over structural edges, reduced by ``norm``.

    ``norm="max"`` is the worst edge; ``norm="mean"`` averages over edges,
    which is the useful measure for noisy simulation end states where a few
    edges into mixed-profile neighbourhoods sit away from the mean field.
    """
    if norm not in ("max", "mean"):
        raise ValueError(f"unknown norm {norm!r}")
    pi = check_profiles(profiles)
    T = _with_structure(T, T0)
    indptr, indices, weights = T.to_csr()
    if indices.size == 0:
        return 0.0
    new = _map_arrays(indptr, indices, weights, T.n_agents, pi, eta, beta, mode, strategy)
    diff = np.abs(new - weights)
    return float(diff.max() if norm == "max" else diff.mean())


def polarized_configuration(g: TrustGraph, profiles) -> TrustGraph:
    """Trust 1 between same-profile neighbours and 0 across profiles."""
    pi = check_profiles(profiles)
    out = TrustGraph(g.n_agents)
    for i in range(g.n_agents):
        for j in g.neighbours(i):
            out.add_edge(i, j, 1.0 if pi[i] == pi[j] else 0.0)
    return out

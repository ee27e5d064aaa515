"""Pure-Python (numpy/scipy) versions of the hot kernels.

Signatures match ``trustwebrank._kernels`` exactly so either can back
``trustwebrank.kernels``.
"""
import numpy as np
import scipy.sparse as sp


def truncated_walk_rows(indptr, indices, data, n, sources, beta, walk_cutoff, drop_tol):
    """Rows ``sources`` of sum_{k<L} (beta S)^k S as CSR arrays.

    Entries smaller than ``drop_tol`` are removed after the full sum is built.
    """
    S = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    sources = np.asarray(sources, dtype=np.int64)
    x = S[sources]
    acc = x.copy()
    for _ in range(walk_cutoff - 1):
        if x.nnz == 0:
            break
        x = beta * (x @ S)
        acc = acc + x
    acc = acc.tocsr()
    acc.data[acc.data < drop_tol] = 0.0
    acc.eliminate_zeros()
    acc.sort_indices()
    return (
        acc.indptr.astype(np.int64),
        acc.indices.astype(np.int64),
        acc.data.astype(np.float64),
    )


def edge_step(src, dst, weights, profiles, signalled, predictions, gamma, u_thr,
              sign_follows_utility):
    """One utility + trust-update pass over every structural edge i -> j.

    Agent i's rating is its profile; it sees j's rating when j signalled and
    j's prediction otherwise. Returns ``(new_weights, utilities)``.
    """
    signalled = np.asarray(signalled, dtype=bool)
    seen = np.where(signalled[dst], profiles[dst], predictions[dst])
    u = 1.0 - np.abs(profiles[src] - seen)
    return update_rule(weights, u, gamma, u_thr, sign_follows_utility), u


def update_rule(weights, u, gamma, u_thr, sign_follows_utility):
    if sign_follows_utility:
        raw = gamma * weights + (1.0 - gamma) * u
    else:
        up = (u > u_thr) | ((u >= -u_thr) & (u <= 0.0))
        step = (1.0 - gamma) * np.abs(u)
        raw = np.where(up, gamma * weights + step, gamma * weights - step)
    return np.clip(raw, 0.0, 1.0)

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_fallback`` for the reference."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport qsort
from libc.math cimport fabs

cnp.import_array()


cdef int _cmp_long(const void *a, const void *b) noexcept nogil:
    cdef long long x = (<long long *>a)[0]
    cdef long long y = (<long long *>b)[0]
    return (x > y) - (x < y)


def truncated_walk_rows(indptr, indices, data, Py_ssize_t n, sources,
                        double beta, Py_ssize_t walk_cutoff, double drop_tol):
    cdef const long long[:] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long long[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef const long long[:] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef Py_ssize_t n_src = src.shape[0]

    cdef double[:] cur = np.zeros(n, dtype=np.float64)
    cdef double[:] nxt = np.zeros(n, dtype=np.float64)
    cdef double[:] acc = np.zeros(n, dtype=np.float64)
    cdef long long[:] cur_idx = np.empty(n, dtype=np.int64)
    cdef long long[:] nxt_idx = np.empty(n, dtype=np.int64)
    cdef long long[:] acc_idx = np.empty(n, dtype=np.int64)
    cdef unsigned char[:] in_nxt = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[:] in_acc = np.zeros(n, dtype=np.uint8)

    out_indptr = np.zeros(n_src + 1, dtype=np.int64)
    cdef long long[:] optr = out_indptr
    out_cols = []
    out_vals = []

    cdef Py_ssize_t r, s, a, b, k, q, c, n_cur, n_nxt, n_acc, n_keep
    cdef long long row, l, col
    cdef double v, w
    cdef long long[:] keep_c
    cdef double[:] keep_v

    for r in range(n_src):
        row = src[r]
        n_cur = 0
        n_acc = 0
        for k in range(ip[row], ip[row + 1]):
            col = ix[k]
            v = dv[k]
            if v == 0.0:
                continue
            cur[col] = v
            cur_idx[n_cur] = col
            n_cur += 1
            acc[col] = v
            acc_idx[n_acc] = col
            in_acc[col] = 1
            n_acc += 1

        for s in range(1, walk_cutoff):
            if n_cur == 0:
                break
            n_nxt = 0
            for a in range(n_cur):
                l = cur_idx[a]
                w = beta * cur[l]
                for k in range(ip[l], ip[l + 1]):
                    col = ix[k]
                    if in_nxt[col] == 0:
                        in_nxt[col] = 1
                        nxt[col] = 0.0
                        nxt_idx[n_nxt] = col
                        n_nxt += 1
                    nxt[col] += w * dv[k]
            for a in range(n_cur):
                cur[cur_idx[a]] = 0.0
            n_cur = 0
            for b in range(n_nxt):
                col = nxt_idx[b]
                in_nxt[col] = 0
                v = nxt[col]
                nxt[col] = 0.0
                if v == 0.0:
                    continue
                cur[col] = v
                cur_idx[n_cur] = col
                n_cur += 1
                if in_acc[col] == 0:
                    in_acc[col] = 1
                    acc[col] = 0.0
                    acc_idx[n_acc] = col
                    n_acc += 1
                acc[col] += v

        for a in range(n_cur):
            cur[cur_idx[a]] = 0.0

        qsort(&acc_idx[0], n_acc, sizeof(long long), _cmp_long)
        keep_c = np.empty(n_acc, dtype=np.int64)
        keep_v = np.empty(n_acc, dtype=np.float64)
        n_keep = 0
        for a in range(n_acc):
            col = acc_idx[a]
            v = acc[col]
            acc[col] = 0.0
            in_acc[col] = 0
            if v >= drop_tol and v != 0.0:
                keep_c[n_keep] = col
                keep_v[n_keep] = v
                n_keep += 1
        out_cols.append(np.asarray(keep_c[:n_keep]))
        out_vals.append(np.asarray(keep_v[:n_keep]))
        optr[r + 1] = optr[r] + n_keep

    if n_src:
        cols = np.concatenate(out_cols).astype(np.int64)
        vals = np.concatenate(out_vals).astype(np.float64)
    else:
        cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=np.float64)
    return out_indptr, cols, vals


def edge_step(src, dst, weights, profiles, signalled, predictions,
              double gamma, double u_thr, bint sign_follows_utility):
    cdef const long long[:] si = np.ascontiguousarray(src, dtype=np.int64)
    cdef const long long[:] di = np.ascontiguousarray(dst, dtype=np.int64)
    cdef const double[:] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:] pr = np.ascontiguousarray(profiles, dtype=np.float64)
    cdef const unsigned char[:] sg = np.ascontiguousarray(signalled, dtype=np.uint8)
    cdef const double[:] pd = np.ascontiguousarray(predictions, dtype=np.float64)
    cdef Py_ssize_t m = si.shape[0]

    new_w = np.empty(m, dtype=np.float64)
    util = np.empty(m, dtype=np.float64)
    cdef double[:] nw = new_w
    cdef double[:] uu = util
    cdef Py_ssize_t e
    cdef long long j
    cdef double seen, u, t, step

    for e in range(m):
        j = di[e]
        seen = pr[j] if sg[j] else pd[j]
        u = 1.0 - fabs(pr[si[e]] - seen)
        uu[e] = u
        if sign_follows_utility:
            t = gamma * wt[e] + (1.0 - gamma) * u
        else:
            step = (1.0 - gamma) * fabs(u)
            if u > u_thr or (u >= -u_thr and u <= 0.0):
                t = gamma * wt[e] + step
            else:
                t = gamma * wt[e] - step
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        nw[e] = t
    return new_w, util

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled scoring kernel: per-point neighbor-quality terms.

Mirrors fewshot_icnn._score_py.per_point_terms; keep the two in lockstep.
Both backends consume the distance matrix produced by
core.euclidean_distances and accumulate every sum in the same index order,
so their outputs are bit-identical, not merely close.  The compiled part is
the neighbor selection (ties by smaller index) and the per-point term loops,
which run with the GIL released.
"""

import numpy as np

cimport numpy as cnp

from .core import euclidean_distances

cnp.import_array()

DEF DEGENERATE_SPREAD_EPS = 1e-12


def per_point_terms(vectors, class_ids, int k, double degenerate_spread_value=0.5):
    """See fewshot_icnn._score_py.per_point_terms."""
    x = np.ascontiguousarray(vectors, dtype=np.float64)
    cdef const cnp.int64_t[::1] ids = np.ascontiguousarray(class_ids, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0]
    if ids.shape[0] != n:
        raise ValueError("class_ids length must match the number of rows")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")

    cdef const double[:, ::1] dist = euclidean_distances(x, x)

    lam_arr = np.empty(n, dtype=np.float64)
    om_arr = np.empty(n, dtype=np.float64)
    gam_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] lam = lam_arr
    cdef double[::1] om = om_arr
    cdef double[::1] gam = gam_arr

    # per-point scratch: k neighbor distances (ascending) and their indices
    nd_arr = np.empty(k, dtype=np.float64)
    ni_arr = np.empty(k, dtype=np.int64)
    tv_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] nd = nd_arr
    cdef cnp.int64_t[::1] ni = ni_arr
    cdef double[::1] tv = tv_arr

    cdef Py_ssize_t i, j, pos, m, cnt
    cdef double d, theta, alpha, spread
    cdef double lam_sum, term
    cdef double same_sum, same_mean, diff_sum, diff_mean
    cdef double same_var, diff_var, dev
    cdef Py_ssize_t same_cnt, diff_cnt
    cdef cnp.int64_t my_id

    with nogil:
        for i in range(n):
            cnt = 0
            for j in range(n):
                if j == i:
                    continue
                d = dist[i, j]
                if cnt == k and d >= nd[k - 1]:
                    continue
                # insert before the first strictly-greater entry: equal
                # distances keep the earlier (smaller) index first
                pos = cnt if cnt < k else k - 1
                while pos > 0 and nd[pos - 1] > d:
                    nd[pos] = nd[pos - 1]
                    ni[pos] = ni[pos - 1]
                    pos -= 1
                nd[pos] = d
                ni[pos] = j
                if cnt < k:
                    cnt += 1

            theta = nd[0]
            alpha = nd[k - 1]
            spread = alpha - theta
            my_id = ids[i]

            same_cnt = 0
            lam_sum = 0.0
            same_sum = 0.0
            diff_sum = 0.0
            for m in range(k):
                if spread < DEGENERATE_SPREAD_EPS:
                    tv[m] = degenerate_spread_value
                else:
                    tv[m] = (nd[m] - theta) / spread
                if ids[ni[m]] == my_id:
                    term = 1.0 - tv[m]
                    same_cnt += 1
                    same_sum += term
                else:
                    term = tv[m]
                    diff_sum += term
                lam_sum += term
            diff_cnt = k - same_cnt

            same_var = 0.0
            diff_var = 0.0
            if same_cnt >= 2 or diff_cnt >= 2:
                same_mean = same_sum / same_cnt if same_cnt > 0 else 0.0
                diff_mean = diff_sum / diff_cnt if diff_cnt > 0 else 0.0
                for m in range(k):
                    if ids[ni[m]] == my_id:
                        if same_cnt >= 2:
                            dev = (1.0 - tv[m]) - same_mean
                            same_var += dev * dev
                    else:
                        if diff_cnt >= 2:
                            dev = tv[m] - diff_mean
                            diff_var += dev * dev
                if same_cnt >= 2:
                    same_var /= same_cnt
                if diff_cnt >= 2:
                    diff_var /= diff_cnt

            lam[i] = lam_sum / k
            om[i] = 1.0 - (same_var + diff_var)
            gam[i] = <double>same_cnt / <double>k

    return lam_arr, om_arr, gam_arr

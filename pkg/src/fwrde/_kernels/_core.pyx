# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Semantics (including tie-breaking) match ``_pyfallback`` exactly; see that
module for the reference descriptions.
"""

import numpy as np

from libc.math cimport erfc, exp, sqrt, INFINITY

BACKEND = "compiled"

cdef double INV_SQRT_2PI = 0.3989422804014327
cdef double SQRT2 = 1.4142135623730951


# ---------------------------------------------------------------------------
# bounded-heap selection
#
# Heap entries are (key, index) pairs ordered like the Python tuples
# (key, -index): entry a < entry b iff key_a < key_b, or keys equal and
# index_a > index_b.  The root is therefore the weakest kept candidate.

cdef inline bint _entry_lt(double ka, Py_ssize_t ia, double kb, Py_ssize_t ib) nogil:
    return ka < kb or (ka == kb and ia > ib)


cdef void _sift_down(double[::1] keys, long long[::1] idx, Py_ssize_t size) nogil:
    cdef Py_ssize_t pos = 0, child
    cdef double k = keys[0]
    cdef long long i = idx[0]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _entry_lt(keys[child + 1], idx[child + 1], keys[child], idx[child]):
            child += 1
        if _entry_lt(keys[child], idx[child], k, i):
            keys[pos] = keys[child]
            idx[pos] = idx[child]
            pos = child
        else:
            break
    keys[pos] = k
    idx[pos] = i


cdef void _sift_up(double[::1] keys, long long[::1] idx, Py_ssize_t pos) nogil:
    cdef Py_ssize_t parent
    cdef double k = keys[pos]
    cdef long long i = idx[pos]
    while pos > 0:
        parent = (pos - 1) // 2
        if _entry_lt(k, i, keys[parent], idx[parent]):
            keys[pos] = keys[parent]
            idx[pos] = idx[parent]
            pos = parent
        else:
            break
    keys[pos] = k
    idx[pos] = i


def top_k_abs(values, Py_ssize_t k):
    values = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] vals = values
    cdef Py_ssize_t n = vals.shape[0]
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    keys_arr = np.empty(k, dtype=np.float64)
    idx_arr = np.empty(k, dtype=np.int64)
    cdef double[::1] keys = keys_arr
    cdef long long[::1] idx = idx_arr
    cdef Py_ssize_t i, size = 0
    cdef double a
    for i in range(n):
        a = vals[i]
        if a < 0.0:
            a = -a
        if size < k:
            keys[size] = a
            idx[size] = i
            _sift_up(keys, idx, size)
            size += 1
        elif _entry_lt(keys[0], idx[0], a, i):
            keys[0] = a
            idx[0] = i
            _sift_down(keys, idx, size)
    out = np.sort(idx_arr[:size])
    return out


def most_negative_k(values, Py_ssize_t k):
    values = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] vals = values
    cdef Py_ssize_t n = vals.shape[0]
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    keys_arr = np.empty(k, dtype=np.float64)
    idx_arr = np.empty(k, dtype=np.int64)
    cdef double[::1] keys = keys_arr
    cdef long long[::1] idx = idx_arr
    cdef Py_ssize_t i, size = 0
    cdef double a
    for i in range(n):
        if vals[i] >= 0.0:
            continue
        a = -vals[i]
        if size < k:
            keys[size] = a
            idx[size] = i
            _sift_up(keys, idx, size)
            size += 1
        elif _entry_lt(keys[0], idx[0], a, i):
            keys[0] = a
            idx[0] = i
            _sift_down(keys, idx, size)
    out = np.sort(idx_arr[:size])
    return out


def hungarian(cost):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    cdef double[:, ::1] c = cost
    cdef Py_ssize_t n = c.shape[0]

    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    p_arr = np.zeros(n + 1, dtype=np.int64)
    way_arr = np.zeros(n + 1, dtype=np.int64)
    minv_arr = np.empty(n + 1, dtype=np.float64)
    used_arr = np.empty(n + 1, dtype=np.uint8)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef long long[::1] p = p_arr
    cdef long long[::1] way = way_arr
    cdef double[::1] minv = minv_arr
    cdef unsigned char[::1] used = used_arr

    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double cur, delta

    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break

    col_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] col = col_arr
    for j in range(1, n + 1):
        col[p[j] - 1] = j - 1
    return col_arr


def relu_moments(mean, var):
    mean = np.ascontiguousarray(mean, dtype=np.float64)
    var = np.ascontiguousarray(var, dtype=np.float64)
    cdef double[::1] mu = mean
    cdef double[::1] va = var
    cdef Py_ssize_t n = mu.shape[0]
    out_mean = np.empty(n, dtype=np.float64)
    out_var = np.empty(n, dtype=np.float64)
    cdef double[::1] om = out_mean
    cdef double[::1] ov = out_var
    cdef Py_ssize_t i
    cdef double m, s, z, cdf, pdf, sec, vv
    with nogil:
        for i in range(n):
            if va[i] > 0.0:
                s = sqrt(va[i])
                z = mu[i] / s
                cdf = 0.5 * erfc(-z / SQRT2)
                pdf = INV_SQRT_2PI * exp(-0.5 * z * z)
                m = mu[i] * cdf + s * pdf
                sec = (mu[i] * mu[i] + va[i]) * cdf + mu[i] * s * pdf
                vv = sec - m * m
                om[i] = m
                ov[i] = vv if vv > 0.0 else 0.0
            else:
                om[i] = mu[i] if mu[i] > 0.0 else 0.0
                ov[i] = 0.0
    return out_mean, out_var


def relu_moment_partials(mean, var):
    mean = np.ascontiguousarray(mean, dtype=np.float64)
    var = np.ascontiguousarray(var, dtype=np.float64)
    cdef double[::1] mu = mean
    cdef double[::1] va = var
    cdef Py_ssize_t n = mu.shape[0]
    out_mean = np.empty(n, dtype=np.float64)
    out_var = np.empty(n, dtype=np.float64)
    dm_dmean = np.empty(n, dtype=np.float64)
    dm_dvar = np.empty(n, dtype=np.float64)
    dv_dmean = np.empty(n, dtype=np.float64)
    dv_dvar = np.empty(n, dtype=np.float64)
    cdef double[::1] om = out_mean
    cdef double[::1] ov = out_var
    cdef double[::1] dmm = dm_dmean
    cdef double[::1] dmv = dm_dvar
    cdef double[::1] dvm = dv_dmean
    cdef double[::1] dvv = dv_dvar
    cdef Py_ssize_t i
    cdef double m, s, z, cdf, pdf, sec, vv
    with nogil:
        for i in range(n):
            if va[i] > 0.0:
                s = sqrt(va[i])
                z = mu[i] / s
                cdf = 0.5 * erfc(-z / SQRT2)
                pdf = INV_SQRT_2PI * exp(-0.5 * z * z)
                m = mu[i] * cdf + s * pdf
                sec = (mu[i] * mu[i] + va[i]) * cdf + mu[i] * s * pdf
                vv = sec - m * m
                om[i] = m
                ov[i] = vv if vv > 0.0 else 0.0
                dmm[i] = cdf
                dmv[i] = pdf / (2.0 * s)
                dvm[i] = 2.0 * m * (1.0 - cdf)
                dvv[i] = cdf - m * pdf / s
            elif mu[i] > 0.0:
                om[i] = mu[i]
                ov[i] = 0.0
                dmm[i] = 1.0
                dmv[i] = 0.0
                dvm[i] = 0.0
                dvv[i] = 1.0
            else:
                om[i] = 0.0
                ov[i] = 0.0
                dmm[i] = 0.0
                dmv[i] = 0.0
                dvm[i] = 0.0
                dvv[i] = 0.0
    return out_mean, out_var, dm_dmean, dm_dvar, dv_dmean, dv_dvar

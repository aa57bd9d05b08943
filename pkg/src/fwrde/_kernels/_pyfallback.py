"""Pure numpy/heapq implementations of the hot kernels.

Used when the compiled extension is unavailable (or when
``FWRDE_PURE_PYTHON`` is set).  Semantics, including tie-breaking, are
identical to the compiled backend; outputs agree exactly for the index
kernels and to machine precision for the moment kernels.
"""

import heapq
import math

import numpy as np
from scipy.special import erfc

BACKEND = "python"

_INV_SQRT_2PI = 0.3989422804014327
_SQRT2 = math.sqrt(2.0)


def top_k_abs(values, k):
    """Indices of the k largest |values|, ties to the lowest index.

    Bounded min-heap, O(n log k).  Returns indices sorted ascending.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    # heap entries (|v|, -index): the root is the weakest kept candidate,
    # i.e. smallest magnitude and, among equals, the largest index.
    heap = []
    for i, v in enumerate(np.abs(values)):
        entry = (v, -i)
        if len(heap) < k:
            heapq.heappush(heap, entry)
        elif entry > heap[0]:
            heapq.heapreplace(heap, entry)
    idx = np.array(sorted(-e[1] for e in heap), dtype=np.int64)
    return idx


def most_negative_k(values, k):
    """Indices of the (at most k) most negative entries, ties to the lowest index.

    Entries >= 0 are never selected.  Returns indices sorted ascending.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    # heap entries (-v, -index) for v < 0: root = least negative, largest index.
    heap = []
    for i, v in enumerate(values):
        if v >= 0.0:
            continue
        entry = (-v, -i)
        if len(heap) < k:
            heapq.heappush(heap, entry)
        elif entry > heap[0]:
            heapq.heapreplace(heap, entry)
    idx = np.array(sorted(-e[1] for e in heap), dtype=np.int64)
    return idx


def hungarian(cost):
    """Minimum-cost assignment of rows to columns for a square cost matrix.

    Shortest augmenting path formulation with dual potentials, O(n^3).
    Ties resolve to the lowest column index, so an all-zero cost yields
    the identity assignment.  Returns ``col[i]`` = column assigned to row i.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    inf = np.inf

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j] = row assigned to column j (1-based)
    way = np.zeros(n + 1, dtype=np.int64)

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
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

    col = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col[p[j] - 1] = j - 1
    return col


def _ndtr(z):
    return 0.5 * erfc(-z / _SQRT2)


def relu_moments(mean, var):
    """Mean/variance of relu(Y) for Y ~ N(mean, var), componentwise.

    var == 0 components fall back to the deterministic relu.
    """
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    out_mean = np.maximum(mean, 0.0)
    out_var = np.zeros_like(mean)
    pos = var > 0.0
    if np.any(pos):
        mu = mean[pos]
        sigma = np.sqrt(var[pos])
        z = mu / sigma
        cdf = _ndtr(z)
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        m = mu * cdf + sigma * pdf
        second = (mu * mu + var[pos]) * cdf + mu * sigma * pdf
        out_mean[pos] = m
        out_var[pos] = np.maximum(second - m * m, 0.0)
    return out_mean, out_var


def relu_moment_partials(mean, var):
    """relu_moments plus the four partial derivatives.

    Returns (m, v, dm_dmean, dm_dvar, dv_dmean, dv_dvar).  At var == 0 the
    derivatives are those of the deterministic relu with relu'(0) = 0.
    """
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    active = mean > 0.0
    out_mean = np.where(active, mean, 0.0)
    out_var = np.zeros_like(mean)
    dm_dmean = np.where(active, 1.0, 0.0)
    dm_dvar = np.zeros_like(mean)
    dv_dmean = np.zeros_like(mean)
    dv_dvar = np.where(active, 1.0, 0.0)
    pos = var > 0.0
    if np.any(pos):
        mu = mean[pos]
        sigma = np.sqrt(var[pos])
        z = mu / sigma
        cdf = _ndtr(z)
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        m = mu * cdf + sigma * pdf
        second = (mu * mu + var[pos]) * cdf + mu * sigma * pdf
        out_mean[pos] = m
        out_var[pos] = np.maximum(second - m * m, 0.0)
        dm_dmean[pos] = cdf
        dm_dvar[pos] = pdf / (2.0 * sigma)
        dv_dmean[pos] = 2.0 * m * (1.0 - cdf)
        dv_dvar[pos] = cdf - m * pdf / sigma
    return out_mean, out_var, dm_dmean, dm_dvar, dv_dmean, dv_dvar

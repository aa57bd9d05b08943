"""Convex feasible regions and their exact linear minimization oracles.

Three regions are supported: the k-sparse polytope (intersection of the
l1-ball of radius tau*k with the hypercube of radius tau), its restriction
to the non-negative orthant, and the Birkhoff polytope of doubly stochastic
matrices.  Each region exposes

* ``lmo(gradient)``      -- a vertex minimizing <gradient, v> over the region,
* ``contains(point, tol)`` -- membership check within ``tol``,
* ``initial_point()``    -- a canonical feasible starting point.

All tie-breaking is deterministic (lowest index wins) so repeated runs are
bit-identical.  Region objects are immutable and their operations are pure.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import InputError

DEFAULT_MEMBERSHIP_TOL = 1e-9


def _as_vector(x, n, name):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise InputError(f"{name} must have shape ({n},), got {x.shape}")
    return x


@dataclass(frozen=True)
class KSparsePolytope:
    """Convex hull of all vectors with exactly k entries equal to +-tau."""

    n: int
    k: int
    tau: float = 1.0

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise InputError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")

    @property
    def point_shape(self):
        return (self.n,)

    def lmo(self, gradient):
        return lmo_ksparse(gradient, self)

    def contains(self, point, tol=DEFAULT_MEMBERSHIP_TOL):
        point = _as_vector(point, self.n, "point")
        if np.abs(point).max(initial=0.0) > self.tau + tol:
            return False
        return bool(np.abs(point).sum() <= self.tau * self.k + tol)

    def initial_point(self):
        return np.zeros(self.n)

    def vertices(self):
        """All vertices (exponentially many; intended for small n only)."""
        from itertools import combinations, product

        out = []
        for support in combinations(range(self.n), self.k):
            for signs in product((self.tau, -self.tau), repeat=self.k):
                v = np.zeros(self.n)
                v[list(support)] = signs
                out.append(v)
        return out


@dataclass(frozen=True)
class NonNegKSparsePolytope:
    """k-sparse polytope of radius tau intersected with the non-negative orthant.

    With tau=1 this is {s in [0,1]^n : ||s||_1 <= k}, the feasible set of the
    rate-constrained attribution problem.
    """

    n: int
    k: int
    tau: float = 1.0

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise InputError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")

    @property
    def point_shape(self):
        return (self.n,)

    def lmo(self, gradient):
        return lmo_nonneg_ksparse(gradient, self)

    def contains(self, point, tol=DEFAULT_MEMBERSHIP_TOL):
        point = _as_vector(point, self.n, "point")
        if point.min(initial=0.0) < -tol:
            return False
        if point.max(initial=0.0) > self.tau + tol:
            return False
        return bool(point.sum() <= self.tau * self.k + tol)

    def initial_point(self):
        return np.zeros(self.n)

    def vertices(self):
        """All vertices: supports of size <= k with entries tau, plus 0."""
        from itertools import combinations

        out = [np.zeros(self.n)]
        for size in range(1, self.k + 1):
            for support in combinations(range(self.n), size):
                v = np.zeros(self.n)
                v[list(support)] = self.tau
                out.append(v)
        return out


@dataclass(frozen=True)
class BirkhoffPolytope:
    """Doubly stochastic n x n matrices; vertices are the permutation matrices."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"n must be >= 1, got {self.n}")

    @property
    def point_shape(self):
        return (self.n, self.n)

    def lmo(self, gradient):
        return lmo_birkhoff(gradient)

    def contains(self, point, tol=DEFAULT_MEMBERSHIP_TOL):
        point = np.asarray(point, dtype=np.float64)
        if point.shape != (self.n, self.n):
            raise InputError(
                f"point must have shape ({self.n}, {self.n}), got {point.shape}"
            )
        if point.min() < -tol:
            return False
        if np.abs(point.sum(axis=1) - 1.0).max() > tol:
            return False
        return bool(np.abs(point.sum(axis=0) - 1.0).max() <= tol)

    def initial_point(self):
        return np.full((self.n, self.n), 1.0 / self.n)

    def vertices(self):
        """All permutation matrices (n! of them; small n only)."""
        from itertools import permutations

        eye = np.eye(self.n)
        return [eye[list(perm)] for perm in permutations(range(self.n))]


def lmo_ksparse(gradient, region):
    """Vertex of the k-sparse polytope minimizing <gradient, v>.

    Picks the k components of largest |gradient| (ties to the lowest index)
    and sets each to -tau * sign(gradient); a zero gradient component gets
    +tau.  O(n log k) via a bounded heap.
    """
    gradient = _as_vector(gradient, region.n, "gradient")
    idx = _kernels.top_k_abs(gradient, region.k)
    v = np.zeros(region.n)
    v[idx] = np.where(gradient[idx] > 0.0, -region.tau, region.tau)
    return v


def lmo_nonneg_ksparse(gradient, region):
    """Vertex of the non-negative k-sparse polytope minimizing <gradient, v>.

    Sets tau at the (at most k) components where the gradient is negative
    and most negative (ties to the lowest index); with fewer than k negative
    components the vertex has fewer non-zeros, and a non-negative gradient
    yields the zero vector.
    """
    gradient = _as_vector(gradient, region.n, "gradient")
    idx = _kernels.most_negative_k(gradient, region.k)
    v = np.zeros(region.n)
    v[idx] = region.tau
    return v


def lmo_birkhoff(cost):
    """Permutation matrix minimizing the Frobenius inner product with ``cost``.

    Solved exactly with the O(n^3) Hungarian method on the dense cost matrix.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise InputError(f"cost must be a square matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise InputError("cost matrix must be finite")
    col = _kernels.hungarian(cost)
    n = cost.shape[0]
    perm = np.zeros((n, n))
    perm[np.arange(n), col] = 1.0
    return perm


def contains(region, point, tol=DEFAULT_MEMBERSHIP_TOL):
    """True iff ``point`` satisfies all invariants of ``region`` within ``tol``."""
    return region.contains(point, tol)

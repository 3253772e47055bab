"""Constant-factor k-means: D^2 seeding, single-swap local search, Lloyd steps.

Ties between equidistant centers always go to the lowest center index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .linalg import as_matrix
from .model import cluster_means

log = logging.getLogger(__name__)

# Rows of the candidate-by-point distance block evaluated at once in swap search.
_SWAP_CHUNK = 256
SWAP_MIN_GAIN = 1e-6


@dataclass(frozen=True, eq=False)
class KMeansSolution:
    centers: np.ndarray
    labels: np.ndarray
    cost: float
    iterations: int
    swaps: int = 0


def sq_distances(A: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Exact squared distances (n, k) computed from differences, not the expanded form."""
    out = np.empty((A.shape[0], centers.shape[0]))
    for j, c in enumerate(centers):
        diff = A - c
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def assign(A: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels (lowest index on ties) and the squared distances to them."""
    D = sq_distances(A, centers)
    labels = np.argmin(D, axis=1)
    return labels, D[np.arange(A.shape[0]), labels]


def d2_seed(A, k: int, seed) -> np.ndarray:
    """k distinct initial centers by squared-distance-weighted sampling."""
    A = as_matrix(A)
    return A[d2_seed_indices(A, k, seed)].copy()


def d2_seed_indices(A: np.ndarray, k: int, seed) -> np.ndarray:
    n = A.shape[0]
    if not 1 <= k <= n:
        raise InputError(f"k must be in [1, {n}], got {k}")
    distinct = np.unique(A, axis=0).shape[0]
    if k > distinct:
        raise InputError(f"k={k} exceeds the number of distinct points ({distinct})")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    diff = A - A[chosen[0]]
    closest = np.einsum("ij,ij->i", diff, diff)
    for _ in range(1, k):
        total = closest.sum()
        idx = int(rng.choice(n, p=closest / total))
        chosen.append(idx)
        diff = A - A[idx]
        np.minimum(closest, np.einsum("ij,ij->i", diff, diff), out=closest)
    return np.asarray(chosen, dtype=np.int64)


def _nearest_two(D: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, k = D.shape
    rows = np.arange(n)
    first = np.argmin(D, axis=1)
    d1 = D[rows, first]
    if k == 1:
        return first, d1, np.full(n, np.inf)
    masked = D.copy()
    masked[rows, first] = np.inf
    return first, d1, masked.min(axis=1)


def swap_local_search(A, init, candidate_pool=None, max_swaps: int = 100) -> KMeansSolution:
    """Single-swap local search over (center, pool point) exchanges.

    Each pass evaluates every swap exactly and applies the best one if it cuts
    the cost by at least a relative ``SWAP_MIN_GAIN``; stops at a local optimum
    or after ``max_swaps`` swaps. Centers may start anywhere; only pool points
    are swapped in.
    """
    A = as_matrix(A)
    centers = as_matrix(init, "init").copy()
    n = A.shape[0]
    k = centers.shape[0]
    pool = np.arange(n) if candidate_pool is None else np.asarray(candidate_pool, dtype=np.int64)
    if pool.size == 0:
        raise InputError("candidate pool is empty")
    sq_norms = np.einsum("ij,ij->i", A, A)
    D = sq_distances(A, centers)
    swaps = 0
    while swaps < max_swaps:
        first, d1, d2 = _nearest_two(D)
        cost = float(d1.sum())
        onehot = np.zeros((n, k))
        onehot[np.arange(n), first] = 1.0
        best_cost, best = cost, None
        for start in range(0, pool.size, _SWAP_CHUNK):
            P = pool[start : start + _SWAP_CHUNK]
            Dp = sq_norms[P][:, None] - 2.0 * (A[P] @ A.T) + sq_norms[None, :]
            np.maximum(Dp, 0.0, out=Dp)
            Dp[np.arange(P.size), P] = 0.0
            m1 = np.minimum(Dp, d1)
            # cost(p, j) = sum_i min(Dp_i, d1_i) + sum_{i: first_i = j} [min(Dp_i, d2_i) - min(Dp_i, d1_i)]
            costs = m1.sum(axis=1)[:, None] + (np.minimum(Dp, d2) - m1) @ onehot
            flat = int(np.argmin(costs))
            if costs.flat[flat] < best_cost:
                best_cost, best = float(costs.flat[flat]), (int(P[flat // k]), flat % k)
        if best is None or best_cost > cost * (1.0 - SWAP_MIN_GAIN):
            break
        p, j = best
        centers[j] = A[p]
        diff = A - A[p]
        D[:, j] = np.einsum("ij,ij->i", diff, diff)
        swaps += 1
        log.debug("swap %d: center %d <- point %d, cost %.6g -> %.6g", swaps, j, p, cost, best_cost)
    labels, dist = assign(A, centers)
    return KMeansSolution(centers, labels, float(dist.sum()), swaps, swaps)


def lloyd_step(A, centers) -> tuple[np.ndarray, np.ndarray]:
    """Assign to the nearest center, then move each center to its cluster mean.

    A center whose cluster comes out empty stays where it was.
    """
    A = as_matrix(A)
    centers = as_matrix(centers, "centers")
    labels, _ = assign(A, centers)
    sizes, means = cluster_means(A, labels, centers.shape[0])
    new_centers = np.where(sizes[:, None] > 0, means, centers)
    return labels, new_centers


def lloyd(A: np.ndarray, centers: np.ndarray, max_iter: int = 1000) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Lloyd steps until the labels stop changing. Returns (labels, centers, iterations, converged)."""
    prev = None
    for it in range(1, max_iter + 1):
        labels, centers = lloyd_step(A, centers)
        if prev is not None and np.array_equal(labels, prev):
            return labels, centers, it, True
        prev = labels
    labels, _ = assign(A, centers)
    return labels, centers, max_iter, False


def approx_kmeans(A, k: int, seed, max_swaps: int | None = None, max_lloyd: int = 1000) -> KMeansSolution:
    """D^2 seeding, swap local search over all points, then Lloyd to convergence."""
    A = as_matrix(A)
    idx = d2_seed_indices(A, k, seed)
    swapped = swap_local_search(A, A[idx], None, 50 * k if max_swaps is None else max_swaps)
    labels, centers, it, _ = lloyd(A, swapped.centers, max_iter=max_lloyd)
    labels, dist = assign(A, centers)
    return KMeansSolution(centers, labels, float(dist.sum()), it, swapped.swaps)

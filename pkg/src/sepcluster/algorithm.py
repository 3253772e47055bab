"""The three-part clustering algorithm.

Part I projects the rows onto the top-k right singular subspace and runs a
constant-factor k-means on the projection. Part II keeps, for each center,
only the points whose projected distance to it is at most a third of their
distance to every other center, and re-centers on the original rows of those
core sets. Part III runs Lloyd steps from the re-centered means.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, InputError, NumericError, SepClusterError
from .kmeans import KMeansSolution, approx_kmeans, assign, lloyd_step, sq_distances
from .linalg import as_matrix, project_rows, truncated_svd
from .model import cluster_means

CORE_RATIO = 1.0 / 3.0


def _tag(part: str):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except SepClusterError as exc:
                if exc.part is None:
                    exc.part = part
                raise

        return wrapper

    return deco


@dataclass(frozen=True)
class ClusterOptions:
    seed: int = 0
    max_iter: int = 500
    run_part3: bool = True


@dataclass(frozen=True, eq=False)
class PartOneResult:
    projected: np.ndarray
    basis: np.ndarray  # (k, d) orthonormal rows spanning the projection
    nu: np.ndarray
    z_labels: np.ndarray
    kmeans: KMeansSolution


@dataclass(frozen=True, eq=False)
class PartThreeResult:
    labels: np.ndarray
    centers: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class ClusterRunResult:
    nu: np.ndarray
    z_labels: np.ndarray
    core_sets: list[np.ndarray]
    theta: np.ndarray
    empty_core: np.ndarray  # bool per center: S_r empty, theta_r fell back to nu_r
    final_labels: np.ndarray
    final_centers: np.ndarray
    part3_iterations: int
    part3_converged: bool
    projected: np.ndarray
    basis: np.ndarray
    kmeans: KMeansSolution

    @property
    def k(self) -> int:
        return self.nu.shape[0]

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "nu": self.nu.tolist(),
            "z_labels": self.z_labels.tolist(),
            "core_set_sizes": [int(s.size) for s in self.core_sets],
            "theta": self.theta.tolist(),
            "empty_core": [bool(x) for x in self.empty_core],
            "final_labels": self.final_labels.tolist(),
            "final_centers": self.final_centers.tolist(),
            "part1_kmeans_cost": self.kmeans.cost,
            "part1_swaps": self.kmeans.swaps,
            "part1_lloyd_iterations": self.kmeans.iterations,
            "part3_iterations": self.part3_iterations,
            "part3_converged": self.part3_converged,
        }


def _check_k(A: np.ndarray, k: int) -> None:
    n, d = A.shape
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= min(n, d):
        raise InputError(f"k must be an integer in [1, min(n, d) = {min(n, d)}], got {k}")


@_tag("I")
def part_one(A, k: int, seed=0) -> PartOneResult:
    A = as_matrix(A)
    _check_k(A, k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        svd = truncated_svd(A, k)
    if not svd.converged:
        raise NumericError(
            f"top-{k} subspace did not converge in {svd.iterations} iterations "
            f"(leading singular values {svd.singular_values.tolist()})"
        )
    basis = svd.right_singular_vectors
    projected = project_rows(A, basis)
    # k-means on the coordinates in the basis: same distances as on the projected rows
    coords = A @ basis.T
    sol = approx_kmeans(coords, k, seed)
    nu = sol.centers @ basis
    z_labels, _ = assign(projected, nu)
    return PartOneResult(projected, basis, nu, z_labels, sol)


def core_sets(projected, nu, ratio: float = CORE_RATIO) -> list[np.ndarray]:
    """S_r = {i : ||P_i - nu_r|| <= ratio * ||P_i - nu_s|| for every s != r}.

    A point can only qualify twice when it sits on two coincident centers; it
    then goes to the lowest index so the sets stay disjoint.
    """
    dist = np.sqrt(sq_distances(as_matrix(projected), as_matrix(nu, "nu")))
    k = dist.shape[1]
    taken = np.zeros(dist.shape[0], dtype=bool)
    out = []
    for r in range(k):
        ok = ~taken
        for s in range(k):
            if s != r:
                ok &= dist[:, r] <= ratio * dist[:, s]
        taken |= ok
        out.append(np.flatnonzero(ok))
    return out


@_tag("II")
def part_two(projected, A, nu) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Core sets and their means over the original rows. Returns (core_sets, theta, empty_core)."""
    A = as_matrix(A)
    nu = as_matrix(nu, "nu")
    sets = core_sets(projected, nu)
    theta = nu.copy()
    empty = np.zeros(len(sets), dtype=bool)
    for r, idx in enumerate(sets):
        if idx.size:
            theta[r] = A[idx].mean(axis=0)
        else:
            empty[r] = True
    return sets, theta, empty


def _bbox_diagonal(A: np.ndarray) -> float:
    return float(np.linalg.norm(A.max(axis=0) - A.min(axis=0)))


@_tag("III")
def part_three(A, theta, max_iter: int = 500) -> PartThreeResult:
    """Lloyd steps until labels repeat or no center moves more than 1e-9 of the data spread."""
    A = as_matrix(A)
    centers = as_matrix(theta, "theta")
    threshold = 1e-9 * _bbox_diagonal(A)
    prev = None
    for it in range(1, max_iter + 1):
        labels, new_centers = lloyd_step(A, centers)
        moved = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if moved <= threshold or (prev is not None and np.array_equal(labels, prev)):
            labels, _ = assign(A, centers)
            return PartThreeResult(labels, centers, it, True)
        prev = labels
    labels, _ = assign(A, centers)
    return PartThreeResult(labels, centers, max_iter, False)


def cluster(A, k: int, options: ClusterOptions | None = None) -> ClusterRunResult:
    opts = options or ClusterOptions()
    A = as_matrix(A)
    one = part_one(A, k, opts.seed)
    sets, theta, empty = part_two(one.projected, A, one.nu)
    if opts.run_part3:
        three = part_three(A, theta, opts.max_iter)
    else:
        labels, _ = assign(A, theta)
        three = PartThreeResult(labels, theta.copy(), 0, True)
    return ClusterRunResult(
        nu=one.nu,
        z_labels=one.z_labels,
        core_sets=sets,
        theta=theta,
        empty_core=empty,
        final_labels=three.labels,
        final_centers=three.centers,
        part3_iterations=three.iterations,
        part3_converged=three.converged,
        projected=one.projected,
        basis=one.basis,
        kmeans=one.kmeans,
    )


def clustering_cost(A: np.ndarray, labels: np.ndarray, k: int) -> float:
    """k-means cost of a labelling with each cluster at its own mean."""
    _, means = cluster_means(A, labels, k)
    diff = A - means[labels]
    return float(np.sum(diff * diff))


__all__ = [
    "ClusterOptions",
    "ClusterRunResult",
    "PartOneResult",
    "PartThreeResult",
    "cluster",
    "clustering_cost",
    "core_sets",
    "part_one",
    "part_three",
    "part_two",
]

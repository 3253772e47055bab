"""Target clusterings and the quantities defined on them.

A :class:`TargetClustering` fixes labels, sizes and means. From it and the data
matrix we derive the deviation scale of each cluster, the achieved separation
constant, and the per-point proximity margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLineError, InputError
from .linalg import as_matrix, frobenius_norm, spectral_norm


def as_labels(labels, n: int | None = None) -> np.ndarray:
    lab = np.asarray(labels)
    if lab.ndim != 1:
        raise InputError("labels must be a 1-D sequence")
    if lab.size and not np.issubdtype(lab.dtype, np.integer):
        if not np.all(np.equal(np.mod(lab, 1), 0)):
            raise InputError("labels must be integers")
    lab = lab.astype(np.int64)
    if n is not None and lab.shape[0] != n:
        raise InputError(f"expected {n} labels, got {lab.shape[0]}")
    if lab.size and lab.min() < 0:
        raise InputError("labels must be non-negative")
    return lab


def cluster_means(A: np.ndarray, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster sizes and means; empty clusters get a zero row."""
    sizes = np.bincount(labels, minlength=k)
    sums = np.zeros((k, A.shape[1]))
    np.add.at(sums, labels, A)
    means = np.divide(sums, sizes[:, None], out=np.zeros_like(sums), where=sizes[:, None] > 0)
    return sizes, means


@dataclass(frozen=True, eq=False)
class TargetClustering:
    labels: np.ndarray
    k: int
    sizes: np.ndarray
    means: np.ndarray

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def center_matrix(self) -> np.ndarray:
        return self.means[self.labels]

    def members(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.labels == r)

    def to_json(self) -> dict:
        return {"k": int(self.k), "labels": [int(x) for x in self.labels]}


def build_target(A, labels, k: int | None = None) -> TargetClustering:
    A = as_matrix(A)
    lab = as_labels(labels, A.shape[0])
    if k is None:
        k = int(lab.max()) + 1
    if lab.max() >= k:
        raise InputError(f"label {int(lab.max())} out of range for k={k}")
    sizes, means = cluster_means(A, lab, k)
    empty = np.flatnonzero(sizes == 0)
    if empty.size:
        raise InputError(f"empty target cluster(s): {empty.tolist()}")
    return TargetClustering(lab, int(k), sizes, means)


def kmeans_cost(A, labels, centers) -> float:
    """Sum of squared distances of each row to the center of its label."""
    A = as_matrix(A)
    centers = as_matrix(centers, "centers")
    lab = as_labels(labels, A.shape[0])
    diff = A - centers[lab]
    return float(np.sum(diff * diff))


@dataclass(frozen=True, eq=False)
class SpectralStats:
    spec_norm: float
    frob_norm: float
    delta: np.ndarray
    degenerate: bool
    separation_c: float
    k: int

    @property
    def frob_sq(self) -> float:
        return self.frob_norm**2

    def to_json(self) -> dict:
        return {
            "spec_norm": self.spec_norm,
            "frob_norm": self.frob_norm,
            "delta": [float(x) for x in self.delta],
            "degenerate": bool(self.degenerate),
            "separation_c": _json_float(self.separation_c),
        }


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def deltas(spec_norm_value: float, frob_norm_value: float, sizes, k: int) -> np.ndarray:
    scale = min(math.sqrt(k) * spec_norm_value, frob_norm_value)
    return scale / np.sqrt(np.asarray(sizes, dtype=float))


def separation_constant(means: np.ndarray, delta: np.ndarray) -> float:
    """min over pairs of ||mu_r - mu_s|| / (delta_r + delta_s).

    Coincident means give 0; a pair with zero total deviation and distinct
    means contributes +inf.
    """
    k = means.shape[0]
    best = math.inf
    for r in range(k):
        for s in range(r + 1, k):
            dist = float(np.linalg.norm(means[r] - means[s]))
            if dist == 0.0:
                return 0.0
            denom = float(delta[r] + delta[s])
            if denom > 0.0:
                best = min(best, dist / denom)
    return best


def spectral_stats(A, T: TargetClustering) -> SpectralStats:
    A = as_matrix(A)
    R = A - T.center_matrix
    spec = spectral_norm(R)
    frob = frobenius_norm(R)
    delta = deltas(spec, frob, T.sizes, T.k)
    degenerate = frob**2 < T.k * spec**2
    return SpectralStats(spec, frob, delta, bool(degenerate), separation_constant(T.means, delta), T.k)


# ---------------------------------------------------------------------------
# Proximity condition


@dataclass(frozen=True, eq=False)
class ProximityReport:
    gamma: float
    gaps: np.ndarray  # (k, k), zero diagonal
    bad_points: np.ndarray
    bad_fraction: float
    # min over r != own of (margin_{i,r} / gap_{own,r}); +inf when every gap is 0 and margins >= 0
    margin_ratio: np.ndarray = field(repr=False)


def pair_gaps(sizes, spec_norm_value: float) -> np.ndarray:
    inv = 1.0 / np.sqrt(np.asarray(sizes, dtype=float))
    gaps = (inv[:, None] + inv[None, :]) * spec_norm_value
    np.fill_diagonal(gaps, 0.0)
    return gaps


def proximity_margins(A: np.ndarray, T: TargetClustering) -> np.ndarray:
    """margin[i, r] = ||Abar_i - mu_r|| - ||Abar_i - mu_own||, Abar_i the foot of A_i on the mu_own--mu_r line.

    The own-cluster column is +inf.
    """
    from .linalg import line_parameters

    k = T.k
    margins = np.full((A.shape[0], k), np.inf)
    for s in range(k):
        idx = T.members(s)
        if idx.size == 0:
            continue
        for r in range(k):
            if r == s:
                continue
            try:
                # parameter along mu_s -> mu_r: foot = mu_s + t (mu_r - mu_s)
                t = line_parameters(A[idx], T.means[s], T.means[r])
            except DegenerateLineError as exc:
                raise DegenerateLineError(f"means of clusters {s} and {r} coincide", pair=(s, r)) from exc
            dist = float(np.linalg.norm(T.means[r] - T.means[s]))
            margins[idx, r] = (np.abs(1.0 - t) - np.abs(t)) * dist
    return margins


def proximity_report(A, T: TargetClustering, gamma: float, spec_norm_value: float | None = None) -> ProximityReport:
    A = as_matrix(A)
    if T.k < 2:
        raise InputError("proximity needs k >= 2")
    if not gamma > 0:
        raise InputError("gamma must be positive")
    if spec_norm_value is None:
        spec_norm_value = spectral_norm(A - T.center_matrix)
    gaps = pair_gaps(T.sizes, spec_norm_value)
    margins = proximity_margins(A, T)
    own_gaps = gaps[T.labels]  # (n, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(own_gaps > 0, margins / np.where(own_gaps > 0, own_gaps, 1.0),
                         np.where(margins >= 0, np.inf, -np.inf))
    own = np.arange(A.shape[0])
    ratio[own, T.labels] = np.inf
    margin_ratio = ratio.min(axis=1)
    bad = np.flatnonzero(np.any(margins < gamma * own_gaps, axis=1))
    return ProximityReport(float(gamma), gaps, bad, bad.size / A.shape[0], margin_ratio)

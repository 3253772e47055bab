"""Seeded synthetic instances with a certificate of the condition they meet.

Three families: spherical Gaussian mixtures with means placed to reach a
requested separation constant, planted-partition adjacency matrices, and
well-clusterable instances in the sense that dropping to k-1 centers costs at
least 1/eps times the target k-means cost.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GenerationError, InputError
from .kmeans import approx_kmeans
from .model import TargetClustering, build_target, spectral_stats
from .seeds import derive_seed

MAX_LABEL_ATTEMPTS = 100
MAX_RESCALINGS = 20


# ---------------------------------------------------------------------------
# Gaussian mixtures


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    k: int
    d: int
    weights: np.ndarray
    means: np.ndarray  # (k, d)
    sigmas: np.ndarray  # per-cluster std in every direction
    n: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        sig = np.broadcast_to(np.asarray(self.sigmas, dtype=float), (self.k,)).copy()
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "sigmas", sig)
        if self.k < 1 or self.d < 1:
            raise InputError("k and d must be positive")
        if w.shape != (self.k,) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("weights must be k positive numbers summing to 1")
        if mu.shape != (self.k, self.d) or not np.all(np.isfinite(mu)):
            raise InputError(f"means must be a finite ({self.k}, {self.d}) array")
        if np.any(sig < 0) or not np.all(np.isfinite(sig)):
            raise InputError("sigmas must be finite and non-negative")
        if self.n < self.k:
            raise InputError("need n >= k")

    @property
    def sigma_max(self) -> float:
        return float(self.sigmas.max())

    @property
    def w_min(self) -> float:
        return float(self.weights.min())

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "d": self.d,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "sigmas": self.sigmas.tolist(),
            "n": self.n,
        }

    @classmethod
    def from_json(cls, obj: dict) -> MixtureSpec:
        return cls(int(obj["k"]), int(obj["d"]), obj["weights"], obj["means"], obj["sigmas"], int(obj["n"]))


def draw_labels(rng: np.random.Generator, weights: np.ndarray, n: int) -> np.ndarray:
    """n labels from ``weights``, redrawn until every cluster is non-empty."""
    k = weights.shape[0]
    for _ in range(MAX_LABEL_ATTEMPTS):
        labels = rng.choice(k, size=n, p=weights)
        if np.bincount(labels, minlength=k).min() > 0:
            return labels.astype(np.int64)
    raise InputError(f"a cluster stayed empty after {MAX_LABEL_ATTEMPTS} draws; weights too small for n={n}")


def gen_gaussian_mixture(spec: MixtureSpec, seed) -> tuple[np.ndarray, TargetClustering]:
    rng = np.random.default_rng(seed)
    labels = draw_labels(rng, spec.weights, spec.n)
    noise = rng.standard_normal((spec.n, spec.d))
    A = spec.means[labels] + spec.sigmas[labels, None] * noise
    return A, build_target(A, labels, spec.k)


def _uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def orthonormal_directions(k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """k random orthonormal d-vectors as rows."""
    if d < k:
        raise InputError(f"need d >= k for orthogonal mean directions, got d={d}, k={k}")
    Q, R = np.linalg.qr(rng.standard_normal((d, k)))
    return (Q * np.sign(np.diag(R))).T


@dataclass(frozen=True)
class MeanPlacement:
    target_c: float
    pilot_separation_c: float
    pair_distance: float
    rescalings: int
    pilot_seed: int


def place_separated_means(k: int, d: int, target_c: float, sigma_max: float, weights=None, n: int = 1000,
                          seed=0) -> tuple[np.ndarray, MeanPlacement]:
    """Means on scaled orthonormal directions, scaled until a pilot sample reaches ``target_c``.

    The residual A - C of a pilot draw does not depend on where the means are,
    so the first scale is computed from it directly. Sample means wander off
    the placed means by O(sigma/sqrt(n_r)), so a short pilot is rescaled by the
    missing ratio plus a small margin, at most doubling per step. All pairs end
    up at the same distance.
    """
    if target_c < 0 or sigma_max < 0:
        raise InputError("target_c and sigma_max must be non-negative")
    w = _uniform(k) if weights is None else np.asarray(weights, dtype=float)
    rng = np.random.default_rng(derive_seed(seed, 0))
    directions = orthonormal_directions(k, d, rng)
    pilot_seed = derive_seed(seed, 1)
    prng = np.random.default_rng(pilot_seed)
    labels = draw_labels(prng, w, n)
    noise = sigma_max * prng.standard_normal((n, d))

    def pilot_c(dist: float) -> float:
        means = directions * (dist / math.sqrt(2.0))
        A = means[labels] + noise
        return spectral_stats(A, build_target(A, labels, k)).separation_c

    if k == 1:
        return np.zeros((1, d)), MeanPlacement(target_c, math.inf, 0.0, 0, pilot_seed)
    base = spectral_stats(noise, build_target(noise, labels, k))
    pair = base.delta[:, None] + base.delta[None, :]
    dist = target_c * float(pair[~np.eye(k, dtype=bool)].max()) * (1.0 + 1e-3)
    if dist == 0.0:
        dist = 1.0
    achieved = pilot_c(dist)
    rescalings = 0
    while achieved < target_c:
        if rescalings == MAX_RESCALINGS:
            raise GenerationError(f"separation {target_c} not reached after {MAX_RESCALINGS} rescalings")
        dist *= 2.0 if achieved <= 0 else min(2.0, 1.001 * target_c / achieved)
        rescalings += 1
        achieved = pilot_c(dist)
    return directions * (dist / math.sqrt(2.0)), MeanPlacement(target_c, achieved, dist, rescalings, pilot_seed)


def gaussian_instance(k: int, d: int, n: int, target_c: float, sigma: float = 1.0, weights=None, seed=0):
    """Means placed for ``target_c`` on a pilot, then an independent sample. Returns (A, T, spec, placement)."""
    w = _uniform(k) if weights is None else np.asarray(weights, dtype=float)
    means, placement = place_separated_means(k, d, target_c, sigma, w, n, derive_seed(seed, 2))
    spec = MixtureSpec(k, d, w, means, np.full(k, float(sigma)), n)
    A, T = gen_gaussian_mixture(spec, derive_seed(seed, 3))
    return A, T, spec, placement


# ---------------------------------------------------------------------------
# Planted partition


@dataclass(frozen=True, eq=False)
class PlantedPartitionSpec:
    k: int
    P: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        sizes = np.asarray(self.sizes, dtype=np.int64)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "sizes", sizes)
        if P.shape != (self.k, self.k):
            raise InputError(f"P must be {self.k}x{self.k}")
        if not np.array_equal(P, P.T):
            raise InputError("P must be exactly symmetric")
        if np.any(P < 0) or np.any(P > 1):
            raise InputError("P entries must lie in [0, 1]")
        if sizes.shape != (self.k,) or np.any(sizes < 1):
            raise InputError("sizes must be k positive integers")

    @property
    def n(self) -> int:
        return int(self.sizes.sum())

    @property
    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.k), self.sizes)

    @property
    def sigma_max(self) -> float:
        return float(np.sqrt(self.P.max()))

    @property
    def w_min(self) -> float:
        return float(self.sizes.min() / self.n)

    def structured_means(self) -> np.ndarray:
        """Row r has coordinate j equal to P[r, cluster(j)]."""
        return self.P[:, self.labels]

    def to_json(self) -> dict:
        return {"k": self.k, "P": self.P.tolist(), "sizes": self.sizes.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> PlantedPartitionSpec:
        return cls(int(obj["k"]), obj["P"], obj["sizes"])


@dataclass(frozen=True, eq=False)
class PlantedConditionReport:
    c0: float
    delta: float
    sigma_max: float
    w_min: float
    threshold: float  # c0 * sigma_max * sqrt(k) * (1/w_min + ln(n/delta))
    pair_distances: np.ndarray  # exact structured-mean distances
    min_distance: float
    ratio: float  # min_distance / threshold
    holds: bool

    def to_json(self) -> dict:
        out = asdict(self)
        out["pair_distances"] = self.pair_distances.tolist()
        out["ratio"] = _finite_or_str(self.ratio)
        return out


def _finite_or_str(x: float):
    return float(x) if math.isfinite(x) else str(x)


def planted_condition(spec: PlantedPartitionSpec, c0: float = 1.0, delta: float = 0.05) -> PlantedConditionReport:
    if not 0 < delta < 1:
        raise InputError("delta must be in (0, 1)")
    k, n = spec.k, spec.n
    diff = spec.P[:, None, :] - spec.P[None, :, :]  # (k, k, t)
    dist = np.sqrt(np.einsum("rst,t->rs", diff * diff, spec.sizes.astype(float)))
    threshold = c0 * spec.sigma_max * math.sqrt(k) * (1.0 / spec.w_min + math.log(n / delta))
    off = dist[~np.eye(k, dtype=bool)]
    min_dist = float(off.min()) if off.size else math.inf
    ratio = min_dist / threshold if threshold > 0 else math.inf
    return PlantedConditionReport(c0, delta, spec.sigma_max, spec.w_min, threshold, dist, min_dist, ratio,
                                  bool(ratio >= 1.0))


def gen_planted_partition(spec: PlantedPartitionSpec, seed, c0: float = 1.0, delta: float = 0.05):
    """Symmetric 0/1 adjacency matrix; the diagonal is drawn like any other entry.

    Returns (A, T, condition_report). T uses the empirical row means; the
    report uses the structured means.
    """
    rng = np.random.default_rng(seed)
    labels = spec.labels
    n = spec.n
    probs = spec.P[labels][:, labels]
    upper = np.triu(rng.random((n, n)) < probs)
    A = (upper | np.triu(upper, 1).T).astype(float)
    return A, build_target(A, labels, spec.k), planted_condition(spec, c0, delta)


# ---------------------------------------------------------------------------
# (k-1)-vs-k cost separated instances


@dataclass(frozen=True)
class OrssCertificate:
    epsilon_target: float
    epsilon_achieved: float  # target k-means cost / best (k-1)-clustering cost found
    target_cost: float
    best_km1_cost: float
    best_km1_source: str
    pair_distance: float
    attempts: int
    heuristic: bool = True  # best_km1_cost only upper-bounds the optimal (k-1) cost
    note: str = field(default="(k-1) cost is the best of approx_kmeans restarts and all pairwise merges")

    def to_json(self) -> dict:
        return asdict(self)


def best_km1_cost(A: np.ndarray, T: TargetClustering, restarts: int = 10, seed=0) -> tuple[float, str]:
    """Cheapest (k-1)-clustering found among k-means restarts and merges of two target clusters."""
    k = T.k
    target = float(np.sum((A - T.center_matrix) ** 2))
    best, source = math.inf, ""
    for r in range(k):
        for s in range(k):
            if r == s:
                continue
            gap = float(np.sum((T.means[r] - T.means[s]) ** 2))
            # T_r moved onto mu_s, and T_r, T_s merged at their joint mean
            for cost, tag in ((target + T.sizes[r] * gap, f"assign {r}->{s}"),
                              (target + T.sizes[r] * T.sizes[s] / (T.sizes[r] + T.sizes[s]) * gap, f"merge {r}+{s}")):
                if cost < best:
                    best, source = cost, tag
    if k - 1 >= 1:
        for i in range(restarts):
            sol = approx_kmeans(A, k - 1, derive_seed(seed, i))
            if sol.cost < best:
                best, source = sol.cost, f"approx_kmeans restart {i}"
    return best, source


def gen_orss(k: int, d: int, epsilon_target: float, n: int, seed, sigma: float = 1.0, restarts: int = 10):
    """Tight, far-apart spherical clusters, spread until the (k-1)/k cost ratio reaches 1/eps."""
    if not 0 < epsilon_target < 0.25:
        raise InputError("epsilon_target must lie in (0, 1/4)")
    if k < 2:
        raise InputError("need k >= 2")
    rng = np.random.default_rng(seed)
    directions = orthonormal_directions(k, d, rng)
    labels = draw_labels(rng, _uniform(k), n)
    noise = sigma * rng.standard_normal((n, d))
    base = build_target(noise, labels, k)
    noise_cost = float(np.sum((noise - base.center_matrix) ** 2))
    sizes = base.sizes.astype(float)
    harmonic = max((sizes[r] + sizes[s]) / (sizes[r] * sizes[s]) for r in range(k) for s in range(r + 1, k))
    dist = math.sqrt((1.0 / epsilon_target - 1.0) * noise_cost * harmonic)
    if dist == 0.0:
        dist = 1.0
    for attempt in range(1, MAX_RESCALINGS + 1):
        A = directions[labels] * (dist / math.sqrt(2.0)) + noise
        T = build_target(A, labels, k)
        target = float(np.sum((A - T.center_matrix) ** 2))
        km1, source = best_km1_cost(A, T, restarts, derive_seed(seed, 7))
        eps = target / km1 if km1 > 0 else 0.0
        if eps <= epsilon_target:
            cert = OrssCertificate(epsilon_target, float(eps), target, float(km1), source, dist, attempt)
            return A, T, cert
        dist *= 2.0
    raise GenerationError(f"could not reach eps <= {epsilon_target}")

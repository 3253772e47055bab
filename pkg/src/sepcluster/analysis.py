"""Ground-truth evaluation and inequality verifiers.

Every verifier returns :class:`InequalityCheck` records whose ``holds`` flag is
recomputable from ``lhs``, ``rhs`` and the recorded absolute slack. Bounds that
depend on the separation constant always use the measured constant of the
instance. Verifiers whose premise does not apply to an instance report
``rhs = inf`` and ``context["applicable"] = False``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .algorithm import ClusterRunResult, clustering_cost, core_sets
from .errors import InputError
from .kmeans import assign
from .linalg import as_matrix, line_parameters, project_rows, spectral_norm, truncated_svd
from .model import SpectralStats, TargetClustering, cluster_means, proximity_report, spectral_stats

REL_SLACK = 1e-9
THM41_FACTOR = 100.0
COR47_KAPPA = 1e4


@dataclass(frozen=True)
class InequalityCheck:
    fact_id: str
    lhs: float
    rhs: float
    holds: bool
    context: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs == math.inf:
            return 0.0
        if self.rhs == 0.0:
            return 0.0 if self.lhs <= 0.0 else math.inf
        return self.lhs / self.rhs


def make_check(fact_id: str, lhs: float, rhs: float, atol: float = 0.0, **context) -> InequalityCheck:
    lhs, rhs = float(lhs), float(rhs)
    if math.isnan(lhs) or math.isnan(rhs):
        holds = False
    elif rhs == math.inf:
        holds = True
    else:
        holds = lhs <= rhs + REL_SLACK * max(abs(lhs), abs(rhs)) + atol
    if atol:
        context["atol"] = atol
    return InequalityCheck(fact_id, lhs, rhs, bool(holds), context)


def _dist_atol(A: np.ndarray) -> float:
    """Rounding floor for distances between averaged rows of A."""
    return 1e-12 * (1.0 + float(np.max(np.abs(A))))


# ---------------------------------------------------------------------------
# Matching and evaluation


@dataclass(frozen=True, eq=False)
class CenterMatching:
    permutation: np.ndarray  # permutation[r] = index of the found center matched to target r
    distances: np.ndarray

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.permutation.size)
        return inv


def match_centers(target_means, found_centers) -> CenterMatching:
    """Bijection minimizing the total Euclidean distance between matched centers."""
    mu = as_matrix(target_means, "target_means")
    nu = as_matrix(found_centers, "found_centers")
    if mu.shape != nu.shape:
        raise InputError(f"need equal center counts and dimensions, got {mu.shape} and {nu.shape}")
    cost = np.linalg.norm(mu[:, None, :] - nu[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    return CenterMatching(perm.astype(np.int64), cost[np.arange(mu.shape[0]), perm])


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    matching: CenterMatching
    per_cluster_misclassified: np.ndarray
    total_misclassified: int
    cost_ratio: float
    center_distances: np.ndarray

    def to_json(self) -> dict:
        return {
            "permutation": self.matching.permutation.tolist(),
            "per_cluster_misclassified": self.per_cluster_misclassified.tolist(),
            "total_misclassified": self.total_misclassified,
            "cost_ratio": self.cost_ratio if math.isfinite(self.cost_ratio) else "inf",
            "center_distances": self.center_distances.tolist(),
        }


def misclassified_counts(T: TargetClustering, found_labels: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    expected = permutation[T.labels]
    wrong = found_labels != expected
    return np.bincount(T.labels[wrong], minlength=T.k)


def cost_ratio(A: np.ndarray, T: TargetClustering, found_labels: np.ndarray, k: int, frob_sq: float | None = None) -> float:
    found_cost = clustering_cost(A, found_labels, k)
    if frob_sq is None:
        frob_sq = float(np.sum((A - T.center_matrix) ** 2))
    if frob_sq == 0.0:
        return 1.0 if found_cost == 0.0 else math.inf
    return found_cost / frob_sq


def evaluate(A, T: TargetClustering, found_labels, found_centers) -> EvaluationReport:
    """Match found centers to target means, count misassigned points, compare k-means costs.

    The cost of the found clustering is taken at the means of its clusters.
    """
    A = as_matrix(A)
    found_labels = np.asarray(found_labels, dtype=np.int64)
    match = match_centers(T.means, found_centers)
    per = misclassified_counts(T, found_labels, match.permutation)
    ratio = cost_ratio(A, T, found_labels, T.k)
    return EvaluationReport(match, per, int(per.sum()), ratio, match.distances.copy())


# ---------------------------------------------------------------------------
# Verifiers


def _stats(A, T, stats):
    return stats if stats is not None else spectral_stats(A, T)


def _c_inverse_power(c: float, p: int) -> float:
    return 0.0 if c == math.inf else c ** (-p)


def verify_fact1(A, T: TargetClustering, projected=None, stats: SpectralStats | None = None) -> InequalityCheck:
    """||Ahat - C||_F^2 <= 8 min{k ||A - C||^2, ||A - C||_F^2}."""
    A = as_matrix(A)
    st = _stats(A, T, stats)
    if projected is None:
        projected = project_rows(A, truncated_svd(A, T.k).right_singular_vectors)
    lhs = float(np.sum((projected - T.center_matrix) ** 2))
    rhs = 8.0 * min(T.k * st.spec_norm**2, st.frob_norm**2)
    atol = 1e-12 * float(np.sum(A * A))
    return make_check("fact1", lhs, rhs, atol, k=T.k, n=T.n)


def verify_fact2(A, T: TargetClustering, nu, stats: SpectralStats | None = None) -> list[InequalityCheck]:
    """Matched ||mu_r - nu_r|| <= 6 Delta_r for every r."""
    A = as_matrix(A)
    st = _stats(A, T, stats)
    match = match_centers(T.means, nu)
    atol = _dist_atol(A)
    return [
        make_check("fact2", match.distances[r], 6.0 * st.delta[r], atol, cluster=r, matched=int(match.permutation[r]))
        for r in range(T.k)
    ]


def verify_subset_mean(A_r, X) -> tuple[InequalityCheck, InequalityCheck]:
    """For X a subset of one cluster's rows ``A_r``:

    |X| ||mu(X) - mu_r|| <= sqrt|X| ||A_r - C_r||  and
    |X| ||mu(X) - mu_r|| == (n_r - |X|) ||mu(rest) - mu_r||.
    """
    A_r = as_matrix(A_r, "A_r")
    n_r = A_r.shape[0]
    X = np.unique(np.asarray(X, dtype=np.int64))
    if X.size and (X.min() < 0 or X.max() >= n_r):
        raise InputError("subset indices out of range")
    mu = A_r.mean(axis=0)
    rest = np.setdiff1d(np.arange(n_r), X)
    left = X.size * float(np.linalg.norm(A_r[X].mean(axis=0) - mu)) if X.size else 0.0
    right = rest.size * float(np.linalg.norm(A_r[rest].mean(axis=0) - mu)) if rest.size else 0.0
    bound = math.sqrt(X.size) * spectral_norm(A_r - mu)
    scale = 1.0 + n_r * float(np.max(np.abs(A_r)))
    atol = 1e-12 * scale
    return (
        make_check("factA3-bound", left, bound, atol, size=int(X.size), n_r=n_r),
        make_check("factA3-identity", abs(left - right), 1e-9 * scale, size=int(X.size), n_r=n_r),
    )


def verify_fact3(A, T: TargetClustering, r: int, removed_set, added_sets: dict,
                 stats: SpectralStats | None = None) -> InequalityCheck:
    """Mean shift of T_r after removing ``removed_set`` and adding ``added_sets[s]`` from each T_s.

    Preconditions (raised as InputError): removed points lie in T_r, added
    points lie in their T_s, both fractions are below 1/4, and every added
    point x has ||x - mu_s|| >= (2/3) ||x - mu_r||.
    """
    A = as_matrix(A)
    st = _stats(A, T, stats)
    n_r = int(T.sizes[r])
    removed = np.unique(np.asarray(removed_set, dtype=np.int64))
    if removed.size and np.any(T.labels[removed] != r):
        raise InputError("removed points must belong to the cluster")
    rho_out = removed.size / n_r
    if rho_out >= 0.25:
        raise InputError(f"rho_out = {rho_out:.4g} must be < 1/4")
    added_all = []
    rho_in = {}
    for s, idx in added_sets.items():
        idx = np.unique(np.asarray(idx, dtype=np.int64))
        if s == r:
            raise InputError("added sets must come from other clusters")
        if idx.size == 0:
            continue
        if np.any(T.labels[idx] != s):
            raise InputError(f"added points must belong to cluster {s}")
        near_s = np.linalg.norm(A[idx] - T.means[s], axis=1)
        near_r = np.linalg.norm(A[idx] - T.means[r], axis=1)
        if np.any(near_s < (2.0 / 3.0) * near_r):
            raise InputError(f"an added point of cluster {s} is closer than 2/3 to its own mean")
        rho_in[int(s)] = idx.size / n_r
        added_all.append(idx)
    if sum(rho_in.values()) >= 0.25:
        raise InputError("total rho_in must be < 1/4")
    kept = np.setdiff1d(T.members(r), removed)
    S = np.concatenate([kept] + added_all) if added_all else kept
    lhs = float(np.linalg.norm(A[S].mean(axis=0) - T.means[r]))
    rhs = (math.sqrt(rho_out) + 1.5 * sum(math.sqrt(x) for x in rho_in.values())) * st.spec_norm / math.sqrt(n_r)
    return make_check("fact3", lhs, rhs, _dist_atol(A), cluster=r, rho_out=rho_out, rho_in=rho_in)


def main_lemma_count(A: np.ndarray, T: TargetClustering, s: int, zeta_r, zeta_s, beta: float) -> int:
    """#{i in T_s : ||foot - zeta_s|| - ||foot - zeta_r|| >= beta ||zeta_s - zeta_r||}, foot on the zeta line."""
    idx = T.members(s)
    t = line_parameters(A[idx], zeta_s, zeta_r)  # foot = zeta_s + t (zeta_r - zeta_s)
    return int(np.count_nonzero(np.abs(t) - np.abs(1.0 - t) >= beta))


def verify_main_lemma(A, T: TargetClustering, r: int, s: int, zeta_r, zeta_s, alpha: float, beta: float,
                      stats: SpectralStats | None = None, additive: float = 0.0) -> InequalityCheck:
    """|X| <= 256 (alpha/beta)^2 / (c^4 k) min{n_r, n_s} for points of T_s pulled toward zeta_r."""
    A = as_matrix(A)
    st = _stats(A, T, stats)
    zeta_r = np.asarray(zeta_r, dtype=float)
    zeta_s = np.asarray(zeta_s, dtype=float)
    atol = _dist_atol(A)
    for which, zeta in ((r, zeta_r), (s, zeta_s)):
        off = float(np.linalg.norm(T.means[which] - zeta))
        if off > alpha * st.delta[which] * (1 + REL_SLACK) + atol:
            raise InputError(f"||mu_{which} - zeta_{which}|| = {off:.6g} exceeds alpha * Delta = {alpha * st.delta[which]:.6g}")
    count = main_lemma_count(A, T, s, zeta_r, zeta_s, beta)
    c = st.separation_c
    rhs = 256.0 * (alpha / beta) ** 2 * _c_inverse_power(c, 4) / T.k * min(T.sizes[r], T.sizes[s]) + additive
    return make_check("main_lemma", count, rhs, r=r, s=s, alpha=alpha, beta=beta, c=c, additive=additive)


def projected_means(T: TargetClustering, basis) -> np.ndarray:
    return project_rows(T.means, basis)


def verify_muhat_bound(A, T: TargetClustering, basis=None, stats: SpectralStats | None = None) -> list[InequalityCheck]:
    """||mu_r - muhat_r|| <= ||A - C|| / sqrt(n_r)."""
    A = as_matrix(A)
    st = _stats(A, T, stats)
    if basis is None:
        basis = truncated_svd(A, T.k).right_singular_vectors
    mu_hat = projected_means(T, basis)
    atol = _dist_atol(A)
    return [
        make_check("muhat", float(np.linalg.norm(T.means[r] - mu_hat[r])), st.spec_norm / math.sqrt(T.sizes[r]),
                   atol, cluster=r)
        for r in range(T.k)
    ]


def verify_prop44(projected, T: TargetClustering, nu, mu_hat, separation_c: float,
                  matching: CenterMatching | None = None) -> InequalityCheck:
    """Points of T_s nearer (factor 2) to muhat_s than to muhat_r never enter S_r. Needs c > 60."""
    P = as_matrix(projected, "projected")
    nu = as_matrix(nu, "nu")
    if matching is None:
        matching = match_centers(T.means, nu)
    nu_m = nu[matching.permutation]  # nu_m[r] matched to mu_r
    d_hat = np.sqrt(np.maximum(0.0, ((P[:, None, :] - np.asarray(mu_hat)[None]) ** 2).sum(-1)))
    d_nu = np.sqrt(np.maximum(0.0, ((P[:, None, :] - nu_m[None]) ** 2).sum(-1)))
    rows = np.arange(P.shape[0])
    own = T.labels
    violations = 0
    for r in range(T.k):
        premise = (own != r) & (d_hat[rows, own] <= 2.0 * d_hat[:, r])
        violations += int(np.count_nonzero(premise & ~(d_nu[rows, own] < 3.0 * d_nu[:, r])))
    applicable = separation_c > 60.0
    return make_check("prop44", violations, 0.0 if applicable else math.inf, applicable=applicable,
                      c=separation_c)


def verify_thm31(A, T: TargetClustering, z_labels, nu, stats: SpectralStats | None = None) -> list[InequalityCheck]:
    """Per source cluster s0: sum_{r != s0} |T_{s0->r}| (Delta_r + Delta_s0)^2 <= (128/c^2) n_s0 Delta_s0^2.

    Dividing by Delta_s0^2 gives the count form |misclassified from s0| <= (128/c^2) n_s0,
    which is recorded in the context. A final check bounds the total count by
    (128/c^2) times the size of the second largest cluster.
    """
    A = as_matrix(A)
    st = _stats(A, T, stats)
    match = match_centers(T.means, nu)
    inv = match.inverse
    z_target = inv[np.asarray(z_labels, dtype=np.int64)]  # target index each point was sent to
    c = st.separation_c
    c2 = _c_inverse_power(c, 2)
    delta = st.delta
    checks = []
    for s0 in range(T.k):
        members = T.labels == s0
        moved = np.bincount(z_target[members], minlength=T.k)
        moved[s0] = 0
        lhs = float(np.sum(moved * (delta + delta[s0]) ** 2))
        rhs = 128.0 * c2 * T.sizes[s0] * delta[s0] ** 2
        checks.append(make_check("thm31", lhs, rhs, 1e-12 * (1.0 + rhs), cluster=s0, misclassified=int(moved.sum()),
                                 count_bound=128.0 * c2 * T.sizes[s0], c=c))
    total = int(np.count_nonzero(z_target != T.labels))
    if T.k >= 2:
        second = float(np.sort(T.sizes)[-2])
        checks.append(make_check("thm31-overall", total, 128.0 * c2 * second, c=c))
    return checks


def verify_thm32(A, T: TargetClustering, z_labels, stats: SpectralStats | None = None) -> InequalityCheck:
    """Cost of the Part-I clustering at its own means <= (1 + 49/c) ||A - C||_F^2."""
    A = as_matrix(A)
    st = _stats(A, T, stats)
    ratio = cost_ratio(A, T, np.asarray(z_labels, dtype=np.int64), T.k, st.frob_norm**2)
    c = st.separation_c
    return make_check("thm32", ratio, 1.0 + 49.0 * _c_inverse_power(c, 1), c=c)


def verify_thm41(A, T: TargetClustering, theta, nu, empty_core, stats: SpectralStats | None = None,
                 factor: float = THM41_FACTOR) -> list[InequalityCheck]:
    """||theta_r - mu_r|| <= (factor/c) ||A - C|| / sqrt(n_r).

    Applies only in the non-degenerate case with every core set non-empty.
    The context records the ratio to the bare scale ||A - C|| / (c sqrt(n_r)).
    """
    A = as_matrix(A)
    st = _stats(A, T, stats)
    match = match_centers(T.means, nu)
    theta_m = np.asarray(theta)[match.permutation]
    applicable = (not st.degenerate) and not bool(np.any(empty_core))
    c = st.separation_c
    atol = _dist_atol(A)
    out = []
    for r in range(T.k):
        lhs = float(np.linalg.norm(theta_m[r] - T.means[r]))
        scale = _c_inverse_power(c, 1) * st.spec_norm / math.sqrt(T.sizes[r])
        rhs = factor * scale if applicable else math.inf
        headroom = lhs / scale if scale > 0 else (0.0 if lhs <= atol else math.inf)
        out.append(make_check("thm41", lhs, rhs, atol, cluster=r, applicable=applicable, c=c,
                              measured_constant=headroom,
                              nu_distance=float(np.linalg.norm(np.asarray(nu)[match.permutation[r]] - T.means[r]))))
    return out


def verify_lemma42(T: TargetClustering, sets: list[np.ndarray], nu, stats: SpectralStats) -> list[InequalityCheck]:
    """|T_r minus S_r| <= (512/c^2) n_r."""
    match = match_centers(T.means, nu)
    c = stats.separation_c
    out = []
    for r in range(T.k):
        members = T.members(r)
        missing = np.setdiff1d(members, sets[match.permutation[r]]).size
        out.append(make_check("lemma42", missing, 512.0 * _c_inverse_power(c, 2) * T.sizes[r], cluster=r, c=c))
    return out


def verify_lemma43(T: TargetClustering, sets: list[np.ndarray], nu, stats: SpectralStats,
                   additive: float = 1.0) -> list[InequalityCheck]:
    """|T_s intersect S_r| <= 48^2 / (c^4 k^2) n_r + additive, for r != s (non-degenerate case)."""
    match = match_centers(T.means, nu)
    c = stats.separation_c
    applicable = not stats.degenerate
    out = []
    for r in range(T.k):
        S = sets[match.permutation[r]]
        from_ = np.bincount(T.labels[S], minlength=T.k)
        bound = 48.0**2 * _c_inverse_power(c, 4) / T.k**2 * T.sizes[r] + additive
        for s in range(T.k):
            if s != r:
                out.append(make_check("lemma43", from_[s], bound if applicable else math.inf, r=r, s=s, c=c,
                                      applicable=applicable, additive=additive))
    return out


def separation_in_gap_units(T: TargetClustering, stats: SpectralStats) -> float:
    """min_{r != s} ||mu_r - mu_s|| / (sqrt(k) gap_{r,s}); equals the separation constant when non-degenerate."""
    inv = 1.0 / np.sqrt(T.sizes.astype(float))
    best = math.inf
    for r, s in itertools.combinations(range(T.k), 2):
        gap = (inv[r] + inv[s]) * stats.spec_norm
        dist = float(np.linalg.norm(T.means[r] - T.means[s]))
        if gap > 0:
            best = min(best, dist / (math.sqrt(T.k) * gap))
        elif dist == 0:
            return 0.0
    return best


def verify_cor47(A, T: TargetClustering, theta, gamma: float, stats: SpectralStats | None = None,
                 kappa_a: float = COR47_KAPPA) -> tuple[InequalityCheck, InequalityCheck]:
    """(a) misclassified by nearest-theta <= eps n + kappa_a n / (gamma^2 c^4);
    (b) eps <= 32 (sqrt k / (c sqrt k - gamma))^2 when gamma < c sqrt k.

    eps is the measured fraction of gamma-bad points. (b) uses the separation
    measured in units of sqrt(k) gap, which is the quantity its derivation needs
    and coincides with the separation constant in the non-degenerate case.
    """
    A = as_matrix(A)
    st = _stats(A, T, stats)
    theta = as_matrix(theta, "theta")
    prox = proximity_report(A, T, gamma, st.spec_norm)
    eps = prox.bad_fraction
    match = match_centers(T.means, theta)
    labels, _ = assign(A, theta)
    wrong = int(misclassified_counts(T, labels, match.permutation).sum())
    c = st.separation_c
    n = T.n
    rhs_a = eps * n + kappa_a * n * _c_inverse_power(c, 4) / gamma**2
    check_a = make_check("cor47a", wrong, rhs_a, eps=eps, gamma=gamma, c=c, kappa_a=kappa_a)
    c_gap = separation_in_gap_units(T, st)
    sk = math.sqrt(T.k)
    if gamma < c_gap * sk:
        rhs_b = 32.0 * (sk / (c_gap * sk - gamma)) ** 2 if c_gap != math.inf else 0.0
    else:
        rhs_b = math.inf
    per_cluster = np.bincount(T.labels[prox.bad_points], minlength=T.k) / T.sizes
    check_b = make_check("cor47b", eps, rhs_b, gamma=gamma, c_gap_units=c_gap,
                         max_cluster_bad_fraction=float(per_cluster.max()))
    return check_a, check_b


# ---------------------------------------------------------------------------
# Suites


SUITES = ("fact1", "fact2", "thm31", "thm32", "lemma42", "lemma43", "thm41", "muhat", "prop44", "main_lemma", "cor47")


def run_suites(A, T: TargetClustering, run: ClusterRunResult, suites=SUITES, gamma: float = 1.0,
               stats: SpectralStats | None = None, stats_override: SpectralStats | None = None) -> list[InequalityCheck]:
    """All selected verifiers on one clustered instance."""
    A = as_matrix(A)
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        raise InputError(f"unknown suite(s): {unknown}; choose from {list(SUITES)}")
    if not suites:
        raise InputError("no suite selected")
    st = stats_override or _stats(A, T, stats)
    checks: list[InequalityCheck] = []
    mu_hat = projected_means(T, run.basis)
    for name in suites:
        if name == "fact1":
            checks.append(verify_fact1(A, T, run.projected, st))
        elif name == "fact2":
            checks.extend(verify_fact2(A, T, run.nu, st))
        elif name == "thm31":
            checks.extend(verify_thm31(A, T, run.z_labels, run.nu, st))
        elif name == "thm32":
            checks.append(verify_thm32(A, T, run.z_labels, st))
        elif name == "lemma42":
            checks.extend(verify_lemma42(T, run.core_sets, run.nu, st))
        elif name == "lemma43":
            checks.extend(verify_lemma43(T, run.core_sets, run.nu, st))
        elif name == "thm41":
            checks.extend(verify_thm41(A, T, run.theta, run.nu, run.empty_core, st))
        elif name == "muhat":
            checks.extend(verify_muhat_bound(A, T, run.basis, st))
        elif name == "prop44":
            checks.append(verify_prop44(run.projected, T, run.nu, mu_hat, st.separation_c))
        elif name == "main_lemma":
            checks.extend(_main_lemma_muhat(A, T, mu_hat, st))
        elif name == "cor47":
            checks.extend(verify_cor47(A, T, run.theta, gamma, st))
    return checks


def _main_lemma_muhat(A, T, mu_hat, st) -> list[InequalityCheck]:
    """Main-lemma instance with zeta = muhat and beta = 1/3, alpha the smallest admissible value."""
    off = np.linalg.norm(T.means - mu_hat, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = float(np.max(np.where(st.delta > 0, off / st.delta, 0.0)))
    alpha = max(alpha, 1e-300)
    out = []
    for r in range(T.k):
        for s in range(T.k):
            if r != s and np.linalg.norm(mu_hat[r] - mu_hat[s]) > 1e-12:
                out.append(verify_main_lemma(A, T, r, s, mu_hat[r], mu_hat[s], alpha, 1.0 / 3.0, st, additive=1.0))
    return out


@dataclass(frozen=True)
class SuiteSummary:
    fact_id: str
    trials: int
    failures: int
    worst_ratio: float


def summarize(checks: list[InequalityCheck]) -> list[SuiteSummary]:
    by_id: dict[str, list[InequalityCheck]] = {}
    for ch in checks:
        by_id.setdefault(ch.fact_id, []).append(ch)
    return [
        SuiteSummary(fid, len(group), sum(not g.holds for g in group), max(g.ratio for g in group))
        for fid, group in sorted(by_id.items())
    ]


__all__ = [name for name in dir() if not name.startswith("_")] + ["cluster_means", "core_sets"]

import itertools
import json
import math

import numpy as np
import pytest

from conftest import blobs
from oracles import best_permutation
from sepcluster import analysis as an
from sepcluster.algorithm import ClusterOptions, cluster
from sepcluster.errors import DegenerateLineError, InputError
from sepcluster.generators import PlantedPartitionSpec, gaussian_instance, gen_planted_partition
from sepcluster.linalg import project_rows, truncated_svd
from sepcluster.model import build_target, spectral_stats

THREE = [[0, 0, 0, 0], [20, 0, 0, 0], [0, 20, 0, 0]]


@pytest.fixture(scope="module")
def c100():
    A, T, _, _ = gaussian_instance(4, 30, 2000, 100.0, seed=12)
    st = spectral_stats(A, T)
    return A, T, st, cluster(A, 4, ClusterOptions(seed=1))


@pytest.fixture(scope="module")
def zero_var():
    A, labels = blobs(THREE, [5, 6, 7])
    return A, build_target(A, labels)


# --- InequalityCheck


def test_make_check_semantics():
    assert an.make_check("x", 1.0, 1.0).holds
    assert an.make_check("x", 1.0 + 1e-12, 1.0).holds  # relative slack
    assert not an.make_check("x", 1.01, 1.0).holds
    assert an.make_check("x", 5.0, math.inf).holds
    assert not an.make_check("x", math.nan, 1.0).holds
    ch = an.make_check("x", 1e-13, 0.0, atol=1e-12)
    assert ch.holds and ch.context["atol"] == 1e-12
    assert an.make_check("x", 0.0, 0.0).ratio == 0.0
    assert an.make_check("x", 1.0, 0.0).ratio == math.inf
    assert an.make_check("x", 1.0, 4.0).ratio == 0.25


# --- matching and evaluation


def test_match_identity_and_reverse(rng):
    mu = rng.standard_normal((4, 3)) * 10
    m = an.match_centers(mu, mu)
    np.testing.assert_array_equal(m.permutation, np.arange(4))
    assert np.all(m.distances == 0)
    m = an.match_centers(mu, mu[::-1])
    np.testing.assert_array_equal(m.permutation, [3, 2, 1, 0])
    np.testing.assert_array_equal(m.inverse[m.permutation], np.arange(4))


def test_match_k5_against_enumeration():
    r = np.random.default_rng(55)
    for _ in range(10):
        mu = r.standard_normal((5, 3))
        found = mu[r.permutation(5)] + 0.8 * r.standard_normal((5, 3))
        m = an.match_centers(mu, found)
        _, best = best_permutation(mu, found)
        assert m.distances.sum() == pytest.approx(best, rel=1e-12)
        assert m.distances.sum() <= np.linalg.norm(mu - found, axis=1).sum() + 1e-12


def test_match_unequal_counts():
    with pytest.raises(InputError):
        an.match_centers(np.zeros((3, 2)), np.zeros((2, 2)))


def test_evaluate_perfect(zero_var):
    A, T = zero_var
    rep = an.evaluate(A, T, T.labels, T.means)
    assert rep.total_misclassified == 0
    assert rep.cost_ratio == 1.0  # A = C: 0 found cost


def test_evaluate_one_flip(rng):
    A, labels = blobs(THREE, 6, sigma=1.0, seed=2)
    T = build_target(A, labels)
    found = labels.copy()
    found[0] = 1
    rep = an.evaluate(A, T, found, T.means)
    assert rep.total_misclassified == 1
    assert rep.per_cluster_misclassified.tolist() == [1, 0, 0]
    assert rep.cost_ratio >= 1.0


def test_evaluate_zero_residual_infinite_ratio(zero_var):
    A, T = zero_var
    wrong = T.labels.copy()
    wrong[0] = 1
    assert an.evaluate(A, T, wrong, T.means).cost_ratio == math.inf
    json.dumps(an.evaluate(A, T, wrong, T.means).to_json())


def test_evaluate_invariant_under_relabeling(c100):
    A, T, _, run = c100
    perm = np.array([2, 0, 3, 1])
    a = an.evaluate(A, T, run.final_labels, run.final_centers)
    b = an.evaluate(A, T, perm[run.final_labels], run.final_centers[np.argsort(perm)])
    assert a.total_misclassified == b.total_misclassified
    assert a.cost_ratio == pytest.approx(b.cost_ratio, rel=1e-12)
    np.testing.assert_allclose(a.center_distances, b.center_distances)


def test_evaluate_part_one_c100(c100):
    A, T, st, run = c100
    rep = an.evaluate(A, T, run.z_labels, run.nu)
    c = st.separation_c
    assert np.all(rep.per_cluster_misclassified <= 128 / c**2 * T.sizes + 1)
    assert rep.cost_ratio <= 1 + 49 / c


# --- projection error


def test_fact1_zero_variance(zero_var):
    A, T = zero_var
    ch = an.verify_fact1(A, T)
    assert ch.holds and ch.lhs == pytest.approx(0.0, abs=1e-20) and ch.rhs == 0.0


def test_fact1_rank_k_data(rng):
    A = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 6))
    T = build_target(A, np.arange(30) % 2)
    ch = an.verify_fact1(A, T)
    assert math.isfinite(ch.lhs) and ch.holds


@pytest.mark.parametrize("k", [2, 3, 5, 8])
def test_fact1_random_instances(k):
    r = np.random.default_rng(k)
    for _ in range(8):
        A = r.standard_normal((60, 12)) + 3 * r.standard_normal((k, 12))[np.arange(60) % k]
        assert an.verify_fact1(A, build_target(A, np.arange(60) % k)).holds


# --- Part I centers


def test_fact2_identity_and_zero_variance(zero_var, c100):
    A, T = zero_var
    assert all(ch.holds and ch.lhs == 0 for ch in an.verify_fact2(A, T, T.means))
    A, T, st, _ = c100
    assert all(ch.lhs == 0 for ch in an.verify_fact2(A, T, T.means[::-1], st))


def test_fact2_c100(c100):
    A, T, st, run = c100
    checks = an.verify_fact2(A, T, run.nu, st)
    assert len(checks) == 4 and all(ch.holds for ch in checks)


# --- mean of a subset of a cluster


def test_subset_mean_whole_cluster(rng):
    A_r = rng.standard_normal((6, 3))
    bound, identity = an.verify_subset_mean(A_r, np.arange(6))
    assert bound.holds and identity.holds
    assert bound.lhs == pytest.approx(0.0, abs=1e-12)


def test_subset_mean_singleton(rng):
    A_r = rng.standard_normal((7, 3))
    bound, identity = an.verify_subset_mean(A_r, [2])
    assert bound.lhs == pytest.approx(np.linalg.norm(A_r[2] - A_r.mean(axis=0)))
    assert bound.holds and identity.holds


def test_subset_mean_all_subsets_of_8(rng):
    A_r = rng.standard_normal((8, 3)) * [1, 5, 0.1]
    for size in range(1, 9):
        for X in itertools.combinations(range(8), size):
            bound, identity = an.verify_subset_mean(A_r, X)
            assert bound.holds and identity.holds, X


def test_subset_mean_bad_index(rng):
    with pytest.raises(InputError):
        an.verify_subset_mean(rng.standard_normal((4, 2)), [4])


# --- subset-mean perturbation


def test_fact3_nothing_moved(c100):
    A, T, st, _ = c100
    ch = an.verify_fact3(A, T, 0, [], {}, st)
    assert ch.lhs == pytest.approx(0.0, abs=1e-9) and ch.holds


def test_fact3_half_budget_removed_symmetric():
    A, labels = blobs([[0.0, 0.0], [100.0, 0.0]], 40, sigma=1.0, seed=8)
    T = build_target(A, labels)
    far = np.argsort(-np.linalg.norm(A[:40] - T.means[0], axis=1))[:4]  # rho_out = 0.1 < 1/4
    ch = an.verify_fact3(A, T, 0, far, {})
    assert ch.holds and ch.lhs > 0


def test_fact3_random_legal_perturbations(c100):
    A, T, st, _ = c100
    r = np.random.default_rng(3)
    tested = 0
    for _ in range(200):
        tgt = int(r.integers(4))
        n_r = T.sizes[tgt]
        members = T.members(tgt)
        removed = r.choice(members, int(r.integers(0, n_r // 4)), replace=False)
        added = {}
        budget = int(r.integers(0, n_r // 4))
        for s in range(4):
            if s == tgt or budget == 0:
                continue
            cand = T.members(s)
            ok = np.linalg.norm(A[cand] - T.means[s], axis=1) >= (2 / 3) * np.linalg.norm(A[cand] - T.means[tgt], axis=1)
            pool = cand[ok]
            take = min(budget, int(r.integers(0, pool.size + 1)), n_r // 12)
            if take:
                added[s] = r.choice(pool, take, replace=False)
                budget -= take
        try:
            ch = an.verify_fact3(A, T, tgt, removed, added, st)
        except InputError:
            continue
        tested += 1
        assert ch.holds
    assert tested >= 150


def test_fact3_preconditions(c100):
    A, T, st, _ = c100
    with pytest.raises(InputError):
        an.verify_fact3(A, T, 0, T.members(1)[:2], {}, st)
    with pytest.raises(InputError):
        an.verify_fact3(A, T, 0, T.members(0)[: T.sizes[0] // 2], {}, st)
    with pytest.raises(InputError, match="2/3"):
        an.verify_fact3(A, T, 0, [], {1: T.members(1)[:3]}, st)


def test_fact3_reports_violation_on_spread_out_additions():
    # T_r: 40 copies of the origin. T_s: 16 points mu_s +- D e_j (j = 1..8), so ||A - C|| = D sqrt 2.
    # Adding the 8 points mu_s + D e_j satisfies every stated precondition, yet their
    # mean stays far from mu_s and the shifted mean exceeds the stated bound.
    D, d = 10.0, 10
    mu_s = np.zeros(d)
    mu_s[0] = D
    plus = np.array([mu_s + D * np.eye(d)[j] for j in range(1, 9)])
    minus = np.array([mu_s - D * np.eye(d)[j] for j in range(1, 9)])
    A = np.vstack([np.zeros((40, d)), plus, minus])
    T = build_target(A, [0] * 40 + [1] * 16)
    ch = an.verify_fact3(A, T, 0, [], {1: np.arange(40, 48)})
    assert ch.lhs == pytest.approx(D * math.sqrt(72) / 48, rel=1e-9)
    assert ch.rhs == pytest.approx(1.5 * math.sqrt(0.2) * D * math.sqrt(2) / math.sqrt(40), rel=1e-9)
    assert not ch.holds


# --- points pulled toward another center


def test_main_lemma_zero_variance_exact_means(zero_var):
    A, T = zero_var
    st = spectral_stats(A, T)
    ch = an.verify_main_lemma(A, T, 0, 1, T.means[0], T.means[1], 0.5, 1 / 3, st)
    assert ch.lhs == 0 and ch.holds


def test_main_lemma_projected_means_c100(c100):
    A, T, st, run = c100
    mu_hat = an.projected_means(T, run.basis)
    alpha = max(np.linalg.norm(T.means[r] - mu_hat[r]) / st.delta[r] for r in range(4))
    assert alpha <= 1 / math.sqrt(4)  # the muhat bound in Delta units, non-degenerate case
    for r, s in itertools.permutations(range(4), 2):
        ch = an.verify_main_lemma(A, T, r, s, mu_hat[r], mu_hat[s], alpha, 1 / 3, st)
        assert ch.holds
        assert ch.lhs <= 48**2 / (st.separation_c**4 * 16) * T.sizes[r] + 1


def test_main_lemma_perturbed_centers(c100):
    A, T, st, _ = c100
    r_ = np.random.default_rng(0)
    for alpha, beta in itertools.product([0.1, 0.5, 0.5], [1 / 3, 1.0]):
        zeta = T.means + alpha * st.delta[:, None] * _unit_rows(r_, T.means.shape)
        for r, s in [(0, 1), (2, 3), (3, 0)]:
            assert an.verify_main_lemma(A, T, r, s, zeta[r], zeta[s], alpha, beta, st).holds


def _unit_rows(r, shape):
    X = r.standard_normal(shape)
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def test_main_lemma_premise_and_degenerate_line(c100):
    A, T, st, _ = c100
    with pytest.raises(InputError, match="exceeds"):
        an.verify_main_lemma(A, T, 0, 1, T.means[0] + 10 * st.delta[0], T.means[1], 0.5, 1 / 3, st)
    mid = T.means[0]
    with pytest.raises(DegenerateLineError):
        an.main_lemma_count(A, T, 1, mid, mid, 1 / 3)


# --- muhat bound


def test_muhat_rank_k_data(rng):
    A = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 6))
    T = build_target(A, np.arange(30) % 3)
    checks = an.verify_muhat_bound(A, T)
    assert all(ch.holds for ch in checks)
    assert all(ch.lhs < 1e-9 for ch in checks)


def test_muhat_random_and_planted(rng):
    for seed in range(5):
        r = np.random.default_rng(seed)
        A = r.standard_normal((80, 10)) + 2 * r.standard_normal((4, 10))[np.arange(80) % 4]
        assert all(ch.holds for ch in an.verify_muhat_bound(A, build_target(A, np.arange(80) % 4)))
    P = np.full((3, 3), 0.1)
    np.fill_diagonal(P, 0.6)
    A, T, _ = gen_planted_partition(PlantedPartitionSpec(3, P, [60, 60, 60]), 1)
    assert all(ch.holds for ch in an.verify_muhat_bound(A, T))


# --- core-set exclusion when c > 60


def test_prop44_zero_variance(zero_var):
    A, T = zero_var
    st = spectral_stats(A, T)
    basis = truncated_svd(A, 3).right_singular_vectors
    P = project_rows(A, basis)
    ch = an.verify_prop44(P, T, T.means, an.projected_means(T, basis), st.separation_c)
    assert ch.holds and ch.lhs == 0 and ch.context["applicable"]


def test_prop44_c100(c100):
    A, T, st, run = c100
    ch = an.verify_prop44(run.projected, T, run.nu, an.projected_means(T, run.basis), st.separation_c)
    assert ch.context["applicable"] and ch.holds


def test_prop44_planted_not_applicable_below_60():
    P = np.full((2, 2), 0.1)
    np.fill_diagonal(P, 0.7)
    A, T, _ = gen_planted_partition(PlantedPartitionSpec(2, P, [80, 80]), 2)
    st = spectral_stats(A, T)
    run = cluster(A, 2)
    ch = an.verify_prop44(run.projected, T, run.nu, an.projected_means(T, run.basis), st.separation_c)
    assert not ch.context["applicable"] and ch.rhs == math.inf and ch.holds


# --- all bounds on a c = 100 run


def test_inequality_checks_c100(c100):
    A, T, st, run = c100
    for ch in an.verify_thm31(A, T, run.z_labels, run.nu, st):
        assert ch.holds
    assert an.verify_thm32(A, T, run.z_labels, st).holds
    thm41 = an.verify_thm41(A, T, run.theta, run.nu, run.empty_core, st)
    assert all(ch.holds and ch.context["applicable"] for ch in thm41)
    assert all(ch.holds for ch in an.verify_lemma42(T, run.core_sets, run.nu, st))
    assert all(ch.holds for ch in an.verify_lemma43(T, run.core_sets, run.nu, st))


def test_thm31_counts_misclassified(zero_var):
    A, T = zero_var
    st = spectral_stats(A, T)
    z = T.labels.copy()
    z[0] = 2
    checks = an.verify_thm31(A, T, z, T.means, st)
    assert checks[0].context["misclassified"] == 1
    assert checks[-1].fact_id == "thm31-overall" and checks[-1].lhs == 1
    # zero residual means c = inf and the count bound is 0, so the overall check fails
    assert not checks[-1].holds


def test_thm41_gated_on_degenerate_case():
    A = np.array([[0.0], [2.0], [10.0], [12.0]])
    T = build_target(A, [0, 0, 1, 1])
    st = spectral_stats(A, T)
    assert st.degenerate
    checks = an.verify_thm41(A, T, T.means, T.means, np.zeros(2, bool), st)
    assert all(not ch.context["applicable"] and ch.rhs == math.inf for ch in checks)


def test_lemma42_detects_missing_members(c100):
    A, T, st, run = c100
    sets = [s[:1] for s in run.core_sets]
    checks = an.verify_lemma42(T, sets, run.nu, st)
    assert not any(ch.holds for ch in checks)


# --- misclassification under the proximity margin


def test_cor47_all_good_instance(c100):
    A, T, st, run = c100
    a, b = an.verify_cor47(A, T, run.theta, 1.0, st)
    assert b.lhs == 0.0 and a.holds and b.holds
    assert a.rhs == pytest.approx(an.COR47_KAPPA * T.n / st.separation_c**4)


def test_cor47_gamma_sweep(c100):
    A, T, st, run = c100
    for gamma in (0.5, 1.0, 2.0, 5.0):
        a, b = an.verify_cor47(A, T, run.theta, gamma, st)
        assert a.holds and b.holds


def test_cor47b_vacuous_near_limit(c100):
    A, T, st, run = c100
    limit = an.separation_in_gap_units(T, st) * math.sqrt(T.k)
    assert limit == pytest.approx(st.separation_c * 2, rel=1e-9)
    near = an.verify_cor47(A, T, run.theta, 0.999 * limit, st)[1]
    assert near.holds and near.rhs > 1
    beyond = an.verify_cor47(A, T, run.theta, 1.01 * limit, st)[1]
    assert beyond.rhs == math.inf and beyond.holds


# --- suites


def test_run_suites_and_summary(c100):
    A, T, st, run = c100
    checks = an.run_suites(A, T, run, stats=st)
    ids = {ch.fact_id for ch in checks}
    assert {"fact1", "fact2", "thm31", "thm32", "thm41", "lemma42", "lemma43", "muhat", "prop44",
            "main_lemma", "cor47a", "cor47b"} <= ids
    assert all(ch.holds for ch in checks)
    summary = an.summarize(checks)
    assert sum(s.trials for s in summary) == len(checks)
    assert all(s.failures == 0 for s in summary)


def test_run_suites_rejects_unknown(c100):
    A, T, st, run = c100
    with pytest.raises(InputError):
        an.run_suites(A, T, run, ["nope"], stats=st)
    with pytest.raises(InputError):
        an.run_suites(A, T, run, [], stats=st)


def test_checks_are_recomputable(c100):
    A, T, st, run = c100
    for ch in an.run_suites(A, T, run, stats=st):
        again = an.make_check(ch.fact_id, ch.lhs, ch.rhs, ch.context.get("atol", 0.0))
        assert again.holds == ch.holds

import json

import numpy as np
import pytest

from conftest import blobs
from sepcluster.algorithm import (
    ClusterOptions,
    cluster,
    clustering_cost,
    core_sets,
    part_one,
    part_three,
    part_two,
)
from sepcluster.analysis import evaluate, match_centers
from sepcluster.errors import InputError
from sepcluster.generators import gaussian_instance
from sepcluster.kmeans import assign
from sepcluster.model import build_target, spectral_stats

THREE = [[0, 0, 0, 0], [20, 0, 0, 0], [0, 20, 0, 0]]


@pytest.fixture(scope="module")
def c100():
    A, T, _, _ = gaussian_instance(4, 30, 2000, 100.0, seed=31)
    return A, T, spectral_stats(A, T), cluster(A, 4, ClusterOptions(seed=2))


# --- Part I


def test_part_one_zero_variance_rank_k():
    A, labels = blobs(THREE, [4, 5, 6])
    one = part_one(A, 3, seed=0)
    np.testing.assert_allclose(one.projected, A, atol=1e-10)
    assert one.kmeans.cost == pytest.approx(0.0, abs=1e-18)
    T = build_target(A, labels)
    assert evaluate(A, T, one.z_labels, one.nu).total_misclassified == 0


def test_part_one_full_rank_projection_is_identity(rng):
    A = rng.standard_normal((10, 3))
    np.testing.assert_allclose(part_one(A, 3, 0).projected, A, atol=1e-8)


@pytest.mark.parametrize("k", [0, 5, 2.0])
def test_part_one_k_out_of_range(k):
    with pytest.raises(InputError) as info:
        part_one(np.ones((6, 4)) + np.arange(4), k, 0)
    assert info.value.part == "I"


def test_part_one_c100_within_misclassification_bound(c100):
    A, T, st, run = c100
    match = match_centers(T.means, run.nu)
    for r in range(T.k):
        members = T.labels == r
        wrong = np.count_nonzero(run.z_labels[members] != match.permutation[r])
        assert wrong <= 128 / st.separation_c**2 * T.sizes[r]


def test_z_labels_are_nearest_nu(c100):
    _, _, _, run = c100
    np.testing.assert_array_equal(run.z_labels, assign(run.projected, run.nu)[0])


# --- Part II


def test_core_sets_zero_variance_equal_targets():
    A, labels = blobs(THREE, 5)
    nu = np.array(THREE, dtype=float)
    sets, theta, empty = part_two(A, A, nu)
    for r in range(3):
        np.testing.assert_array_equal(sets[r], np.flatnonzero(labels == r))
    np.testing.assert_allclose(theta, nu)
    assert not empty.any()


def test_equidistant_point_in_no_core_set():
    nu = np.array([[0.0, 0.0], [2.0, 0.0]])
    P = np.array([[1.0, 0.0], [0.0, 0.1], [1.0, 5.0]])
    sets = core_sets(P, nu)
    assert 0 not in np.concatenate(sets)
    assert 2 not in np.concatenate(sets)
    assert 1 in sets[0]


def test_core_set_boundary_ratio_is_inclusive():
    nu = np.array([[0.0], [4.0]])
    sets = core_sets(np.array([[1.0]]), nu)  # 1 = (1/3) * 3
    assert sets[0].tolist() == [0]


def test_core_sets_disjoint_with_coincident_centers():
    nu = np.array([[0.0], [0.0], [5.0]])
    P = np.array([[0.0], [5.0]])
    sets = core_sets(P, nu)
    assert sets[0].tolist() == [0] and sets[1].size == 0 and sets[2].tolist() == [1]


def test_theta_uses_original_rows():
    A = np.array([[0.0, 3.0], [0.1, -3.0], [10.0, 1.0], [10.1, 1.0]])
    projected = A.copy()
    projected[:, 1] = 0.0
    nu = np.array([[0.0, 0.0], [10.0, 0.0]])
    _, theta, _ = part_two(projected, A, nu)
    np.testing.assert_allclose(theta[0], [0.05, 0.0])
    np.testing.assert_allclose(theta[1], [10.05, 1.0])


def test_empty_core_falls_back_to_nu():
    nu = np.array([[0.0], [1.0]])
    A = np.array([[0.5], [0.5]])
    sets, theta, empty = part_two(A, A, nu)
    assert empty.all()
    np.testing.assert_array_equal(theta, nu)


def test_part_two_c100_theta_and_membership(c100):
    A, T, st, run = c100
    assert not st.degenerate
    match = match_centers(T.means, run.nu)
    for r in range(T.k):
        j = match.permutation[r]
        assert np.linalg.norm(run.theta[j] - T.means[r]) <= np.linalg.norm(run.nu[j] - T.means[r])
        missing = np.setdiff1d(T.members(r), run.core_sets[j]).size
        assert missing <= 512 / st.separation_c**2 * T.sizes[r]
    together = np.concatenate(run.core_sets)
    assert together.size == np.unique(together).size


# --- Part III


def test_part_three_at_means_converges_in_one_step():
    A, labels = blobs(THREE, 6, sigma=0.5, seed=3)
    T = build_target(A, labels)
    res = part_three(A, T.means)
    assert res.converged and res.iterations == 1
    np.testing.assert_array_equal(res.labels, labels)


def test_part_three_flags_non_convergence():
    A, labels = blobs(THREE, 6, sigma=8.0, seed=3)
    res = part_three(A, A[:3] + 0.01, max_iter=1)
    assert not res.converged and res.iterations == 1


def test_part_three_cost_non_increasing():
    r = np.random.default_rng(9)
    for _ in range(200):
        A = r.standard_normal((25, 3))
        centers = A[r.choice(25, 3, replace=False)]
        prev = assign(A, centers)[1].sum()
        for it in range(1, 6):
            res = part_three(A, centers, max_iter=it)
            cost = assign(A, res.centers)[1].sum()
            assert cost <= prev + 1e-12
            prev = cost
            if res.converged:
                break


def test_cluster_c100_exact_recovery(c100):
    A, T, _, run = c100
    assert evaluate(A, T, run.final_labels, run.final_centers).total_misclassified == 0
    assert run.part3_converged


# --- full pipeline


def test_cluster_k1_global_mean(rng):
    A = rng.standard_normal((20, 3))
    run = cluster(A, 1)
    np.testing.assert_allclose(run.final_centers[0], A.mean(axis=0), atol=1e-12)
    assert np.all(run.final_labels == 0)


def test_duplicate_rows_get_identical_labels(rng):
    base, _ = blobs(THREE, 5, sigma=2.0, seed=4)
    A = np.vstack([base, base])
    labels = cluster(A, 3).final_labels
    np.testing.assert_array_equal(labels[:15], labels[15:])


def test_cluster_without_part_three(c100):
    A, T, _, _ = c100
    run = cluster(A, 4, ClusterOptions(seed=2, run_part3=False))
    assert run.part3_iterations == 0
    np.testing.assert_array_equal(run.final_centers, run.theta)


def test_cluster_deterministic(rng):
    A, _ = blobs(THREE, 10, sigma=3.0, seed=5)
    a, b = cluster(A, 3, ClusterOptions(seed=1)), cluster(A, 3, ClusterOptions(seed=1))
    np.testing.assert_array_equal(a.final_labels, b.final_labels)
    np.testing.assert_array_equal(a.nu, b.nu)


def test_cluster_result_json_round_trips(c100):
    payload = json.loads(json.dumps(c100[3].to_json()))
    assert payload["k"] == 4
    assert len(payload["final_labels"]) == 2000
    assert sum(payload["core_set_sizes"]) <= 2000


def test_errors_tagged_with_part():
    with pytest.raises(InputError) as info:
        cluster(np.ones((3, 2)), 2)
    assert info.value.part == "I"


def test_clustering_cost(rng):
    A = rng.standard_normal((12, 2))
    labels = np.arange(12) % 2
    T = build_target(A, labels)
    assert clustering_cost(A, labels, 2) == pytest.approx(np.sum((A - T.center_matrix) ** 2))

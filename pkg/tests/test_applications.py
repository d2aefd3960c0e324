import itertools
import math

import numpy as np
import pytest

from grasstensor import applications as ap
from grasstensor import grassmann as gm
from grasstensor import solvers as sv
from grasstensor import tensor as tc


def test_best_rank_approx_matrix_matches_truncated_svd():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((7, 5))
    out = ap.best_rank_approx(Y, (3, 3))
    s = np.linalg.svd(Y, compute_uv=False)
    assert abs(out.rel_residual - np.sqrt(np.sum(s[3:] ** 2) / np.sum(s**2))) < 1e-10
    assert abs(out.value - np.sum(s[:3] ** 2)) < 1e-9


def test_best_rank_approx_unequal_matrix_ranks_uses_smaller():
    rng = np.random.default_rng(1)
    Y = rng.standard_normal((6, 5))
    s = np.linalg.svd(Y, compute_uv=False)
    out = ap.best_rank_approx(Y, (2, 4))
    assert abs(out.value - np.sum(s[:2] ** 2)) < 1e-8


def test_best_rank_approx_planted_exact():
    rng = np.random.default_rng(2)
    core = rng.standard_normal((2, 2, 2))
    Us = [np.linalg.qr(rng.standard_normal((5, 2)))[0] for _ in range(3)]
    T = tc.reconstruct(core, Us)
    out = ap.best_rank_approx(T, (2, 2, 2))
    assert out.rel_residual < 1e-8
    assert np.linalg.norm(out.reconstruct() - T) < 1e-8


@pytest.mark.parametrize("method", ["newton", "rcg", "hooiOnly"])
def test_best_rank_approx_methods_agree(method):
    rng = np.random.default_rng(3)
    T = rng.standard_normal((5, 5, 5))
    ref = ap.best_rank_approx(T, (2, 2, 2))
    out = ap.best_rank_approx(T, (2, 2, 2), sv.SolverConfig(epsilon=1e-10, max_iter=3000), method=method)
    assert out.status == "converged"
    assert out.stage_values["hooi"] >= out.stage_values["hosvd"] - 1e-12
    assert abs(out.value - ref.value) < 1e-6


def test_best_rank_approx_complex_tensor():
    rng = np.random.default_rng(4)
    T = rng.standard_normal((3, 4, 3)) + 1j * rng.standard_normal((3, 4, 3))
    out = ap.best_rank_approx(T, (2, 2, 2))
    assert out.status == "converged"
    assert out.factors[0].dtype == complex
    assert abs(np.linalg.norm(out.core) ** 2 - out.value) < 1e-9


def test_best_rank_approx_invalid_ranks():
    with pytest.raises(ValueError):
        ap.best_rank_approx(np.zeros((2, 3)), (3, 1))


def test_entanglement_product_state_is_zero():
    z = np.kron([1.0, 0.0], [1.0, 0.0])
    res = ap.entanglement_measure(z, (2, 2))
    assert res.delta < 1e-10
    assert abs(np.vdot(res.product_state, z)) == pytest.approx(1.0)


def test_entanglement_bell_state_against_grid():
    z = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    res = ap.entanglement_measure(z, (2, 2))
    assert abs(res.rho - 0.5) < 1e-12
    assert abs(res.delta - (2 - np.sqrt(2))) < 1e-8
    # brute force over product states (cos a, e^{ib} sin a) (x) (cos c, e^{id} sin c)
    best = 0.0
    grid = np.linspace(0, np.pi, 25)
    for a, b, c, d in itertools.product(grid, grid * 2, grid, grid * 2):
        x = np.kron([np.cos(a), np.exp(1j * b) * np.sin(a)], [np.cos(c), np.exp(1j * d) * np.sin(c)])
        best = max(best, abs(np.vdot(x, z)))
    assert best <= np.sqrt(0.5) + 1e-12
    assert abs((2 - 2 * best) - res.delta) < 1e-2


def test_entanglement_range_and_unit_norm_required():
    rng = np.random.default_rng(5)
    z = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    z /= np.linalg.norm(z)
    res = ap.entanglement_measure(z, (2, 2, 2))
    assert 0 <= res.delta <= 2
    with pytest.raises(ValueError):
        ap.entanglement_measure(2 * z, (2, 2, 2))
    with pytest.raises(ValueError):
        ap.entanglement_measure(z, (2, 3))


def test_entanglement_local_unitary_invariance():
    rng = np.random.default_rng(6)
    z = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    z /= np.linalg.norm(z)
    base = ap.entanglement_measure(z, (2, 3)).delta
    for i in range(3):
        Q1 = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
        Q2 = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))[0]
        assert abs(ap.entanglement_measure(np.kron(Q1, Q2) @ z, (2, 3)).delta - base) < 1e-8


def test_subspace_error_permutation_and_identity():
    truth = [np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0])]
    assert ap.subspace_error(truth[::-1], truth) == pytest.approx(0.0, abs=1e-6)
    assert ap.principal_angle_error(truth[::-1], truth) == pytest.approx(0.0, abs=1e-6)
    # orthogonal estimates give 90 degrees
    assert ap.subspace_error([np.diag([0, 0, 1.0])] * 2, truth) == pytest.approx(90.0)


def test_subspace_error_rank_normalization():
    # the 1/m^2 normalization caps the cosine at 1/m for rank-m projectors
    Q = np.diag([1.0, 1.0, 0, 0])
    assert ap.subspace_error([Q], [Q]) == pytest.approx(60.0)
    assert ap.principal_angle_error([Q], [Q]) == pytest.approx(0.0, abs=1e-6)


def test_cluster_noiseless_hyperplanes():
    prob = ap.generate_hyperplane_data(3, 2, 200, 0.0, seed=7)
    res = ap.cluster_subspaces(prob)
    assert res.value < 1e-10
    assert res.err < 1e-4
    agree = np.mean(res.assignments == prob.labels)
    assert max(agree, 1 - agree) > 0.95


def test_cluster_single_hyperplane_is_pca():
    prob = ap.generate_subspace_data(4, [3], 100, 0.0, seed=8)
    res = ap.cluster_subspaces(prob)
    np.testing.assert_allclose(res.projectors[0], prob.ground_truth[0], atol=1e-8)
    assert res.err < 1e-4


def test_cluster_higher_codimension_uses_random_starts():
    prob = ap.generate_subspace_data(4, [2, 2], 100, 0.0, seed=9)
    res = ap.cluster_subspaces(prob, multi_start=6)
    assert res.start_seed is not None
    assert res.mean_angle < 1e-3
    assert res.value < 1e-10


def test_cluster_rejects_complex_and_zero_points():
    with pytest.raises(ValueError):
        ap.ClusterProblem(np.ones((5, 3)) * 1j, (1,))
    with pytest.raises(ValueError):
        ap.cluster_subspaces(ap.ClusterProblem(np.zeros((5, 3)), (1,)))


def test_pda_recovers_normals():
    prob = ap.generate_hyperplane_data(3, 2, 200, 0.0, seed=10)
    P0 = ap.pda_init_hyperplanes(prob.points, 2)
    assert math.radians(ap.principal_angle_error(P0.projectors, prob.ground_truth)) < 1e-6


def test_pda_single_hyperplane_is_least_singular_vector():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((50, 3)) * [3.0, 2.0, 0.1]
    b = ap.pda_normals(X, 1)[:, 0]
    v = np.linalg.svd(X)[2][-1]
    assert abs(abs(b @ v) - 1) < 1e-10


def test_pda_errors():
    with pytest.raises(ValueError):
        ap.pda_normals(np.ones((3, 3)), 2)
    with pytest.raises(ap.UnsupportedConfigurationError):
        ap.pda_init_hyperplanes(np.ones((20, 4)), 2, codims=(2, 1))


def test_cluster_noise_improves_on_pda():
    errs, inits = [], []
    for seed in range(5):
        prob = ap.generate_hyperplane_data(3, 2, 200, 0.05, seed=100 + seed)
        res = ap.cluster_subspaces(prob)
        errs.append(res.err)
        inits.append(res.init_err)
    assert np.mean(errs) < np.mean(inits)
    assert np.mean(errs) <= 5.0


def test_select_small_example():
    res = ap.combinatorial_select(ap.SelectionProblem(np.array([[1.0, 2.0], [3.0, 4.0]]), 1, 1))
    assert res.rows == [1] and res.cols == [1]
    assert res.value == 4.0


def test_select_full_sets_sum_everything():
    rng = np.random.default_rng(12)
    Lam = rng.uniform(0.1, 1, (3, 4))
    res = ap.combinatorial_select(ap.SelectionProblem(Lam, 4, 3))
    assert res.value == pytest.approx(Lam.sum())


def test_select_value_is_exact_sum_and_usually_optimal():
    rng = np.random.default_rng(13)
    hits = 0
    for _ in range(10):
        Lam = rng.uniform(0.01, 1, (5, 5))
        res = ap.combinatorial_select(ap.SelectionProblem(Lam, 2, 3))
        assert res.value == Lam[np.ix_(res.rows, res.cols)].sum()
        assert len(res.rows) == 3 and len(res.cols) == 2
        hits += res.value >= ap.brute_force_select(Lam, 2, 3)[2] - 1e-12
    assert hits >= 9


def test_selection_problem_validation():
    with pytest.raises(ValueError):
        ap.SelectionProblem(np.array([[1.0, -1.0]]), 1, 1)
    with pytest.raises(ValueError):
        ap.SelectionProblem(np.ones((2, 2)), 3, 1)


def test_round_to_coordinates_ties_prefer_lower_index():
    assert ap.round_to_coordinates(np.diag([0.5, 0.5, 0.2]), 1) == [0]
    assert ap.round_to_coordinates(np.diag([0.1, 0.9, 0.8]), 2) == [1, 2]


def test_best_response_polish_never_decreases():
    rng = np.random.default_rng(14)
    for _ in range(20):
        Lam = rng.uniform(0.01, 1, (5, 5))
        rows, cols = [0, 1], [3]
        r2, c2 = ap.best_response_polish(Lam, rows, cols, 1, 2)
        assert ap.selection_score(Lam, r2, c2) >= ap.selection_score(Lam, rows, cols)


def test_run_multistart_tie_breaks_on_seed():
    def fn(s):
        return sv.SolveResult(gm.standard_product((1,), (2,)), 1.0, "converged", [], "x", s)

    seed, res = ap.run_multistart(fn, [5, 3, 4])
    assert seed == 3


def test_max_threads_env(monkeypatch):
    monkeypatch.setenv("GRASSTENSOR_THREADS", "3")
    assert ap.max_threads() == 3
    monkeypatch.setenv("GRASSTENSOR_THREADS", "0")
    assert ap.max_threads() == 1
    monkeypatch.setenv("GRASSTENSOR_THREADS", "many")
    assert ap.max_threads() >= 1

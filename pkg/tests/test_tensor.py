import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grasstensor import tensor as tc
from grasstensor import objective as ob
from grasstensor import solvers as sv
from grasstensor.applications import _point_from_factors


def _rand(shape, seed, complex_=False):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal(shape)
    if complex_:
        T = T + 1j * rng.standard_normal(shape)
    return T


def test_unfold_mode0_of_2x2x2_lists_entries_in_index_order():
    a = np.arange(1, 9).reshape(2, 2, 2)  # a[i,j,k] = 4i + 2j + k + 1
    expected = np.array([[a[0, 0, 0], a[0, 0, 1], a[0, 1, 0], a[0, 1, 1]],
                         [a[1, 0, 0], a[1, 0, 1], a[1, 1, 0], a[1, 1, 1]]])
    np.testing.assert_array_equal(tc.unfold(a, (0,)), expected)


def test_unfold_order_one_is_column():
    v = np.arange(5.0)
    M = tc.unfold(v, (0,))
    assert M.shape == (5, 1)
    np.testing.assert_array_equal(M[:, 0], v)


def test_unfold_matches_explicit_loops():
    T = _rand((2, 3, 4), 0)
    M = tc.unfold(T, (1,), (0, 2))
    for i in range(2):
        for j in range(3):
            for k in range(4):
                assert M[j, i * 4 + k] == T[i, j, k]


def test_fold_inverts_unfold_bit_exact():
    T = _rand((3, 4, 5), 1)
    M = tc.unfold(T, (1,))
    back = tc.fold(M, T.shape, (1,))
    assert np.array_equal(back, T)


@settings(max_examples=40, deadline=None)
@given(shape=st.lists(st.integers(1, 4), min_size=1, max_size=4), data=st.data())
def test_fold_unfold_roundtrip_property(shape, data):
    order = len(shape)
    rows = data.draw(st.permutations(range(order)))
    q = data.draw(st.integers(1, order))
    T = np.arange(int(np.prod(shape)), dtype=float).reshape(shape)
    M = tc.unfold(T, rows[:q])
    assert np.array_equal(tc.fold(M, shape, rows[:q]), T)


@pytest.mark.parametrize("rows,cols", [((0, 0), None), ((0,), (0, 1, 2)), ((0,), (1,)), ((3,), None)])
def test_unfold_rejects_bad_partitions(rows, cols):
    with pytest.raises(tc.InvalidSpecError):
        tc.unfold(np.zeros((2, 2, 2)), rows, cols)


def test_vec_2x2_is_row_major():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(tc.vec(M)[:, 0], [1.0, 2.0, 3.0, 4.0])


def test_vec_rejects_scalar():
    with pytest.raises(ValueError):
        tc.vec(np.float64(3.0))


def test_vec_of_one_hot_is_basis_vector():
    T = np.zeros((2, 3, 2))
    T[1, 2, 0] = 1.0
    v = tc.vec(T)[:, 0]
    assert v[np.ravel_multi_index((1, 2, 0), T.shape)] == 1.0
    assert v.sum() == 1.0


def test_vec_matches_kron_of_factors():
    u, w = _rand(3, 2), _rand(4, 3)
    np.testing.assert_allclose(tc.vec(np.multiply.outer(u, w))[:, 0], np.kron(u, w))


def test_mode_multiply_identity_is_noop():
    T = _rand((3, 2, 4), 4)
    np.testing.assert_array_equal(tc.mode_multiply(T, np.eye(2), 1), T)


def test_mode_multiply_acts_on_unfolding():
    T = _rand((3, 3, 3), 5)
    X = _rand((2, 3), 6)
    for j in range(3):
        lhs = tc.unfold(tc.mode_multiply(T, X, j), (j,))
        np.testing.assert_allclose(lhs, X @ tc.unfold(T, (j,)), atol=1e-13)


def test_mode_multiply_selector_row_gives_slice():
    T = _rand((2, 2, 2), 7)
    out = tc.mode_multiply(T, np.array([[1.0, 0.0]]), 0)
    np.testing.assert_array_equal(out[0], T[0])


def test_mode_multiply_dimension_mismatch():
    with pytest.raises(ValueError):
        tc.mode_multiply(np.zeros((2, 3)), np.eye(2), 1)


def test_inner_and_norm():
    T = np.zeros((2, 2))
    T[0, 1] = 1
    assert tc.inner(T, T) == 1.0
    A, B = _rand((2, 3, 2), 8, True), _rand((2, 3, 2), 9, True)
    direct = sum(np.conj(A[i, j, k]) * B[i, j, k] for i in range(2) for j in range(3) for k in range(2))
    assert abs(tc.inner(A, B) - direct) < 1e-12
    with pytest.raises(ValueError):
        tc.inner(A, B[:, :2])


def test_norm_invariant_under_unitary_mode_products():
    T = _rand((3, 4, 2), 10, True)
    out = T
    for j, n in enumerate(T.shape):
        Q, _ = np.linalg.qr(_rand((n, n), 20 + j, True))
        out = tc.mode_multiply(out, Q, j)
    assert abs(tc.norm(out) - tc.norm(T)) < 1e-12


def test_hosvd_matrix_case_is_truncated_svd():
    Y = _rand((6, 5), 11)
    core, factors = tc.hosvd_truncate(Y, (2, 2))
    err = np.linalg.norm(Y - tc.reconstruct(core, factors)) ** 2
    s = np.linalg.svd(Y, compute_uv=False)
    assert abs(err - np.sum(s[2:] ** 2)) < 1e-10


def test_hosvd_rank_one_tensor_exact():
    u, v, w = _rand(3, 12), _rand(4, 13), _rand(5, 14)
    T = np.einsum("i,j,k->ijk", u, v, w)
    core, factors = tc.hosvd_truncate(T, (1, 1, 1))
    assert np.linalg.norm(T - tc.reconstruct(core, factors)) < 1e-12


def test_hosvd_factors_are_isometries_and_deterministic():
    T = _rand((4, 5, 3), 15, True)
    core, factors = tc.hosvd_truncate(T, (2, 3, 2))
    core2, factors2 = tc.hosvd_truncate(T, (2, 3, 2))
    for U, U2 in zip(factors, factors2):
        np.testing.assert_allclose(U.conj().T @ U, np.eye(U.shape[1]), atol=1e-12)
        np.testing.assert_array_equal(U, U2)
    assert core.shape == (2, 3, 2)


def test_hooi_improves_on_hosvd():
    T = _rand((5, 5, 5), 16)
    _, factors = tc.hosvd_truncate(T, (2, 2, 2))
    A = ob.RankOne(T)
    P0 = _point_from_factors(factors, "real")
    P1 = sv.hooi(A, P0, 10)
    assert A.value(P1) >= A.value(P0) - 1e-12


@pytest.mark.parametrize("ranks", [(0, 1, 1), (1, 5, 1), (1, 1)])
def test_hosvd_rejects_bad_ranks(ranks):
    with pytest.raises(ValueError):
        tc.hosvd_truncate(np.zeros((2, 3, 4)), ranks)


def test_multilinear_rank_cases():
    u, v, w = _rand(3, 17), _rand(4, 18), _rand(5, 19)
    assert tc.multilinear_rank(np.einsum("i,j,k->ijk", u, v, w)) == (1, 1, 1)
    T = _rand((3, 4, 5), 20)
    assert tc.multilinear_rank(T) == (3, 4, 5)
    assert tc.multilinear_rank(np.zeros((2, 3, 2))) == (0, 0, 0)


def test_leading_left_singular_phase_convention():
    M = _rand((5, 7), 21, True)
    U, s = tc.leading_left_singular(M, 3)
    assert np.all(np.diff(s) <= 0)
    # first non-negligible entry of each column is real and positive
    for col in U.T:
        top = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert abs(top.imag) < 1e-12 and top.real > 0

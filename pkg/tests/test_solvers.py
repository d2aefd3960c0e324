import math

import numpy as np
import pytest

from grasstensor import grassmann as gm
from grasstensor import objective as ob
from grasstensor import rayleigh as ry
from grasstensor import solvers as sv
from grasstensor import tensor as tc
from grasstensor.applications import _point_from_factors
from grasstensor.checks import _random_hermitian

LAM = np.array([0.0, 3.0, 2.0, 1.0])


def _line(theta):
    """Real line in R^2 at angle theta from e_1, as a one-factor product point."""
    F = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    return gm.ProductPoint((gm.GrassPoint(1, F),))


def _example_point(first, second):
    return gm.ProductPoint((ry.coordinate_point([first], 2, "real"), ry.coordinate_point([second], 2, "real")))


def test_config_validation_and_with():
    with pytest.raises(ValueError):
        sv.SolverConfig(epsilon=0)
    with pytest.raises(ValueError):
        sv.SolverConfig(shrink=1.5)
    cfg = sv.SolverConfig().with_(max_iter=7)
    assert cfg.max_iter == 7 and cfg.epsilon == sv.SolverConfig().epsilon


def test_relative_gradient_floor():
    assert sv.relative_gradient(1e-3, 0.0) == 1e-3
    assert sv.relative_gradient(1e-3, 10.0) == pytest.approx(1e-4)


def test_ascent_check():
    rng = np.random.default_rng(0)
    A = ob.Dense(_random_hermitian(rng, 6), (2, 3))
    P = gm.random_product((2, 3), (1, 1), seed=1)
    g = ry.gradient(A, P)
    assert sv.ascent_check(A, P, g)
    assert not sv.ascent_check(A, P, [-x for x in g])


def test_armijo_within_factor_two_of_exact_maximizer():
    # rho = cos^2(angle to e_1); along the QR curve the angle moves by atan(alpha)
    A = ob.Diagonal([1.0, 0.0], (2,))
    theta = math.pi / 10
    P = _line(theta)
    g = ry.gradient(A, P)
    Z = [np.sign(g[0])]
    exact = math.tan(theta)
    alpha = sv.armijo_step(A, P, Z)
    assert exact / 2 <= alpha <= 2 * exact
    grid = np.linspace(0, 2, 4001)
    best = grid[np.argmax([ry.rho(A, gm.product_qr_retract(P, Z, a)) for a in grid])]
    assert abs(best - exact) < 1e-3


def test_armijo_rejects_descent_direction():
    A = ob.Diagonal([1.0, 0.0], (2,))
    P = _line(0.4)
    g = ry.gradient(A, P)
    assert sv.armijo_step(A, P, [-g[0]]) == 0.0


def test_rcg_first_step_is_exact_newton_step_on_geodesic():
    A = ob.Diagonal([1.0, 0.0], (2,))
    P = _line(math.pi / 10)
    Z = ry.gradient(A, P)
    f = lambda t: ry.rho(A, gm.product_exp_retract(P, Z, t))  # noqa: E731
    h = 1e-4
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(h) - 2 * f(0) + f(-h)) / h**2
    newton = -d1 / d2
    res = sv.rcg(A, P, sv.SolverConfig(max_iter=1))
    assert res.trace[1].step == "newton1d"
    assert abs(res.trace[1].alpha - newton) / newton < 1e-6


def test_rcg_zero_gradient_start_converges_immediately():
    A = ob.Diagonal(LAM, (2, 2))
    res = sv.rcg(A, _example_point(0, 1))
    assert res.status == "converged"
    assert res.iterations == 0


def test_newton_at_critical_point():
    A = ob.Diagonal(LAM, (2, 2))
    res = sv.newton_like(A, _example_point(0, 1))
    assert res.status == "converged" and res.iterations <= 1
    assert res.value == 3.0


def test_newton_from_perturbed_local_maximizer():
    A = ob.Diagonal(LAM, (2, 2))
    P0 = _example_point(1, 0)
    Z = gm.random_tangent(P0, seed=3)
    Z = [1e-2 * z / gm.tangent_norm(Z) for z in Z]
    res = sv.newton_like(A, gm.product_qr_retract(P0, Z, 1.0))
    assert res.status == "converged"
    assert abs(res.value - 2.0) < 1e-12
    assert ry.critical_residual(A, res.point) < 1e-12


def test_newton_residual_and_gradient_vanish_together():
    rng = np.random.default_rng(4)
    T = rng.standard_normal((4, 4, 4))
    A = ob.RankOne(T)
    _, factors = tc.hosvd_truncate(T, (2, 2, 2))
    res = sv.newton_like(A, _point_from_factors(factors, "real"))
    assert res.converged
    assert ry.critical_residual(A, res.point) < 1e-10
    assert gm.tangent_norm(ry.gradient(A, res.point)) < 1e-10


def test_newton_minimize_single_factor():
    rng = np.random.default_rng(5)
    H = _random_hermitian(rng, 6)
    A = ob.Dense(H, (6,), sense="minimize")
    P0 = gm.random_product((6,), (2,), seed=6)
    # Newton reaches some critical point; RCG only descends and finds the minimum
    res = sv.newton_like(A, P0)
    assert ry.critical_residual(A, res.point) < 1e-8
    res2 = sv.rcg(A, P0, sv.SolverConfig(max_iter=1000))
    assert abs(res2.value - np.sum(np.linalg.eigvalsh(H)[:2])) < 1e-9


def test_rcg_planted_low_rank_fast():
    rng = np.random.default_rng(7)
    core = rng.standard_normal((2, 2, 2))
    Us = [np.linalg.qr(rng.standard_normal((8, 2)))[0] for _ in range(3)]
    T = tc.reconstruct(core, Us) + 1e-6 * rng.standard_normal((8, 8, 8))
    A = ob.RankOne(T)
    _, factors = tc.hosvd_truncate(T, (2, 2, 2))
    res = sv.rcg(A, _point_from_factors(factors, "real"), sv.SolverConfig(epsilon=1e-10))
    assert res.converged
    assert res.iterations <= 50


def test_rcg_trace_is_monotone():
    rng = np.random.default_rng(8)
    A = ob.RankOne(rng.standard_normal((5, 5, 5)))
    res = sv.rcg(A, gm.random_product((5, 5, 5), (2, 2, 2), seed=9, field="real"),
                 sv.SolverConfig(epsilon=1e-10, max_iter=500))
    rhos = [t.rho for t in res.trace]
    assert all(b >= a - 1e-12 * max(1, abs(a)) for a, b in zip(rhos, rhos[1:]))


def test_hooi_planted_rank_one_single_sweep():
    rng = np.random.default_rng(10)
    u, v, w = rng.standard_normal(4), rng.standard_normal(5), rng.standard_normal(3)
    T = np.einsum("i,j,k->ijk", u, v, w)
    A = ob.RankOne(T)
    P = sv.hooi(A, gm.random_product((4, 5, 3), (1, 1, 1), seed=11, field="real"), 1)
    assert abs(A.value(P) - np.linalg.norm(T) ** 2) < 1e-10


def test_hooi_monotone_50_sweeps():
    rng = np.random.default_rng(12)
    A = ob.RankOne(rng.standard_normal((8, 8, 8)))
    history = []
    P0 = gm.random_product((8, 8, 8), (2, 2, 2), seed=13, field="real")
    history.append(A.value(P0))
    sv.hooi(A, P0, 50, history)
    assert len(history) >= 50
    assert np.all(np.diff(history) >= -1e-12 * history[-1])


def test_hooi_matrix_case_is_eckart_young():
    rng = np.random.default_rng(14)
    Y = rng.standard_normal((7, 5))
    A = ob.RankOne(Y)
    s = np.linalg.svd(Y, compute_uv=False)
    # from the truncated SVD one sweep is already optimal; from a random start
    # the sweeps behave like subspace iteration
    _, factors = tc.hosvd_truncate(Y, (2, 2))
    P = sv.hooi(A, _point_from_factors(factors, "real"), 1)
    assert abs(A.value(P) - np.sum(s[:2] ** 2)) < 1e-10
    P = sv.hooi(A, gm.random_product((7, 5), (2, 2), seed=15, field="real"), 200)
    assert abs(A.value(P) - np.sum(s[:2] ** 2)) < 1e-10


def test_hooi_requires_rank_one():
    A = ob.Diagonal(LAM, (2, 2))
    with pytest.raises(TypeError):
        sv.hooi(A, _example_point(0, 0), 1)


def test_solve_dispatch_and_unknown_method():
    rng = np.random.default_rng(16)
    A = ob.RankOne(rng.standard_normal((3, 3)))
    P0 = gm.random_product((3, 3), (1, 1), seed=17, field="real")
    for method in ("newton", "rcg", "hooi"):
        res = sv.solve(A, P0, method, sv.SolverConfig(epsilon=1e-10, max_iter=500))
        assert res.method == method
        assert res.converged
    with pytest.raises(ValueError):
        sv.solve(A, P0, "simplex")


def test_max_iter_status():
    rng = np.random.default_rng(18)
    A = ob.RankOne(rng.standard_normal((6, 6, 6)))
    P0 = gm.random_product((6, 6, 6), (2, 2, 2), seed=19, field="real")
    res = sv.rcg(A, P0, sv.SolverConfig(max_iter=2))
    assert res.status == "maxIter"
    assert res.iterations == 2
    assert len(res.trace) == 3


def test_non_finite_objective_raises_with_trace():
    A = ob.Diagonal([np.nan, 1.0, 0.0, 0.0], (2, 2))
    with pytest.raises(sv.NonFiniteError) as info:
        sv.newton_like(A, gm.random_product((2, 2), (1, 1), seed=20, field="real"))
    assert isinstance(info.value.trace, list)


def test_newton_without_safeguard_reports_not_ascent():
    # start near the saddle of the example objective, where the Newton step descends
    A = ob.Diagonal(LAM, (2, 2))
    found = False
    for seed in range(20):
        P0 = _example_point(0, 0)
        Z = gm.random_tangent(P0, seed=seed)
        P0 = gm.product_qr_retract(P0, [1e-3 * z for z in Z], 1.0)
        res = sv.newton_like(A, P0, sv.SolverConfig(safeguard=False))
        assert res.status in sv.STATUSES
        found |= res.status == "notAscent"
    assert found


def test_trace_records_are_deterministic():
    rng = np.random.default_rng(21)
    A = ob.RankOne(rng.standard_normal((4, 4, 4)))
    P0 = gm.random_product((4, 4, 4), (2, 2, 2), seed=22, field="real")
    a = sv.newton_like(A, P0)
    b = sv.newton_like(A, P0)
    strip = lambda tr: [repr((t.iter, t.rho, t.relgrad, t.alpha, t.step)) for t in tr]  # noqa: E731
    assert strip(a.trace) == strip(b.trace)

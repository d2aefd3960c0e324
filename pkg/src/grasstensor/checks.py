"""Self-check battery: oracle comparisons and invariants on small seeded instances.

Each check returns ``(passed, detail)``.  Every tolerance is multiplied by
``tol_scale``; shrinking it (e.g. to 1e-30) makes the numerical checks fail,
which is how the reporting path itself is tested.
"""

from __future__ import annotations

import itertools
import time
from typing import Callable

import numpy as np

from . import applications as ap
from . import grassmann as gm
from . import objective as ob
from . import rayleigh as ry
from . import solvers as sv
from . import tensor as tc


def _random_hermitian(rng, N, field="complex"):
    H = rng.standard_normal((N, N))
    if field == "complex":
        H = H + 1j * rng.standard_normal((N, N))
    return (H + H.conj().T) / 2


def random_objectives(rng, dims, field="complex"):
    """One instance of each variant on the given dimensions (sum of powers needs equal dims)."""
    N = int(np.prod(dims))
    T = rng.standard_normal(dims)
    if field == "complex":
        T = T + 1j * rng.standard_normal(dims)
    out = [
        ob.Dense(_random_hermitian(rng, N, field), dims),
        ob.RankOne(T),
        ob.KroneckerFactors([_random_hermitian(rng, n, field) for n in dims]),
        ob.Diagonal(rng.standard_normal(N), dims),
    ]
    if len(set(dims)) == 1:
        X = rng.standard_normal((4, dims[0]))
        if field == "complex":
            X = X + 1j * rng.standard_normal(X.shape)
        out.append(ob.SumKronPowers(X, len(dims)))
    return out


def check_unfold_roundtrip(tol_scale: float):
    rng = np.random.default_rng(1)
    T = rng.standard_normal((2, 3, 2, 2))
    worst = 0.0
    for q in range(1, 4):
        for rows in itertools.permutations(range(4), q):
            M = tc.unfold(T, rows)
            worst = max(worst, float(np.max(np.abs(tc.fold(M, T.shape, rows) - T))))
    # exact by construction, so this check ignores tol_scale
    return worst == 0.0, f"max diff {worst:.1e}"


def check_psi_oracle(tol_scale: float):
    rng = np.random.default_rng(2)
    tol = 1e-10 * tol_scale
    worst = 0.0
    for dims, ranks in [((2, 3), (1, 2)), ((2, 2, 2), (1, 1, 1)), ((3, 3), (2, 1))]:
        P = gm.random_product(dims, ranks, seed=int(rng.integers(1 << 30)))
        for A in random_objectives(rng, dims):
            D = A.dense()
            for j in range(len(dims)):
                o = ob.dense_psi_oracle(D, dims, P.projectors, (j,))
                worst = max(worst, float(np.max(np.abs(ry.psi_hat_j(A, P, j) - o))))
                for k in range(j + 1, len(dims)):
                    o = ob.dense_psi_oracle(D, dims, P.projectors, (j, k))
                    worst = max(worst, float(np.max(np.abs(ry.psi_hat_jk(A, P, j, k) - o))))
    return worst < tol, f"max diff {worst:.1e} (tol {tol:.1e})"


def _fd_instances():
    rng = np.random.default_rng(3)
    for dims, ranks in [((3, 4), (1, 2)), ((2, 3, 2), (1, 1, 1))]:
        P = gm.random_product(dims, ranks, seed=int(rng.integers(1 << 30)))
        for A in random_objectives(rng, dims):
            yield A, P


def check_gradient_fd(tol_scale: float):
    tol = 1e-6 * tol_scale
    worst = 0.0
    for i, (A, P) in enumerate(_fd_instances()):
        Z = gm.random_tangent(P, seed=i)
        f = lambda t: A.sign * ry.rho(A, gm.product_exp_retract(P, Z, t))  # noqa: E731
        h = 1e-5
        fd = (f(h) - f(-h)) / (2 * h)
        exact = gm.metric(ry.gradient(A, P), Z)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-8))
    return worst < tol, f"max rel err {worst:.1e} (tol {tol:.1e})"


def check_hessian_fd(tol_scale: float):
    tol = 1e-4 * tol_scale
    worst = 0.0
    for i, (A, P) in enumerate(_fd_instances()):
        Z = gm.random_tangent(P, seed=100 + i)
        f = lambda t: A.sign * ry.rho(A, gm.product_exp_retract(P, Z, t))  # noqa: E731
        h = 1e-4
        fd = (f(h) - 2 * f(0.0) + f(-h)) / h**2
        exact = gm.metric(ry.hessian_apply(A, P, Z), Z)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-6))
    return worst < tol, f"max rel err {worst:.1e} (tol {tol:.1e})"


def check_hessian_paths(tol_scale: float):
    tol = 1e-9 * tol_scale
    worst_sym = worst_diff = 0.0
    for i, (A, P) in enumerate(_fd_instances()):
        H = ry.hessian_reduced(A, P)
        worst_sym = max(worst_sym, float(np.max(np.abs(H - H.T))))
        Z = gm.random_tangent(P, seed=200 + i)
        diff = H @ ry.stack(P, Z) - ry.stack(P, ry.hessian_apply(A, P, Z))
        worst_diff = max(worst_diff, float(np.max(np.abs(diff))))
    ok = worst_sym < 1e-8 * tol_scale and worst_diff < tol
    return ok, f"asymmetry {worst_sym:.1e}, path diff {worst_diff:.1e}"


def check_eckart_young(tol_scale: float):
    rng = np.random.default_rng(4)
    tol = 1e-10 * tol_scale
    worst = 0.0
    for n, m in [(6, 2), (9, 3), (12, 5)]:
        H = _random_hermitian(rng, n)
        A = ob.Dense(H, (n,))
        P0 = gm.random_product((n,), (m,), seed=int(rng.integers(1 << 30)))
        # for a single factor every local maximum is global, and RCG only ascends
        res = sv.rcg(A, P0, sv.SolverConfig(max_iter=2000))
        worst = max(worst, abs(res.value - np.sum(np.linalg.eigvalsh(H)[-m:])))
    return worst < tol, f"max diff {worst:.1e} (tol {tol:.1e})"


def check_matrix_residual(tol_scale: float):
    rng = np.random.default_rng(5)
    tol = 1e-10 * tol_scale
    Y = rng.standard_normal((8, 6))
    out = ap.best_rank_approx(Y, (2, 2))
    s = np.linalg.svd(Y, compute_uv=False)
    expected = np.sqrt(np.sum(s[2:] ** 2) / np.sum(s**2))
    diff = abs(out.rel_residual - expected)
    return diff < tol, f"diff {diff:.1e} (tol {tol:.1e})"


def check_retractions(tol_scale: float):
    P = gm.random_point(5, 2, seed=6)
    Z = gm.random_tangent(gm.ProductPoint((P,)), seed=7)[0]
    a = gm.qr_retract(P, Z, 0.3).projector
    b = gm.qr_retract(P, Z, 0.3, method="closed_form").projector
    diff = float(np.max(np.abs(a - b)))
    xi = gm.tangent_ambient(P, Z)
    ratios = [np.linalg.norm(gm.qr_retract(P, Z, t).projector - P.projector - t * xi) / t**2
              for t in (1e-2, 1e-3)]
    bounded = ratios[1] <= 2 * ratios[0] + 1e-6
    return diff < 1e-10 * tol_scale and bounded, f"qr vs closed form {diff:.1e}; O(t^2) ratios {ratios[0]:.2f}, {ratios[1]:.2f}"


def check_hooi_monotone(tol_scale: float):
    rng = np.random.default_rng(8)
    T = rng.standard_normal((6, 6, 6))
    A = ob.RankOne(T)
    P = gm.random_product((6, 6, 6), (2, 2, 2), seed=9, field="real")
    history = [A.value(P)]
    sv.hooi(A, P, 20, history)
    drops = np.diff(history)
    worst = float(-np.min(drops)) if drops.size else 0.0
    return worst <= 1e-12 * max(1.0, history[-1]) * tol_scale, f"largest decrease {max(worst, 0.0):.1e}"


def check_selection_bruteforce(tol_scale: float):
    rng = np.random.default_rng(10)
    hits = total = 0
    exact = True
    for _ in range(5):
        Lam = rng.uniform(0.1, 1.0, size=(4, 4))
        for m1, m2 in [(1, 1), (2, 2), (1, 3)]:
            res = ap.combinatorial_select(ap.SelectionProblem(Lam, m1, m2))
            exact &= res.value == ap.selection_score(Lam, res.rows, res.cols)
            hits += res.value >= ap.brute_force_select(Lam, m1, m2)[2] - 1e-12 * tol_scale
            total += 1
    return exact and hits == total, f"{hits}/{total} optimal, exact scoring {exact}"


def check_entanglement_bell(tol_scale: float):
    z = np.array([1, 0, 0, 1]) / np.sqrt(2)
    res = ap.entanglement_measure(z, (2, 2))
    diff = abs(res.delta - (2 - np.sqrt(2)))
    return diff < 1e-8 * tol_scale, f"delta error {diff:.1e}"


def check_clustering_noiseless(tol_scale: float):
    prob = ap.generate_hyperplane_data(3, 2, 200, 0.0, seed=11)
    res = ap.cluster_subspaces(prob)
    ok = res.err < 1e-4 * tol_scale and res.value < 1e-10 * tol_scale
    return ok, f"err {res.err:.1e} deg, rho {res.value:.1e}"


CHECKS: list[tuple[str, Callable[[float], tuple[bool, str]]]] = [
    ("unfold-fold-roundtrip", check_unfold_roundtrip),
    ("partial-trace-dense-oracle", check_psi_oracle),
    ("gradient-finite-difference", check_gradient_fd),
    ("hessian-finite-difference", check_hessian_fd),
    ("hessian-reduced-vs-ambient", check_hessian_paths),
    ("eckart-young", check_eckart_young),
    ("matrix-approximation-residual", check_matrix_residual),
    ("retraction-consistency", check_retractions),
    ("hooi-monotone", check_hooi_monotone),
    ("selection-brute-force", check_selection_bruteforce),
    ("entanglement-bell", check_entanglement_bell),
    ("clustering-noiseless", check_clustering_noiseless),
]


def run_checks(tol_scale: float = 1.0, out=print) -> bool:
    """Run every check, print one line each, and return whether all passed."""
    all_ok = True
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            ok, detail = fn(tol_scale)
        except Exception as exc:  # a crash is a failed check, not an aborted battery
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - start
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail} [{elapsed:.2f}s]")
        all_ok &= bool(ok)
    return all_ok

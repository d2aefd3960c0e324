"""Drivers: tensor approximation, entanglement, subspace clustering, index selection.

Indices returned by :func:`combinatorial_select` are 0-based.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import grassmann as gm
from . import rayleigh as ry
from . import solvers as sv
from . import tensor as tc
from .grassmann import ProductPoint
from .objective import Diagonal, RankOne, SumKronPowers


class UnsupportedConfigurationError(ValueError):
    """Raised when an initializer does not cover the requested subspace codimensions."""


def max_threads() -> int:
    """Worker cap from ``GRASSTENSOR_THREADS`` (default: CPU count)."""
    raw = os.environ.get("GRASSTENSOR_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = os.cpu_count() or 1
    return max(1, value)


def run_multistart(fn: Callable[[int], sv.SolveResult], seeds: Sequence[int],
                   better: Callable[[float, float], bool] | None = None) -> tuple[int, sv.SolveResult]:
    """Run ``fn(seed)`` for every seed and return the best ``(seed, result)``.

    Runs execute concurrently (up to :func:`max_threads` workers).  The winner is
    chosen by value and then by the smaller seed, so the outcome does not
    depend on scheduling.  ``better(a, b)`` says whether value a beats b
    (default: larger is better).
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    workers = min(max_threads(), len(seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, seeds))
    else:
        results = [fn(s) for s in seeds]
    if better is None:
        better = lambda a, b: a > b  # noqa: E731
    best = 0
    for i in range(1, len(seeds)):
        a, b = results[i].value, results[best].value
        if better(a, b) or (a == b and seeds[i] < seeds[best]):
            best = i
    return seeds[best], results[best]


def _field_of(T: np.ndarray) -> str:
    return "complex" if np.iscomplexobj(T) else "real"


def _point_from_factors(factors, field: str) -> ProductPoint:
    return ProductPoint(tuple(gm.from_isometry(np.real(U) if field == "real" else U, field=field)
                              for U in factors))


# -- best multilinear rank approximation -------------------------------------

@dataclass
class ApproxResult:
    factors: list[np.ndarray]
    core: np.ndarray
    value: float
    rel_residual: float
    status: str
    stage_values: dict[str, float]
    result: sv.SolveResult
    point: ProductPoint

    @property
    def trace(self) -> list[sv.TraceRecord]:
        return self.result.trace

    def reconstruct(self) -> np.ndarray:
        return tc.reconstruct(self.core, self.factors)


def _rel_residual(array: np.ndarray, core: np.ndarray, factors) -> float:
    # computed from the reconstruction: sqrt(||T||^2 - rho) cancels badly near zero
    total = tc.norm(array)
    if total == 0.0:
        return 0.0
    return tc.norm(array - tc.reconstruct(core, factors)) / total


def best_rank_approx(T, ranks: Sequence[int], cfg: sv.SolverConfig | None = None,
                     method: str = "newton", field: str | None = None) -> ApproxResult:
    """Best rank-(m_1, ..., m_r) approximation by maximizing ``||T x_1 U_1^H ... x_r U_r^H||^2``.

    Pipeline: truncated HOSVD, ``cfg.warm_hooi_iters`` HOOI sweeps, then the
    chosen solver (``"newton"``, ``"rcg"``, or ``"hooi"`` for HOOI alone).  The
    optimal core for fixed factors is the projection of T, so the squared
    residual equals ``||T||^2 - rho``.
    """
    cfg = cfg or sv.SolverConfig()
    array = tc.as_array(T)
    field = field or _field_of(array)
    if field == "real" and np.iscomplexobj(array):
        raise ValueError("a complex tensor needs the complex field")
    _, factors = tc.hosvd_truncate(array, ranks)
    A = RankOne(array)
    P = _point_from_factors(factors, field)
    stages = {"hosvd": A.value(P)}
    P = sv.hooi(A, P, cfg.warm_hooi_iters)
    stages["hooi"] = A.value(P)
    method = "hooi" if method in ("hooi", "hooiOnly", "hooi_only") else method
    result = sv.solve(A, P, method, cfg)
    stages[method] = result.value
    factors = [pt.U.copy() for pt in result.point]
    core = tc.multi_mode_multiply(array, [U.conj().T for U in factors])
    return ApproxResult(factors, core, result.value, _rel_residual(array, core, factors),
                        result.status, stages, result, result.point)


# -- geometric entanglement ----------------------------------------------------

@dataclass
class EntanglementResult:
    delta: float
    rho: float
    product_state: np.ndarray
    factors: list[np.ndarray]
    result: sv.SolveResult


def entanglement_measure(z: np.ndarray, dims: Sequence[int], cfg: sv.SolverConfig | None = None,
                         tol: float = 1e-10) -> EntanglementResult:
    """Squared distance from the unit vector ``z`` to the unit product states.

    For unit x with a free global phase, ``||z - e^{i phi} x||^2`` is minimized
    at ``2 - 2 |z^H x|``, and ``max |z^H x|^2`` over product states equals
    ``max rho_A`` with ``A = z z^H`` and all ranks 1.  Hence
    ``delta = 2 - 2 sqrt(rho*)``.  The start is the rank-(1, ..., 1) HOSVD
    point refined by HOOI, which keeps the result covariant under local
    unitaries.
    """
    cfg = cfg or sv.SolverConfig()
    z = np.asarray(z, dtype=complex).reshape(-1)
    dims = tuple(int(n) for n in dims)
    if z.size != int(np.prod(dims)):
        raise ValueError(f"state of length {z.size} does not match dimensions {dims}")
    if abs(np.linalg.norm(z) - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm {np.linalg.norm(z):.12f})")
    T = z.reshape(dims)
    A = RankOne(T)
    _, factors = tc.hosvd_truncate(T, [1] * len(dims))
    P = _point_from_factors(factors, "complex")
    P = sv.hooi(A, P, cfg.warm_hooi_iters)
    result = sv.newton_like(A, P, cfg)
    value = min(max(result.value, 0.0), 1.0)
    vecs = [pt.U[:, 0].copy() for pt in result.point]
    x = np.ones(1, dtype=complex)
    for u in vecs:
        x = np.kron(x, u)
    overlap = np.vdot(x, z)
    if abs(overlap) > 0:
        x = x * (overlap / abs(overlap))
    delta = max(0.0, 2.0 - 2.0 * math.sqrt(value))
    return EntanglementResult(delta, result.value, x, vecs, result)


# -- subspace clustering --------------------------------------------------------

@dataclass
class ClusterProblem:
    """Points (rows) drawn from a union of subspaces with the given projector ranks."""

    points: np.ndarray
    codims: tuple[int, ...]
    ground_truth: list[np.ndarray] | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points))
        if np.iscomplexobj(pts):
            raise ValueError("clustering works over the real field")
        self.points = pts.astype(float)
        n = pts.shape[1]
        self.codims = tuple(int(m) for m in self.codims)
        if not self.codims:
            raise ValueError("need at least one subspace")
        for m in self.codims:
            if not 1 <= m < n:
                raise ValueError(f"codimension {m} out of range [1, {n - 1}]")


@dataclass
class ClusterResult:
    projectors: list[np.ndarray]
    assignments: np.ndarray
    value: float
    err: float | None
    mean_angle: float | None
    init_err: float | None
    result: sv.SolveResult
    start_seed: int | None = None


def normalize_points(points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Scale every row to unit norm; zero rows are dropped."""
    X = np.asarray(points, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    keep = norms > tol * max(1.0, float(np.max(norms, initial=0.0)))
    if not np.any(keep):
        raise ValueError("all data points are zero")
    return X[keep] / norms[keep, None]


def subspace_error(estimated: Sequence[np.ndarray], truth: Sequence[np.ndarray]) -> float:
    """``(1/r) sum_j arccos(|tr(P_j Q_j)| / m_j^2)`` in degrees, minimized over label permutations.

    ``m_j`` is the rank of the true projector ``Q_j``.
    """
    r = len(truth)
    if len(estimated) != r:
        raise ValueError("estimated and true subspace counts differ")
    ranks = [int(round(np.trace(Q).real)) for Q in truth]
    best = np.inf
    for perm in itertools.permutations(range(r)):
        total = 0.0
        for j, p in enumerate(perm):
            c = abs(np.trace(estimated[p] @ truth[j]).real) / ranks[j] ** 2
            total += math.degrees(math.acos(min(1.0, c)))
        best = min(best, total / r)
    return float(best)


def principal_angle_error(estimated: Sequence[np.ndarray], truth: Sequence[np.ndarray]) -> float:
    """Mean largest principal angle (degrees) between matched range spaces, best permutation."""
    import scipy.linalg

    def basis(P):
        w, v = np.linalg.eigh(P)
        return v[:, w > 0.5]

    r = len(truth)
    Bt = [basis(Q) for Q in truth]
    Be = [basis(P) for P in estimated]
    best = np.inf
    for perm in itertools.permutations(range(r)):
        total = 0.0
        for j, p in enumerate(perm):
            if Be[p].shape[1] == 0 or Bt[j].shape[1] == 0:
                total += 90.0
                continue
            total += float(np.degrees(np.max(scipy.linalg.subspace_angles(Be[p], Bt[j]))))
        best = min(best, total / r)
    return float(best)


def _veronese_exponents(n: int, degree: int) -> np.ndarray:
    exps = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        e = np.zeros(n, dtype=int)
        for i in combo:
            e[i] += 1
        exps.append(e)
    return np.array(exps)


def _monomials(X: np.ndarray, E: np.ndarray) -> np.ndarray:
    return np.prod(X[:, None, :] ** E[None, :, :], axis=2)


def _monomial_gradients(X: np.ndarray, E: np.ndarray, c: np.ndarray) -> np.ndarray:
    L, n = X.shape
    grads = np.zeros((L, n))
    for a in range(n):
        Ea = E.copy()
        coef = Ea[:, a].astype(float)
        Ea[:, a] = np.maximum(Ea[:, a] - 1, 0)
        grads[:, a] = _monomials(X, Ea) @ (coef * c)
    return grads


def pda_normals(points: np.ndarray, r: int) -> np.ndarray:
    """Hyperplane normals (columns, unit length) from the vanishing degree-r polynomial."""
    X = np.asarray(points, dtype=float)
    L, n = X.shape
    E = _veronese_exponents(n, r)
    if L < E.shape[0]:
        raise ValueError(f"need at least {E.shape[0]} points for degree {r} in dimension {n}, got {L}")
    V = _monomials(X, E)
    _, _, Vh = np.linalg.svd(V, full_matrices=False)
    c = Vh[-1]
    grads = _monomial_gradients(X, E, c)
    gnorm = np.linalg.norm(grads, axis=1)
    values = np.abs(V @ c)
    # Points far from the intersections have large gradients; among them, the
    # ones closest to the zero set carry the cleanest normal estimates.
    strong = np.flatnonzero(gnorm >= 0.5 * np.median(gnorm[gnorm > 0])) if np.any(gnorm > 0) else np.arange(L)
    dist = values[strong] / np.maximum(gnorm[strong], 1e-300)
    candidates = strong[np.argsort(dist, kind="stable")]
    candidates = candidates[: max(r, len(candidates) // 2)]
    normals = grads[candidates] / gnorm[candidates, None]
    chosen = [0]
    while len(chosen) < r:
        sep = np.min(1.0 - np.abs(normals @ normals[chosen].T), axis=1)
        sep[chosen] = -np.inf
        chosen.append(int(np.argmax(sep)))
    return normals[chosen].T


def pda_init_hyperplanes(points: np.ndarray, r: int, codims: Sequence[int] | None = None) -> ProductPoint:
    """Initial rank-1 projectors ``b_k b_k^T`` onto estimated hyperplane normals."""
    if codims is not None and any(int(m) != 1 for m in codims):
        raise UnsupportedConfigurationError("the algebraic initializer only handles hyperplanes (codimension 1)")
    B = pda_normals(points, r)
    return ProductPoint(tuple(gm.from_isometry(B[:, [k]], field="real") for k in range(r)))


def cluster_subspaces(prob: ClusterProblem, cfg: sv.SolverConfig | None = None, init: str = "pda",
                      method: str = "newton", start: ProductPoint | None = None,
                      multi_start: int = 5, seed: int = 0) -> ClusterResult:
    """Recover the subspaces by minimizing ``sum_l prod_k ||P_k x_l||^2`` over real Grassmannians.

    ``init="pda"`` falls back to random starts when some codimension exceeds 1.
    Random initialization runs ``multi_start`` seeded starts and keeps the lowest
    objective.  Point ``l`` is assigned to ``argmin_k ||P_k x_l||``.
    """
    cfg = cfg or sv.SolverConfig()
    X = normalize_points(prob.points)
    n = X.shape[1]
    r = len(prob.codims)
    A = SumKronPowers(X, r, sense="minimize")
    dims = [n] * r

    init_err = None
    start_seed = None
    if init == "given":
        if start is None:
            raise ValueError("init='given' needs a start point")
        result = sv.solve(A, start, method, cfg)
    elif init == "pda" and all(m == 1 for m in prob.codims):
        P0 = pda_init_hyperplanes(X, r, prob.codims)
        if prob.ground_truth is not None:
            init_err = subspace_error(P0.projectors, prob.ground_truth)
        result = sv.solve(A, P0, method, cfg)
    elif init in ("pda", "random"):
        def run(s):
            P0 = gm.random_product(dims, prob.codims, seed=s, field="real")
            return sv.solve(A, P0, method, cfg)

        seeds = [seed + i for i in range(max(1, multi_start))]
        start_seed, result = run_multistart(run, seeds, better=lambda a, b: a < b)
    else:
        raise ValueError(f"unknown initialization {init!r}")

    projectors = [np.real(P) for P in result.point.projectors]
    residuals = np.stack([np.linalg.norm(X @ P, axis=1) for P in projectors], axis=1)
    assignments = np.argmin(residuals, axis=1)
    err = angle = None
    if prob.ground_truth is not None:
        err = subspace_error(projectors, prob.ground_truth)
        angle = principal_angle_error(projectors, prob.ground_truth)
    return ClusterResult(projectors, assignments, result.value, err, angle, init_err, result, start_seed)


def generate_subspace_data(n: int, dims: Sequence[int], points_per: int | Sequence[int] = 200,
                           noise: float = 0.0, seed: int = 0, half_range: float = 5.0) -> ClusterProblem:
    """Samples from a union of random linear subspaces of R^n.

    Subspace k has dimension ``dims[k]``; its points are ``B_k c`` with ``c``
    uniform in ``[-half_range, half_range]``.  Noise is Gaussian with standard
    deviation ``noise * half_range`` per coordinate.  Ground-truth projectors are
    onto the orthogonal complements (rank ``n - dims[k]``).
    """
    rng = np.random.default_rng(seed)
    if isinstance(points_per, int):
        points_per = [points_per] * len(dims)
    blocks, labels, truth = [], [], []
    for k, (d, count) in enumerate(zip(dims, points_per)):
        if not 1 <= d < n:
            raise ValueError(f"subspace dimension {d} out of range [1, {n - 1}]")
        B, _ = np.linalg.qr(rng.standard_normal((n, d)))
        C = rng.uniform(-half_range, half_range, size=(count, d))
        blocks.append(C @ B.T)
        labels.append(np.full(count, k))
        truth.append(np.eye(n) - B @ B.T)
    X = np.vstack(blocks)
    if noise > 0:
        X = X + rng.normal(scale=noise * half_range, size=X.shape)
    return ClusterProblem(X, tuple(n - d for d in dims), truth, np.concatenate(labels))


def generate_hyperplane_data(n: int = 3, r: int = 2, points_per: int = 200, noise: float = 0.0,
                             seed: int = 0) -> ClusterProblem:
    return generate_subspace_data(n, [n - 1] * r, points_per, noise, seed)


# -- combinatorial selection ---------------------------------------------------

@dataclass
class SelectionProblem:
    """Positive array ``Lam`` (n_2 x n_1); pick m_1 columns and m_2 rows."""

    Lam: np.ndarray
    m1: int
    m2: int

    def __post_init__(self):
        Lam = np.asarray(self.Lam, dtype=float)
        if Lam.ndim != 2:
            raise ValueError("Lambda must be a matrix")
        if np.any(Lam <= 0):
            raise ValueError("Lambda entries must be positive")
        n2, n1 = Lam.shape
        if not (1 <= self.m1 <= n1 and 1 <= self.m2 <= n2):
            raise ValueError(f"ranks ({self.m1}, {self.m2}) out of range for shape {Lam.shape}")
        self.Lam = Lam


@dataclass
class SelectionResult:
    rows: list[int]
    cols: list[int]
    value: float
    relaxed_value: float
    result: sv.SolveResult = field(repr=False, default=None)


def selection_objective(prob: SelectionProblem) -> Diagonal:
    """``diag(vec)`` objective with factor 1 acting on columns and factor 2 on rows."""
    n2, n1 = prob.Lam.shape
    return Diagonal(prob.Lam.T.reshape(-1), (n1, n2))


def round_to_coordinates(P: np.ndarray, m: int) -> list[int]:
    """Indices of the m largest diagonal entries (ties: lower index first), ascending."""
    diag = np.real(np.diagonal(P))
    order = sorted(range(len(diag)), key=lambda i: (-diag[i], i))
    return sorted(order[:m])


def selection_score(Lam: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> float:
    return float(np.sum(np.asarray(Lam)[np.ix_(list(rows), list(cols))]))


def brute_force_select(Lam: np.ndarray, m1: int, m2: int) -> tuple[list[int], list[int], float]:
    """Exhaustive search (rows, cols, value)."""
    Lam = np.asarray(Lam)
    n2, n1 = Lam.shape
    best = (None, None, -np.inf)
    for rows in itertools.combinations(range(n2), m2):
        sums = Lam[list(rows)].sum(axis=0)
        cols = sorted(np.argsort(-sums, kind="stable")[:m1].tolist())
        value = float(sums[cols].sum())
        if value > best[2]:
            best = (list(rows), cols, value)
    # report the value with the same summation as selection_score
    return best[0], best[1], selection_score(Lam, best[0], best[1])


def best_response_polish(Lam: np.ndarray, rows: Sequence[int], cols: Sequence[int],
                         m1: int, m2: int) -> tuple[list[int], list[int]]:
    """Alternate exact best responses (columns given rows, rows given columns) until stable.

    For fixed P_2 the best P_1 is the coordinate projector on the m_1 largest
    diagonal entries of psi_hat_1, i.e. the m_1 largest column sums over the
    selected rows; each exchange never lowers the score.
    """
    Lam = np.asarray(Lam)
    rows, cols = sorted(rows), sorted(cols)
    for _ in range(Lam.size + 1):
        new_cols = sorted(np.argsort(-Lam[rows].sum(axis=0), kind="stable")[:m1].tolist())
        new_rows = sorted(np.argsort(-Lam[:, new_cols].sum(axis=1), kind="stable")[:m2].tolist())
        if new_rows == rows and new_cols == cols:
            break
        rows, cols = new_rows, new_cols
    return rows, cols


def combinatorial_select(prob: SelectionProblem, cfg: sv.SolverConfig | None = None,
                         method: str = "rcg", multi_start: int = 8, seed: int = 0,
                         polish: bool = True) -> SelectionResult:
    """Choose rows and columns through the continuous relaxation over Gr x Gr.

    Each seeded start is optimized, rounded to coordinate projectors (optionally
    followed by :func:`best_response_polish`) and scored exactly; the best exact
    score wins (ties: smaller seed).  Only the rounded vertex matters, so the
    default tolerance is loose.
    """
    cfg = cfg or sv.SolverConfig(epsilon=1e-2, max_iter=100)
    A = selection_objective(prob)
    n2, n1 = prob.Lam.shape
    outcomes = {}

    def run(s):
        P0 = gm.random_product((n1, n2), (prob.m1, prob.m2), seed=s, field="real")
        res = sv.solve(A, P0, method, cfg)
        cols = round_to_coordinates(res.point[0].projector, prob.m1)
        rows = round_to_coordinates(res.point[1].projector, prob.m2)
        if polish:
            rows, cols = best_response_polish(prob.Lam, rows, cols, prob.m1, prob.m2)
        outcomes[s] = (rows, cols, res.value)
        score = selection_score(prob.Lam, rows, cols)
        return sv.SolveResult(res.point, score, res.status, res.trace, res.method, s)

    seeds = [seed + i for i in range(max(1, multi_start))]
    best_seed, best = run_multistart(run, seeds)
    rows, cols, relaxed = outcomes[best_seed]
    return SelectionResult(rows, cols, selection_score(prob.Lam, rows, cols), relaxed, best)

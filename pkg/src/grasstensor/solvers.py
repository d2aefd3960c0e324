"""Newton-like iteration, Riemannian conjugate gradients and HOOI.

Every solver ascends ``f = sign * rho_A`` (``sign = -1`` for minimization)
and records one :class:`TraceRecord` per iterate.  Steps move along the QR
retraction ``qr_retract(P_j, Z_j, alpha)``, whose velocity at ``alpha = 0`` is
the tangent vector with coordinates ``Z_j``.

The stopping quantity is ``||grad|| / max(|rho|, 1)``, with ``||grad||`` the
Riemannian norm.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import grassmann as gm
from . import rayleigh as ry
from . import tensor as tc
from .grassmann import ProductPoint
from .objective import ObjectiveMatrix, RankOne

STATUSES = ("converged", "maxIter", "stalled", "notAscent")


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and safeguards shared by the solvers.

    ``reset_every=None`` restarts conjugate gradients every d iterations,
    d being the real dimension of the search space.
    """

    epsilon: float = 1e-13
    max_iter: int = 200
    reset_every: int | None = None
    c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 30
    alpha0: float = 1.0
    safeguard: bool = True
    warm_hooi_iters: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.reset_every is not None and self.reset_every < 1:
            raise ValueError("reset_every must be at least 1")
        if self.warm_hooi_iters < 0:
            raise ValueError("warm_hooi_iters must be nonnegative")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    rho: float
    relgrad: float
    alpha: float
    millis: float
    step: str = ""
    solve_residual: float = float("nan")


@dataclass
class SolveResult:
    point: ProductPoint
    value: float
    status: str
    trace: list[TraceRecord] = field(default_factory=list)
    method: str = ""
    seed: int | None = None

    @property
    def iterations(self) -> int:
        return self.trace[-1].iter if self.trace else 0

    @property
    def relgrad(self) -> float:
        return self.trace[-1].relgrad if self.trace else float("nan")

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class NonFiniteError(FloatingPointError):
    """Raised when an iterate produces NaN or infinity; carries the trace so far."""

    def __init__(self, message: str, trace: Sequence[TraceRecord]):
        super().__init__(message)
        self.trace = list(trace)


def relative_gradient(grad_norm: float, value: float) -> float:
    return grad_norm / max(abs(value), 1.0)


def ascent_check(A: ObjectiveMatrix, P: ProductPoint, Z: Sequence[np.ndarray], grad=None) -> bool:
    """True when ``Z`` increases ``sign * rho`` to first order."""
    if grad is None:
        grad = ry.gradient(A, P)
    return gm.metric(grad, Z) > 0.0


def _f(A: ObjectiveMatrix, P: ProductPoint) -> float:
    return A.sign * ry.rho(A, P)


def armijo_step(A: ObjectiveMatrix, P: ProductPoint, Z: Sequence[np.ndarray],
                cfg: SolverConfig | None = None, f0: float | None = None,
                slope: float | None = None) -> float:
    """Largest ``alpha0 * shrink^k`` giving sufficient increase of ``sign * rho``.

    Returns 0.0 when ``Z`` is not an ascent direction or no step is accepted
    within ``cfg.max_backtracks`` reductions.
    """
    cfg = cfg or SolverConfig()
    if f0 is None:
        f0 = _f(A, P)
    if slope is None:
        slope = gm.metric(ry.gradient(A, P), Z)
    if not slope > 0:
        return 0.0
    slack = 1e-14 * max(1.0, abs(f0))
    alpha = cfg.alpha0
    for _ in range(cfg.max_backtracks + 1):
        trial = _f(A, gm.product_qr_retract(P, Z, alpha))
        if trial >= f0 + cfg.c1 * alpha * slope - slack:
            return alpha
        alpha *= cfg.shrink
    return 0.0


class _Clock:
    def __init__(self):
        self.start = time.perf_counter()

    def millis(self) -> float:
        return 1000.0 * (time.perf_counter() - self.start)


def _check_finite(values, trace, what: str):
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite {what} encountered", trace)


def _check_dims(A: ObjectiveMatrix, P0: ProductPoint):
    if tuple(P0.dims) != tuple(A.dims):
        raise ValueError(f"start point dimensions {P0.dims} do not match objective {A.dims}")


def newton_like(A: ObjectiveMatrix, P0: ProductPoint, cfg: SolverConfig | None = None) -> SolveResult:
    """Intrinsic Newton iteration with QR updates.

    Each step solves ``H z = -g`` for the materialized reduced Hessian and
    moves to ``qr_retract(P, Z, 1)``.  With the safeguard on, a direction that
    is not ascending (or a singular system) is replaced by the gradient with
    Armijo backtracking for that iteration.
    """
    cfg = cfg or SolverConfig()
    _check_dims(A, P0)
    clock = _Clock()
    trace: list[TraceRecord] = []
    P = P0
    alpha, step, solve_res = float("nan"), "start", float("nan")
    status = "maxIter"
    for it in range(cfg.max_iter + 1):
        bl = ry.all_blocks(A, P)
        g = ry.gradient(A, P, blocks_list=bl)
        value = ry.rho(A, P)
        gnorm = gm.tangent_norm(g)
        rel = relative_gradient(gnorm, value)
        trace.append(TraceRecord(it, value, rel, alpha, clock.millis(), step, solve_res))
        _check_finite([value, gnorm], trace, "objective or gradient")
        if rel < cfg.epsilon:
            status = "converged"
            break
        if it == cfg.max_iter:
            break
        gv = ry.stack(P, g)
        H = ry.hessian_reduced(A, P, bl)
        _check_finite(H, trace, "Hessian")
        z = None
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                z = scipy.linalg.solve(H, -gv, assume_a="sym")
            if not np.all(np.isfinite(z)):
                z = None
        except (np.linalg.LinAlgError, ValueError):
            z = None
        Z = ry.unstack(P, z) if z is not None else None
        ascending = Z is not None and gm.metric(g, Z) > 0.0
        if Z is not None and (ascending or not cfg.safeguard):
            solve_res = float(np.linalg.norm(H @ z + gv)) / max(float(np.linalg.norm(gv)), 1e-300)
            if not ascending:
                # safeguard off: report instead of stepping downhill
                status = "notAscent"
                break
            P_new = gm.product_qr_retract(P, Z, 1.0)
            f0 = A.sign * value
            # an ascent direction can still overshoot far from a maximizer
            if not cfg.safeguard or _f(A, P_new) >= f0 - 1e-12 * max(1.0, abs(f0)):
                alpha, step = 1.0, "newton"
                P = P_new
                continue
        solve_res = float("nan")
        f0 = A.sign * value
        alpha = armijo_step(A, P, g, cfg, f0=f0, slope=gm.metric(g, g))
        step = "gradient" if Z is not None else "gradient-singular"
        if alpha == 0.0:
            status = "stalled"
            break
        P = gm.product_qr_retract(P, g, alpha)
    return SolveResult(P, trace[-1].rho, status, trace, "newton", cfg.seed)


def rcg(A: ObjectiveMatrix, P0: ProductPoint, cfg: SolverConfig | None = None) -> SolveResult:
    """Riemannian conjugate gradients with a one-dimensional Newton step size.

    ``alpha = -a / (b + c)`` where ``a`` and ``b + c`` are the first and second
    derivatives of ``sign * rho`` along the search direction; when the second
    derivative is not negative (or the step would decrease the objective
    while the safeguard is on) Armijo backtracking is used instead.  The new
    direction is ``g_new + beta Z`` (Polak-Ribiere), with the old coordinates
    reused in the new frame.
    """
    cfg = cfg or SolverConfig()
    _check_dims(A, P0)
    reset_every = cfg.reset_every or max(1, gm.dimension(P0.ranks, P0.dims, P0.field))
    clock = _Clock()
    trace: list[TraceRecord] = []
    P = P0
    bl = ry.all_blocks(A, P)
    g = ry.gradient(A, P, blocks_list=bl)
    value = ry.rho(A, P)
    Z = [G.copy() for G in g]
    alpha, step = float("nan"), "start"
    status = "maxIter"
    since_reset = 0
    for it in range(cfg.max_iter + 1):
        gnorm = gm.tangent_norm(g)
        rel = relative_gradient(gnorm, value)
        trace.append(TraceRecord(it, value, rel, alpha, clock.millis(), step))
        _check_finite([value, gnorm], trace, "objective or gradient")
        if rel < cfg.epsilon:
            status = "converged"
            break
        if it == cfg.max_iter:
            break
        a, b, c = ry.directional_derivatives(A, P, Z, bl)
        if not a > 0:
            Z = [G.copy() for G in g]
            since_reset = 0
            a, b, c = ry.directional_derivatives(A, P, Z, bl)
        f0 = A.sign * value
        s = b + c
        P_new = None
        if s < 0 and abs(s) >= 1e-14 * abs(a):
            alpha, step = -a / s, "newton1d"
            P_new = gm.product_qr_retract(P, Z, alpha)
            value_new = ry.rho(A, P_new)
            if cfg.safeguard and A.sign * value_new < f0 - 1e-12 * max(1.0, abs(f0)):
                P_new = None
        if P_new is None:
            alpha, step = armijo_step(A, P, Z, cfg, f0=f0, slope=a), "armijo"
            if alpha == 0.0:
                status = "stalled"
                break
            P_new = gm.product_qr_retract(P, Z, alpha)
            value_new = ry.rho(A, P_new)
        bl_new = ry.all_blocks(A, P_new)
        g_new = ry.gradient(A, P_new, blocks_list=bl_new)
        Z_t = [gm.transport(old, new, Zj) for old, new, Zj in zip(P, P_new, Z)]
        g_t = [gm.transport(old, new, Gj) for old, new, Gj in zip(P, P_new, g)]
        since_reset += 1
        gg = gm.metric(g, g)
        if since_reset >= reset_every or gg == 0.0:
            Z = [G.copy() for G in g_new]
            since_reset = 0
        else:
            beta = gm.metric(g_new, [gn - go for gn, go in zip(g_new, g_t)]) / gg
            Z = [gn + beta * zt for gn, zt in zip(g_new, Z_t)]
            if not gm.metric(g_new, Z) > 0:
                Z = [G.copy() for G in g_new]
                since_reset = 0
        P, bl, g, value = P_new, bl_new, g_new, value_new
    return SolveResult(P, trace[-1].rho, status, trace, "rcg", cfg.seed)


def hooi_sweep(A: RankOne, P: ProductPoint, history: list | None = None) -> ProductPoint:
    """One cyclic pass of per-mode leading-singular-subspace updates."""
    T = A.tensor
    for j in range(A.order):
        mats = [None if l == j else pt.U.conj().T for l, pt in enumerate(P)]
        B = tc.multi_mode_multiply(T, mats)
        U, _ = tc.leading_left_singular(tc.unfold(B, (j,)), P[j].m)
        if P.field == "real":
            U = np.real(U)
        P = P.replace(j, gm.from_isometry(U, field=P.field))
        if history is not None:
            history.append(A.value(P))
    return P


def hooi(A: ObjectiveMatrix, P0: ProductPoint, iters: int, history: list | None = None) -> ProductPoint:
    """``iters`` HOOI sweeps for a rank-one objective ``vec(T) vec(T)^H``.

    ``history``, when given, receives rho after every single-mode update.
    """
    if not isinstance(A, RankOne):
        raise TypeError("HOOI needs a RankOne objective")
    if A.sense != "maximize":
        raise ValueError("HOOI maximizes; sense must be 'maximize'")
    _check_dims(A, P0)
    P = P0
    for _ in range(int(iters)):
        P = hooi_sweep(A, P, history)
    return P


def hooi_solve(A: ObjectiveMatrix, P0: ProductPoint, cfg: SolverConfig | None = None) -> SolveResult:
    """HOOI sweeps with the same trace and stopping rule as the other solvers."""
    cfg = cfg or SolverConfig()
    if not isinstance(A, RankOne):
        raise TypeError("HOOI needs a RankOne objective")
    _check_dims(A, P0)
    clock = _Clock()
    trace: list[TraceRecord] = []
    P = P0
    status = "maxIter"
    alpha, step = float("nan"), "start"
    for it in range(cfg.max_iter + 1):
        value = ry.rho(A, P)
        gnorm = gm.tangent_norm(ry.gradient(A, P))
        rel = relative_gradient(gnorm, value)
        trace.append(TraceRecord(it, value, rel, alpha, clock.millis(), step))
        _check_finite([value, gnorm], trace, "objective or gradient")
        if rel < cfg.epsilon:
            status = "converged"
            break
        if it == cfg.max_iter:
            break
        P = hooi_sweep(A, P)
        step = "sweep"
    return SolveResult(P, trace[-1].rho, status, trace, "hooi", cfg.seed)


SOLVERS: dict[str, Callable[..., SolveResult]] = {
    "newton": newton_like,
    "rcg": rcg,
    "hooi": hooi_solve,
}


def solve(A: ObjectiveMatrix, P0: ProductPoint, method: str = "newton",
          cfg: SolverConfig | None = None) -> SolveResult:
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(SOLVERS)}") from None
    return fn(A, P0, cfg)

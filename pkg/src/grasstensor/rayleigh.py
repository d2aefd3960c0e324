"""The generalized Rayleigh quotient rho_A(P) = tr(A (P_1 (x) ... (x) P_r)).

Gradients and Hessians are returned for the objective ``f = sign * rho``
where ``sign`` is +1 for ``sense="maximize"`` and -1 for ``"minimize"``, so a
solver always ascends ``f``.  Tangent vectors are lists of coordinate blocks
``Z_j`` (see :mod:`grasstensor.grassmann`).

Real stacking used by :func:`hessian_reduced`: for every factor the block
``Z_j`` is flattened row-major; over the complex field the real parts of all
entries come first, then the imaginary parts.  With this layout
``metric(x, y) = 2 * stack(x) . stack(y)``, so a metric-self-adjoint
operator becomes a symmetric matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import grassmann as gm
from .grassmann import GrassPoint, ProductPoint
from .objective import Diagonal, ObjectiveMatrix

MAX_ENUM_SIZE = 4096


@dataclass(frozen=True)
class Blocks:
    """Frame blocks of psi_hat_j: ``psiP = U^H A_j U``, ``psiQ = V^H A_j V``, ``psiR = U^H A_j V``."""

    psiP: np.ndarray
    psiQ: np.ndarray
    psiR: np.ndarray


def _check(A: ObjectiveMatrix, P: ProductPoint):
    if tuple(P.dims) != tuple(A.dims):
        raise ValueError(f"point dimensions {P.dims} do not match objective {A.dims}")
    if P.field == "real" and A.is_complex:
        raise ValueError("a complex objective needs complex Grassmannians")


def rho(A: ObjectiveMatrix, P: ProductPoint) -> float:
    """Value of the generalized Rayleigh quotient (no sense adjustment)."""
    _check(A, P)
    return A.value(P)


def psi_hat_j(A: ObjectiveMatrix, P: ProductPoint, j: int) -> np.ndarray:
    _check(A, P)
    return A.psi_hat(P, j)


def psi_hat_jk(A: ObjectiveMatrix, P: ProductPoint, j: int, k: int) -> np.ndarray:
    _check(A, P)
    if not 0 <= j < k < A.order:
        raise ValueError(f"need 0 <= j < k < {A.order}, got ({j}, {k})")
    return A.psi_hat_pair(P, j, k)


def _blocks_from(pt: GrassPoint, Ahat: np.ndarray) -> Blocks:
    U, V = pt.U, pt.V
    AU = Ahat @ U
    return Blocks(U.conj().T @ AU, V.conj().T @ Ahat @ V, U.conj().T @ Ahat @ V)


def blocks(A: ObjectiveMatrix, P: ProductPoint, j: int) -> Blocks:
    return _blocks_from(P[j], psi_hat_j(A, P, j))


def all_blocks(A: ObjectiveMatrix, P: ProductPoint) -> list[Blocks]:
    _check(A, P)
    return [_blocks_from(P[j], A.psi_hat(P, j)) for j in range(A.order)]


def _coords(P: ProductPoint, blocks_list) -> list[np.ndarray]:
    out = []
    for pt, b in zip(P, blocks_list):
        G = b.psiR
        if pt.field == "real":
            G = np.real(G)
        out.append(G)
    return out


def gradient(A: ObjectiveMatrix, P: ProductPoint, ambient: bool = False, blocks_list=None):
    """Riemannian gradient of ``sign * rho``.

    Coordinates are ``sign * U_j^H A_j V_j``.  With ``ambient=True`` the
    matrices ``sign * ad^2_{P_j} A_j`` are returned instead.
    """
    _check(A, P)
    if ambient:
        return [A.sign * gm.ad2(pt.projector, A.psi_hat(P, j)) for j, pt in enumerate(P)]
    if blocks_list is None:
        blocks_list = all_blocks(A, P)
    return [A.sign * G for G in _coords(P, blocks_list)]


def critical_residual(A: ObjectiveMatrix, P: ProductPoint) -> float:
    """``max_j ||[P_j, A_j]||_F``; equals ``sqrt(2) * max_j ||grad_j||_F``."""
    _check(A, P)
    return max(float(np.linalg.norm(gm.ad(pt.projector, A.psi_hat(P, j)))) for j, pt in enumerate(P))


# -- Hessian -----------------------------------------------------------------

def hessian_apply(A: ObjectiveMatrix, P: ProductPoint, Z: Sequence[np.ndarray],
                  ambient: bool = False) -> list[np.ndarray]:
    """Riemannian Hessian of ``sign * rho`` applied to the tangent vector ``Z``.

    Component j is ``-[P_j, [A_j, xi_j]] + sum_{k != j} ad^2_{P_j} Psi_{A,j}(.., I, .., xi_k, ..)``
    computed with ambient matrices and returned in coordinates (or ambient
    form when requested).
    """
    _check(A, P)
    r = A.order
    xis = [gm.tangent_ambient(pt, Zj) for pt, Zj in zip(P, Z)]
    out = []
    for j, pt in enumerate(P):
        Pj = pt.projector
        Ahat = A.psi_hat(P, j)
        H = -gm.ad(Pj, gm.ad(Ahat, xis[j]))
        for k in range(r):
            if k == j or not np.any(xis[k]):
                continue
            H = H + gm.ad2(Pj, A.cross_psi(P, j, k, xis[k]))
        H = A.sign * H
        if ambient:
            out.append(H)
        else:
            coord = pt.U.conj().T @ H @ pt.V
            out.append(np.real(coord) if pt.field == "real" else coord)
    return out


def block_sizes(P: ProductPoint) -> list[int]:
    """Number of real parameters contributed by each factor."""
    per = 2 if P.field == "complex" else 1
    return [per * pt.m * (pt.n - pt.m) for pt in P]


def stack(P: ProductPoint, Z: Sequence[np.ndarray]) -> np.ndarray:
    """Real vector of the coordinate blocks (layout described in the module docstring)."""
    parts = []
    for pt, Zj in zip(P, Z):
        flat = np.asarray(Zj).reshape(-1)
        parts.append(np.real(flat))
        if P.field == "complex":
            parts.append(np.imag(flat))
    return np.concatenate(parts) if parts else np.zeros(0)


def unstack(P: ProductPoint, x: np.ndarray) -> list[np.ndarray]:
    """Inverse of :func:`stack`."""
    x = np.asarray(x, dtype=float)
    out, pos = [], 0
    for pt in P:
        shape = (pt.m, pt.n - pt.m)
        size = shape[0] * shape[1]
        re = x[pos:pos + size].reshape(shape)
        pos += size
        if P.field == "complex":
            im = x[pos:pos + size].reshape(shape)
            pos += size
            out.append(re + 1j * im)
        else:
            out.append(re.copy())
    if pos != x.size:
        raise ValueError(f"vector of length {x.size} does not match dimension {pos}")
    return out


def _real_form(K1: np.ndarray, K2: np.ndarray | None, field: str) -> np.ndarray:
    """Real matrix of ``z -> K1 z + K2 conj(z)`` in (re, im) stacking."""
    if K2 is None:
        K2 = np.zeros_like(K1)
    if field == "real":
        return np.real(K1 + K2)
    top = np.hstack([np.real(K1) + np.real(K2), -np.imag(K1) + np.imag(K2)])
    bottom = np.hstack([np.imag(K1) + np.imag(K2), np.real(K1) - np.real(K2)])
    return np.vstack([top, bottom])


def diagonal_block(b: Blocks, field: str) -> np.ndarray:
    """Real matrix of ``Z -> Z psiQ - psiP Z`` (row-major vec)."""
    m, k = b.psiR.shape
    L = np.kron(np.eye(m), b.psiQ.T) - np.kron(b.psiP, np.eye(k))
    return _real_form(L, None, field)


def cross_block(A: ObjectiveMatrix, P: ProductPoint, j: int, k: int) -> np.ndarray:
    """Real matrix of ``Z_k -> Phi_j(Z_k) = U_j^H Psi_{A,j}(.., I, .., xi_k, ..) V_j`` (j != k).

    Built from psi_hat_jk: with ``G[s, a, t, b] = A_jk[(s, a), (t, b)]`` (mode j
    first) one has ``Psi[s, t] = sum_{a, b} G[s, a, t, b] xi_k[b, a]``; inserting
    ``xi_k = U_k Z V_k^H + V_k Z^H U_k^H`` splits the map into a linear and a
    conjugate-linear part.
    """
    if j == k:
        raise ValueError("cross_block needs j != k")
    lo, hi = min(j, k), max(j, k)
    nlo, nhi = A.dims[lo], A.dims[hi]
    G = A.psi_hat_pair(P, lo, hi).reshape(nlo, nhi, nlo, nhi)
    if j > k:
        G = G.transpose(1, 0, 3, 2)
    Uj, Vj = P[j].U, P[j].V
    Uk, Vk = P[k].U, P[k].V
    T = np.einsum("sx,satb->xatb", Uj.conj(), G)
    T = np.einsum("xatb,ty->xyab", T, Vj)
    K1 = np.einsum("xyab,bp->xyap", T, Uk)
    K1 = np.einsum("xyap,aq->xypq", K1, Vk.conj())
    K2 = np.einsum("xyab,bq->xyaq", T, Vk)
    K2 = np.einsum("xyaq,ap->xypq", K2, Uk.conj())
    rows = K1.shape[0] * K1.shape[1]
    cols = K1.shape[2] * K1.shape[3]
    return _real_form(K1.reshape(rows, cols), K2.reshape(rows, cols), P.field)


def hessian_reduced(A: ObjectiveMatrix, P: ProductPoint, blocks_list=None) -> np.ndarray:
    """Materialized Hessian of ``sign * rho`` as a real symmetric d x d matrix.

    Diagonal blocks come from the frame blocks of psi_hat_j; the block in
    row j, column k > j from psi_hat_jk via :func:`cross_block`, and the
    lower blocks are filled in by transposition (self-adjointness).
    """
    _check(A, P)
    if blocks_list is None:
        blocks_list = all_blocks(A, P)
    sizes = block_sizes(P)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    d = int(offsets[-1])
    H = np.zeros((d, d))
    for j in range(A.order):
        sj = slice(offsets[j], offsets[j + 1])
        if sizes[j] == 0:
            continue
        H[sj, sj] = diagonal_block(blocks_list[j], P.field)
        for k in range(j + 1, A.order):
            if sizes[k] == 0:
                continue
            sk = slice(offsets[k], offsets[k + 1])
            C = cross_block(A, P, j, k)
            H[sj, sk] = C
            H[sk, sj] = C.T
    return A.sign * H


def directional_derivatives(A: ObjectiveMatrix, P: ProductPoint, Z: Sequence[np.ndarray],
                            blocks_list=None) -> tuple[float, float, float]:
    """First and second derivative of ``t -> sign * rho(gamma(t))`` at 0.

    ``gamma`` is the geodesic with velocity ``xi(Z)``; the QR retraction
    agrees with it to second order.  Returns ``(a, b, c)`` with
    ``a = f'(0)``, ``b`` the within-factor part of ``f''(0)`` and ``c`` the
    part coupling different factors, so ``f''(0) = b + c``.
    """
    _check(A, P)
    if blocks_list is None:
        blocks_list = all_blocks(A, P)
    grad = [A.sign * G for G in _coords(P, blocks_list)]
    a = gm.metric(grad, Z)
    b = 0.0
    for Zj, bl in zip(Z, blocks_list):
        b += 2.0 * float(np.real(np.trace(Zj @ bl.psiQ @ Zj.conj().T) - np.trace(bl.psiP @ Zj @ Zj.conj().T)))
    c = 0.0
    xis = [gm.tangent_ambient(pt, Zj) for pt, Zj in zip(P, Z)]
    for j in range(A.order):
        for k in range(j + 1, A.order):
            if not (np.any(xis[j]) and np.any(xis[k])):
                continue
            c += 2.0 * float(np.real(A.pair_form(P, j, k, xis[j], xis[k])))
    return a, A.sign * b, A.sign * c


# -- critical-point diagnostics ----------------------------------------------

@dataclass(frozen=True)
class NondegeneracyReport:
    spectra_P: list
    spectra_Q: list
    min_cross_gap: float
    verdict: str
    hessian_min_abs_eig: float
    residual: float


def nondegeneracy_check(A: ObjectiveMatrix, P: ProductPoint, critical_tol: float = 1e-8,
                        gap_tol: float = 1e-8) -> NondegeneracyReport:
    """Spectral test at a critical point.

    A non-degenerate critical point needs ``spec(psiP_j)`` and ``spec(psiQ_j)``
    to be disjoint for every j.  The verdict reports only this necessary
    condition; the smallest absolute eigenvalue of the reduced Hessian is
    included as the decisive test.
    """
    res = critical_residual(A, P)
    if res > critical_tol:
        raise ValueError(f"point is not critical (residual {res:.3e} > {critical_tol:.1e})")
    bl = all_blocks(A, P)
    specP = [np.linalg.eigvalsh(b.psiP) for b in bl]
    specQ = [np.linalg.eigvalsh(b.psiQ) for b in bl]
    gap = np.inf
    for sp, sq in zip(specP, specQ):
        if sp.size and sq.size:
            gap = min(gap, float(np.min(np.abs(sp[:, None] - sq[None, :]))))
    verdict = "necessary-condition-violated" if gap <= gap_tol else "necessary-condition-satisfied"
    H = hessian_reduced(A, P, bl)
    min_eig = float(np.min(np.abs(np.linalg.eigvalsh(H)))) if H.size else np.inf
    return NondegeneracyReport(specP, specQ, gap, verdict, min_eig, res)


def coordinate_point(selected: Sequence[int], n: int, field: str = "complex") -> GrassPoint:
    """Projector onto the coordinate axes ``selected`` (0-based), frame a permutation matrix."""
    selected = list(selected)
    rest = [i for i in range(n) if i not in selected]
    frame = np.eye(n)[:, selected + rest]
    if field == "complex":
        frame = frame.astype(complex)
    return GrassPoint(len(selected), frame)


def enumerate_diag_critical(A: Diagonal, ranks: Sequence[int], field: str = "real") -> list[ProductPoint]:
    """All products of coordinate projectors of the given ranks.

    Every such point is critical for a diagonal objective.
    """
    if not isinstance(A, Diagonal):
        raise TypeError("enumerate_diag_critical needs a Diagonal objective")
    if A.size > MAX_ENUM_SIZE:
        raise ValueError(f"N = {A.size} exceeds the enumeration guard {MAX_ENUM_SIZE}")
    ranks = [int(m) for m in ranks]
    if len(ranks) != A.order or any(not 1 <= m <= n for m, n in zip(ranks, A.dims)):
        raise ValueError(f"invalid ranks {ranks} for dimensions {A.dims}")
    choices = [list(itertools.combinations(range(n), m)) for m, n in zip(ranks, A.dims)]
    return [ProductPoint(tuple(coordinate_point(sel, n, field) for sel, n in zip(combo, A.dims)))
            for combo in itertools.product(*choices)]

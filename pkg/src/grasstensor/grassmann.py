"""Grassmannians of Hermitian projectors and their direct products.

A point ``P = Theta Pi Theta^H`` is stored through the full unitary frame
``Theta = [U V]`` (U: n x m, V: n x (n-m)).  Tangent vectors at P are handled
in reduced coordinates ``Z`` (m x (n-m)) with ambient form

    xi = Theta [[0, Z], [Z^H, 0]] Theta^H.

The real field uses orthogonal frames and real Z; every formula specializes by
replacing ``^H`` with the transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

FIELDS = ("real", "complex")
REORTH_TOL = 1e-8
REORTH_EVERY = 64


def _dtype(field: str):
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}, got {field!r}")
    return np.complex128 if field == "complex" else np.float64


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _gaussian(rng: np.random.Generator, shape, field: str) -> np.ndarray:
    if field == "complex":
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return rng.standard_normal(shape)


def qr_positive(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR factorization normalized so that R has a real non-negative diagonal."""
    Q, R = np.linalg.qr(X, mode="complete" if X.shape[0] < X.shape[1] else "reduced")
    k = min(R.shape)
    d = np.diagonal(R)[:k]
    phase = np.ones(Q.shape[1], dtype=np.result_type(Q.dtype, d.dtype))
    nz = np.abs(d) > 0
    phase[:k][nz] = d[nz] / np.abs(d[nz])
    Q = Q * phase[np.newaxis, :]
    R = np.conj(phase[:R.shape[0], np.newaxis]) * R
    return Q, R


@dataclass(frozen=True)
class GrassPoint:
    """Rank-m Hermitian projector on F^n, carried by a unitary frame [U V]."""

    m: int
    frame: np.ndarray
    updates: int = dc_field(default=0, compare=False)

    def __post_init__(self):
        frame = np.asarray(self.frame)
        if frame.ndim != 2 or frame.shape[0] != frame.shape[1]:
            raise ValueError(f"frame must be square, got shape {frame.shape}")
        if not 1 <= self.m <= frame.shape[0]:
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={frame.shape[0]}")
        if np.iscomplexobj(frame):
            frame = frame.astype(np.complex128, copy=False)
        else:
            frame = frame.astype(np.float64, copy=False)
        object.__setattr__(self, "frame", frame)

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    @property
    def field(self) -> str:
        return "complex" if np.iscomplexobj(self.frame) else "real"

    @property
    def U(self) -> np.ndarray:
        return self.frame[:, :self.m]

    @property
    def V(self) -> np.ndarray:
        return self.frame[:, self.m:]

    @cached_property
    def projector(self) -> np.ndarray:
        U = self.U
        return U @ U.conj().T

    def drift(self) -> float:
        """``||Theta^H Theta - I||_F``."""
        return float(np.linalg.norm(self.frame.conj().T @ self.frame - np.eye(self.n)))

    def reorthonormalized(self) -> "GrassPoint":
        Q, _ = qr_positive(self.frame)
        return GrassPoint(self.m, Q, 0)


@dataclass(frozen=True)
class ProductPoint:
    """A point (P_1, ..., P_r) of the direct product of Grassmannians."""

    points: tuple[GrassPoint, ...]

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise ValueError("a product point needs at least one factor")
        if len({p.field for p in points}) != 1:
            raise ValueError("all factors must share the scalar field")
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, j: int) -> GrassPoint:
        return self.points[j]

    def __iter__(self):
        return iter(self.points)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(p.n for p in self.points)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(p.m for p in self.points)

    @property
    def field(self) -> str:
        return self.points[0].field

    @property
    def projectors(self) -> list[np.ndarray]:
        return [p.projector for p in self.points]

    def replace(self, j: int, point: GrassPoint) -> "ProductPoint":
        points = list(self.points)
        points[j] = point
        return ProductPoint(tuple(points))


def standard_point(m: int, n: int, field: str = "complex") -> GrassPoint:
    """The standard projector diag(I_m, 0) with identity frame."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    return GrassPoint(m, np.eye(n, dtype=_dtype(field)))


def standard_product(ranks: Sequence[int], dims: Sequence[int], field: str = "complex") -> ProductPoint:
    return ProductPoint(tuple(standard_point(m, n, field) for m, n in zip(ranks, dims)))


def from_isometry(U: np.ndarray, tol: float = 1e-10, seed=0, field: str | None = None) -> GrassPoint:
    """Complete an isometry U (n x m) to a unitary frame [U V].

    The completion comes from the QR factorization of ``[U | G]`` with G
    Gaussian; the first m columns of the frame are U itself, so the projector
    is exactly ``U U^H``.
    """
    U = np.asarray(U)
    if U.ndim == 1:
        U = U[:, np.newaxis]
    n, m = U.shape
    if field is None:
        field = "complex" if np.iscomplexobj(U) else "real"
    U = U.astype(_dtype(field))
    err = np.linalg.norm(U.conj().T @ U - np.eye(m))
    if err > tol:
        raise ValueError(f"columns are not orthonormal (||U^H U - I|| = {err:.3e} > {tol:.1e})")
    if m == n:
        return GrassPoint(m, U.copy())
    G = _gaussian(_rng(seed), (n, n - m), field)
    Q, _ = qr_positive(np.hstack([U, G]))
    V = Q[:, m:]
    # second pass removes any residual overlap with span(U)
    V = V - U @ (U.conj().T @ V)
    V, _ = qr_positive(V)
    return GrassPoint(m, np.hstack([U, V]))


def random_point(n: int, m: int, seed=None, field: str = "complex") -> GrassPoint:
    """Haar-distributed point from the sign-fixed QR factor of a Gaussian matrix."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    Q, _ = qr_positive(_gaussian(_rng(seed), (n, n), field))
    return GrassPoint(m, Q)


def random_product(dims: Sequence[int], ranks: Sequence[int], seed=None,
                   field: str = "complex") -> ProductPoint:
    rng = _rng(seed)
    return ProductPoint(tuple(random_point(n, m, rng, field) for n, m in zip(dims, ranks)))


def zero_tangent(point: ProductPoint) -> list[np.ndarray]:
    dtype = _dtype(point.field)
    return [np.zeros((p.m, p.n - p.m), dtype=dtype) for p in point]


def random_tangent(point: ProductPoint, seed=None, scale: float = 1.0) -> list[np.ndarray]:
    rng = _rng(seed)
    return [scale * _gaussian(rng, (p.m, p.n - p.m), point.field) for p in point]


def _check_block(pt: GrassPoint, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z)
    if Z.shape != (pt.m, pt.n - pt.m):
        raise ValueError(f"tangent block must have shape {(pt.m, pt.n - pt.m)}, got {Z.shape}")
    return Z


def zeta(Z: np.ndarray) -> np.ndarray:
    """The block matrix [[0, Z], [Z^H, 0]]."""
    m, k = Z.shape
    out = np.zeros((m + k, m + k), dtype=Z.dtype)
    out[:m, m:] = Z
    out[m:, :m] = Z.conj().T
    return out


def tangent_ambient(pt: GrassPoint, Z: np.ndarray) -> np.ndarray:
    """Ambient Hermitian tangent vector ``Theta zeta(Z) Theta^H``."""
    Z = _check_block(pt, Z)
    return pt.frame @ zeta(Z) @ pt.frame.conj().T


def ad(P: np.ndarray, X: np.ndarray) -> np.ndarray:
    return P @ X - X @ P


def ad2(P: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Orthogonal projection ``[P, [P, X]]`` onto the tangent space at P."""
    return ad(P, ad(P, X))


def project_to_tangent(pt: GrassPoint, X: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Reduced coordinates ``U^H X V`` of the tangent projection of Hermitian X."""
    X = np.asarray(X)
    scale = max(1.0, float(np.linalg.norm(X)))
    if np.linalg.norm(X - X.conj().T) > tol * scale:
        raise ValueError("input matrix is not Hermitian")
    return pt.U.conj().T @ X @ pt.V


def weights(ranks: Sequence[int]) -> list[int]:
    """M_j = prod_{k != j} m_k, the factors making the Kronecker embedding isometric."""
    total = []
    for j in range(len(ranks)):
        total.append(int(np.prod([m for k, m in enumerate(ranks) if k != j], dtype=int)))
    return total


def metric(x: Sequence[np.ndarray], y: Sequence[np.ndarray], weights: Sequence[float] | None = None) -> float:
    """Sum over factors of ``tr(xi_j eta_j) = 2 Re tr(Z_j W_j^H)``, optionally weighted."""
    if len(x) != len(y):
        raise ValueError("tangent vectors have different numbers of factors")
    total = 0.0
    for j, (Z, W) in enumerate(zip(x, y)):
        Z, W = np.asarray(Z), np.asarray(W)
        if Z.shape != W.shape:
            raise ValueError(f"block {j} shape mismatch {Z.shape} vs {W.shape}")
        term = 2.0 * float(np.real(np.vdot(W, Z)))
        total += term if weights is None else weights[j] * term
    return total


def tangent_norm(x: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(max(metric(x, x), 0.0)))


def kron_embed(point: ProductPoint) -> np.ndarray:
    """``P_1 (x) ... (x) P_r`` as an N x N matrix."""
    out = np.ones((1, 1))
    for P in point.projectors:
        out = np.kron(out, P)
    return out


def kron_embed_differential(point: ProductPoint, xis: Sequence[np.ndarray]) -> np.ndarray:
    """Differential of the Kronecker embedding: ``sum_j P_1 (x) ... xi_j ... (x) P_r`` (ambient xi)."""
    projs = point.projectors
    total = 0
    for j, xi in enumerate(xis):
        term = np.ones((1, 1))
        for k, P in enumerate(projs):
            term = np.kron(term, xi if k == j else P)
        total = total + term
    return total


def _update_frame(pt: GrassPoint, Q: np.ndarray) -> GrassPoint:
    frame = pt.frame @ Q
    new = GrassPoint(pt.m, frame, pt.updates + 1)
    if new.updates % REORTH_EVERY == 0 or new.drift() > REORTH_TOL:
        new = new.reorthonormalized()
    return new


def qr_update_factor(Z: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Q factor of ``[[I, -S], [S^H, I]]`` with ``S = alpha Z`` (positive-diagonal R)."""
    S = alpha * Z
    m, k = S.shape
    X = np.zeros((m + k, m + k), dtype=np.result_type(S.dtype, np.float64))
    X[:m, :m] = np.eye(m)
    X[m:, m:] = np.eye(k)
    X[:m, m:] = -S
    X[m:, :m] = S.conj().T
    Q, _ = qr_positive(X)
    return Q


def closed_form_update_factor(Z: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """SVD-based orthonormalization of ``[[I, -S], [S^H, I]]``.

    With ``S = X Sigma Y^H`` the unitary factor is
    ``W [[D1^-1, -Sigma D2^-1], [Sigma^T D1^-1, D2^-1]] W^H`` where
    ``W = diag(X, Y)``, ``D1 = sqrt(I + Sigma Sigma^T)``, ``D2 = sqrt(I + Sigma^T Sigma)``.
    Its leading m columns span the same subspace as the QR factor, so both
    give the same projector (the frames differ by a block-diagonal unitary).
    """
    S = alpha * Z
    m, k = S.shape
    X, sig, Yh = np.linalg.svd(S, full_matrices=True)
    Sigma = np.zeros((m, k))
    p = min(m, k)
    Sigma[np.arange(p), np.arange(p)] = sig
    d1 = 1.0 / np.sqrt(1.0 + np.sum(Sigma**2, axis=1))
    d2 = 1.0 / np.sqrt(1.0 + np.sum(Sigma**2, axis=0))
    core = np.zeros((m + k, m + k))
    core[:m, :m] = np.diag(d1)
    core[m:, m:] = np.diag(d2)
    core[:m, m:] = -Sigma * d2[np.newaxis, :]
    core[m:, :m] = Sigma.T * d1[np.newaxis, :]
    W = scipy.linalg.block_diag(X, Yh.conj().T)
    return W @ core @ W.conj().T


def qr_retract(pt: GrassPoint, Z: np.ndarray, alpha: float = 1.0, method: str = "qr") -> GrassPoint:
    """Move from ``pt`` along the tangent direction ``Z`` with step ``alpha``.

    ``Theta_new = Theta [[I, -alpha Z], [alpha Z^H, I]]_Q``; to first order the
    projector moves by ``alpha * tangent_ambient(pt, Z)``.  ``method="closed_form"``
    uses the SVD expression instead of a QR factorization.
    """
    Z = _check_block(pt, Z)
    if alpha == 0.0 or pt.m == pt.n:
        return pt
    if method == "qr":
        Q = qr_update_factor(Z, alpha)
    elif method == "closed_form":
        Q = closed_form_update_factor(Z, alpha)
    else:
        raise ValueError(f"unknown retraction method {method!r}")
    return _update_frame(pt, Q)


def exp_retract(pt: GrassPoint, Z: np.ndarray, t: float = 1.0) -> GrassPoint:
    """Geodesic ``P(t) = e^{t[xi,P]} P e^{-t[xi,P]}`` with ``P'(0) = xi``.

    In frame coordinates ``[zeta, Pi] = [[0, -Z], [Z^H, 0]]``, so the frame is
    updated as ``Theta expm(t [[0, -Z], [Z^H, 0]])``.
    """
    Z = _check_block(pt, Z)
    if t == 0.0 or pt.m == pt.n:
        return pt
    m = pt.m
    K = np.zeros((pt.n, pt.n), dtype=np.result_type(Z.dtype, np.float64))
    K[:m, m:] = -Z
    K[m:, :m] = Z.conj().T
    return _update_frame(pt, scipy.linalg.expm(t * K))


def transport(old_pt: GrassPoint, new_pt: GrassPoint, Z: np.ndarray, ambient: bool = False):
    """Carry the direction ``Z`` from ``old_pt`` to the tangent space at ``new_pt``.

    The coordinates are kept and re-expressed in the new frame, i.e. the
    transported vector is ``Theta_new zeta(Z) Theta_new^H``.  Along the
    exponential map this is exact parallel transport; after a QR update it is
    the usual first-order approximation.
    """
    _check_block(old_pt, Z)
    Z = np.array(Z, copy=True)
    if ambient:
        return tangent_ambient(new_pt, Z)
    return Z


def product_qr_retract(point: ProductPoint, Zs: Sequence[np.ndarray], alpha: float = 1.0,
                       method: str = "qr") -> ProductPoint:
    return ProductPoint(tuple(qr_retract(p, Z, alpha, method) for p, Z in zip(point, Zs)))


def product_exp_retract(point: ProductPoint, Zs: Sequence[np.ndarray], t: float = 1.0) -> ProductPoint:
    return ProductPoint(tuple(exp_retract(p, Z, t) for p, Z in zip(point, Zs)))


def dimension(ranks: Sequence[int], dims: Sequence[int], field: str = "complex") -> int:
    """Real dimension of the product of Grassmannians."""
    _dtype(field)
    d = sum(m * (n - m) for m, n in zip(ranks, dims))
    return 2 * d if field == "complex" else d

"""Structured Hermitian matrices A acting on F^{n_1} (x) ... (x) F^{n_r}.

Every variant implements the multilinear partial-trace maps

    psi(xs, j)        : Psi_{A,j}(X_1, ..., I, ..., X_r)          (n_j x n_j)
    psi_pair(xs, j, k): Psi_{A,j,k}(X_1, ..., I, ..., I, ..., X_r) (n_j n_k x n_j n_k)

defined by ``tr(A (X_1 (x) .. X_j Z .. (x) X_r)) = tr(psi(xs, j) Z)`` for all Z
and the analogous identity with ``S (x) T`` in slots (j, k).  The entries of
``xs`` at the free slots are ignored.  The Kronecker index order is that of
``np.kron`` (mode j before mode k in ``psi_pair``).

``dense_psi_oracle`` evaluates the same maps entry by entry from a dense A;
it is slow and serves only as an independent check.
"""

from __future__ import annotations

import string
from typing import Sequence

import numpy as np

from . import tensor as tc
from .grassmann import ProductPoint

SENSES = ("maximize", "minimize")


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(out, M)
    return out


class ObjectiveMatrix:
    """Base class; subclasses supply the structure-specific evaluations."""

    variant = "abstract"

    def __init__(self, dims: Sequence[int], sense: str = "maximize"):
        dims = tuple(int(n) for n in dims)
        if not dims or any(n < 1 for n in dims):
            raise ValueError(f"invalid dimensions {dims}")
        if sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}, got {sense!r}")
        self.dims = dims
        self.sense = sense

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def sign(self) -> float:
        """+1 when maximizing, -1 when minimizing."""
        return 1.0 if self.sense == "maximize" else -1.0

    @property
    def is_complex(self) -> bool:
        """Whether the matrix has complex dtype (real objectives allow real Grassmannians)."""
        return any(np.iscomplexobj(x) for x in self._payload())

    def _payload(self) -> list[np.ndarray]:
        return [self.dense()]

    def _check_xs(self, xs):
        if len(xs) != self.order:
            raise ValueError(f"expected {self.order} matrices, got {len(xs)}")
        for j, (X, n) in enumerate(zip(xs, self.dims)):
            if X is not None and np.shape(X) != (n, n):
                raise ValueError(f"slot {j} expects an {n}x{n} matrix, got {np.shape(X)}")

    def _check_point(self, point: ProductPoint):
        if tuple(point.dims) != self.dims:
            raise ValueError(f"point dimensions {point.dims} do not match objective {self.dims}")

    # -- structure-specific ------------------------------------------------
    def dense(self) -> np.ndarray:
        raise NotImplementedError

    def trace_form(self, xs: Sequence[np.ndarray]) -> complex:
        raise NotImplementedError

    def psi(self, xs: Sequence[np.ndarray], j: int) -> np.ndarray:
        raise NotImplementedError

    def psi_pair(self, xs: Sequence[np.ndarray], j: int, k: int) -> np.ndarray:
        raise NotImplementedError

    # -- point-level evaluations (overridden where a cheaper path exists) --
    def value(self, point: ProductPoint) -> float:
        self._check_point(point)
        return float(np.real(self.trace_form(point.projectors)))

    def psi_hat(self, point: ProductPoint, j: int) -> np.ndarray:
        self._check_point(point)
        return self.psi(point.projectors, j)

    def psi_hat_pair(self, point: ProductPoint, j: int, k: int) -> np.ndarray:
        self._check_point(point)
        return self.psi_pair(point.projectors, j, k)

    def cross_psi(self, point: ProductPoint, j: int, k: int, xi_k: np.ndarray) -> np.ndarray:
        """``Psi_{A,j}(P_1, .., I, .., xi_k, .., P_r)`` (identity in slot j, xi_k in slot k)."""
        xs = list(point.projectors)
        xs[k] = xi_k
        return self.psi(xs, j)

    def pair_form(self, point: ProductPoint, j: int, k: int, X: np.ndarray, Y: np.ndarray) -> complex:
        """``tr(A (P_1 (x) .. X .. Y .. (x) P_r))`` with X in slot j and Y in slot k."""
        xs = list(point.projectors)
        xs[j], xs[k] = X, Y
        return self.trace_form(xs)

    def negated(self) -> "ObjectiveMatrix":
        raise NotImplementedError


def _einsum_letters(count: int) -> list[str]:
    letters = string.ascii_letters
    if count > len(letters):
        raise ValueError("too many modes for einsum")
    return list(letters[:count])


class Dense(ObjectiveMatrix):
    """Explicit N x N Hermitian matrix."""

    variant = "dense"

    def __init__(self, A: np.ndarray, dims: Sequence[int], sense: str = "maximize", tol: float = 1e-10):
        super().__init__(dims, sense)
        A = np.asarray(A)
        N = self.size
        if A.shape != (N, N):
            raise ValueError(f"matrix of shape {A.shape} does not match N = {N}")
        scale = max(1.0, float(np.linalg.norm(A)))
        if np.linalg.norm(A - A.conj().T) > tol * scale:
            raise ValueError("matrix is not Hermitian")
        self.A = A
        self._T = A.reshape(self.dims + self.dims)

    def dense(self):
        return self.A

    def _payload(self):
        return [self.A]

    def _contract(self, xs, free: Sequence[int]) -> np.ndarray:
        # A[(i),(k)] * prod_{l not free} X_l[k_l, i_l], keeping (i_f..., k_f...)
        r = self.order
        letters = _einsum_letters(2 * r)
        rows, cols = letters[:r], letters[r:]
        operands = [self._T]
        subs = ["".join(rows) + "".join(cols)]
        for l in range(r):
            if l in free:
                continue
            operands.append(np.asarray(xs[l]))
            subs.append(cols[l] + rows[l])
        out = "".join(rows[f] for f in free) + "".join(cols[f] for f in free)
        return np.einsum(",".join(subs) + "->" + out, *operands, optimize=len(operands) > 2)

    def trace_form(self, xs):
        self._check_xs(xs)
        return complex(self._contract(xs, ()))

    def psi(self, xs, j):
        self._check_xs(xs)
        return self._contract(xs, (j,))

    def psi_pair(self, xs, j, k):
        self._check_xs(xs)
        if not j < k:
            raise ValueError("psi_pair needs j < k")
        out = self._contract(xs, (j, k))
        nj, nk = self.dims[j], self.dims[k]
        return out.reshape(nj * nk, nj * nk)

    def negated(self):
        return Dense(-self.A, self.dims, self.sense)


class RankOne(ObjectiveMatrix):
    """``A = v v^H`` with ``v = vec(T)`` for a tensor T of shape ``dims``."""

    variant = "rank_one"

    def __init__(self, tensor, sense: str = "maximize"):
        array = tc.as_array(tensor)
        super().__init__(array.shape, sense)
        self.tensor = np.asarray(array)

    @property
    def v(self) -> np.ndarray:
        return self.tensor.reshape(-1)

    def _payload(self):
        return [self.tensor]

    def dense(self):
        v = self.v
        return np.outer(v, v.conj())

    def _applied(self, xs, skip) -> np.ndarray:
        return tc.multi_mode_multiply(self.tensor, [np.asarray(X) if X is not None else None for X in xs], skip)

    def trace_form(self, xs):
        self._check_xs(xs)
        # v^H (X_1 (x) ... (x) X_r) v
        return complex(np.vdot(self.tensor, self._applied(xs, ())))

    def psi(self, xs, j):
        self._check_xs(xs)
        W = self._applied(xs, (j,))
        return tc.unfold(W, (j,)) @ tc.unfold(self.tensor, (j,)).conj().T

    def psi_pair(self, xs, j, k):
        self._check_xs(xs)
        if not j < k:
            raise ValueError("psi_pair needs j < k")
        W = self._applied(xs, (j, k))
        return tc.unfold(W, (j, k)) @ tc.unfold(self.tensor, (j, k)).conj().T

    # projector fast paths: B = T x_l U_l^H on the spectator modes
    def _reduced(self, point: ProductPoint, skip) -> np.ndarray:
        mats = [None if l in skip else p.U.conj().T for l, p in enumerate(point)]
        return tc.multi_mode_multiply(self.tensor, mats)

    def value(self, point):
        self._check_point(point)
        core = self._reduced(point, ())
        return float(np.real(np.vdot(core, core)))

    def psi_hat(self, point, j):
        self._check_point(point)
        B = tc.unfold(self._reduced(point, (j,)), (j,))
        return B @ B.conj().T

    def psi_hat_pair(self, point, j, k):
        self._check_point(point)
        if not j < k:
            raise ValueError("psi_hat_pair needs j < k")
        C = tc.unfold(self._reduced(point, (j, k)), (j, k))
        return C @ C.conj().T

    def cross_psi(self, point, j, k, xi_k):
        self._check_point(point)
        C = self._reduced(point, (j, k))
        D = tc.mode_multiply(C, xi_k, k)
        return tc.unfold(D, (j,)) @ tc.unfold(C, (j,)).conj().T

    def pair_form(self, point, j, k, X, Y):
        self._check_point(point)
        C = self._reduced(point, (j, k))
        D = tc.mode_multiply(tc.mode_multiply(C, X, j), Y, k)
        return complex(np.vdot(C, D))

    def negated(self):
        raise TypeError("a rank-one objective cannot be negated; use sense='minimize'")


class KroneckerFactors(ObjectiveMatrix):
    """``A = A_1 (x) ... (x) A_r``."""

    variant = "kronecker"

    def __init__(self, factors: Sequence[np.ndarray], sense: str = "maximize"):
        factors = [np.asarray(F) for F in factors]
        super().__init__([F.shape[0] for F in factors], sense)
        for F in factors:
            if F.shape[0] != F.shape[1] or not np.allclose(F, F.conj().T, atol=1e-10):
                raise ValueError("Kronecker factors must be square Hermitian matrices")
        self.factors = factors

    def dense(self):
        return _kron_all(self.factors)

    def _payload(self):
        return self.factors

    def _traces(self, xs):
        return [np.trace(F @ X) if X is not None else None for F, X in zip(self.factors, xs)]

    def trace_form(self, xs):
        self._check_xs(xs)
        return complex(np.prod(self._traces(xs)))

    def psi(self, xs, j):
        self._check_xs(xs)
        t = self._traces(xs)
        coef = np.prod([t[l] for l in range(self.order) if l != j])
        return coef * self.factors[j]

    def psi_pair(self, xs, j, k):
        self._check_xs(xs)
        if not j < k:
            raise ValueError("psi_pair needs j < k")
        t = self._traces(xs)
        coef = np.prod([t[l] for l in range(self.order) if l not in (j, k)])
        return coef * np.kron(self.factors[j], self.factors[k])

    def negated(self):
        factors = list(self.factors)
        factors[0] = -factors[0]
        return KroneckerFactors(factors, self.sense)


class SumKronPowers(ObjectiveMatrix):
    """``A = sum_l (x_l x_l^H)^{(x) r}`` for points x_l in F^n (rows of ``points``)."""

    variant = "sum_kron_powers"

    def __init__(self, points: np.ndarray, power: int, sense: str = "maximize", scale: float = 1.0):
        points = np.atleast_2d(np.asarray(points))
        super().__init__([points.shape[1]] * int(power), sense)
        self.points = points
        self.scale = float(scale)

    def _payload(self):
        return [self.points]

    def dense(self):
        total = 0
        for x in self.points:
            xx = np.outer(x, x.conj())
            total = total + _kron_all([xx] * self.order)
        return self.scale * total

    def _quad(self, xs) -> list[np.ndarray | None]:
        # x_l^H X x_l for every point, per slot
        X = self.points
        return [None if M is None else np.einsum("li,ij,lj->l", X.conj(), np.asarray(M), X)
                for M in xs]

    def _weights(self, xs, skip) -> np.ndarray:
        q = self._quad(xs)
        w = np.full(len(self.points), self.scale, dtype=complex)
        for l in range(self.order):
            if l not in skip:
                w = w * q[l]
        return w

    def trace_form(self, xs):
        self._check_xs(xs)
        return complex(np.sum(self._weights(xs, ())))

    def psi(self, xs, j):
        self._check_xs(xs)
        w = self._weights(xs, (j,))
        X = self.points
        out = (X.T * w) @ X.conj()
        return out.real if not np.iscomplexobj(X) and np.allclose(w.imag, 0) else out

    def psi_pair(self, xs, j, k):
        self._check_xs(xs)
        if not j < k:
            raise ValueError("psi_pair needs j < k")
        w = self._weights(xs, (j, k))
        X = self.points
        XX = np.einsum("la,lb->lab", X, X).reshape(len(X), -1)
        out = (XX.T * w) @ XX.conj()
        return out.real if not np.iscomplexobj(X) and np.allclose(w.imag, 0) else out

    def value(self, point):
        self._check_point(point)
        # sum_l prod_j ||U_j^H x_l||^2
        total = np.full(len(self.points), self.scale)
        for p in point:
            total = total * np.sum(np.abs(self.points @ p.U.conj()) ** 2, axis=1)
        return float(np.sum(total))

    def negated(self):
        return SumKronPowers(self.points, self.order, self.sense, -self.scale)


class Diagonal(ObjectiveMatrix):
    """``A = diag(d)`` with d a real vector of length N."""

    variant = "diagonal"

    def __init__(self, d: np.ndarray, dims: Sequence[int], sense: str = "maximize"):
        super().__init__(dims, sense)
        d = np.asarray(d)
        if np.iscomplexobj(d):
            if np.max(np.abs(d.imag)) > 1e-12:
                raise ValueError("diagonal entries must be real")
            d = d.real
        d = d.astype(np.float64).reshape(-1)
        if d.size != self.size:
            raise ValueError(f"diagonal of length {d.size} does not match N = {self.size}")
        self.d = d
        self._D = d.reshape(self.dims)

    def dense(self):
        return np.diag(self.d)

    def _payload(self):
        return [self.d]

    def _contract(self, xs, free):
        # contract spectator modes from the last one down so axis numbers stay valid
        out = self._D
        for l in reversed(range(self.order)):
            if l in free:
                continue
            out = np.tensordot(out, np.diagonal(np.asarray(xs[l])), axes=([l], [0]))
        return out

    def trace_form(self, xs):
        self._check_xs(xs)
        return complex(self._contract(xs, ()))

    def psi(self, xs, j):
        self._check_xs(xs)
        return np.diag(self._contract(xs, (j,)))

    def psi_pair(self, xs, j, k):
        self._check_xs(xs)
        if not j < k:
            raise ValueError("psi_pair needs j < k")
        return np.diag(self._contract(xs, (j, k)).reshape(-1))

    def negated(self):
        return Diagonal(-self.d, self.dims, self.sense)


def materialize(A: ObjectiveMatrix) -> Dense:
    """Dense copy of any variant (same sense)."""
    return Dense(A.dense(), A.dims, A.sense)


def _basis_kron(dims, index) -> np.ndarray:
    vecs = []
    for n, i in zip(dims, index):
        e = np.zeros(n)
        e[i] = 1.0
        vecs.append(e)
    out = np.ones(1)
    for e in vecs:
        out = np.kron(out, e)
    return out


def dense_psi_oracle(A_dense: np.ndarray, dims: Sequence[int], xs: Sequence[np.ndarray],
                     free: Sequence[int]) -> np.ndarray:
    """Entrywise partial trace of ``A (X_1 (x) ... (x) X_r)`` over the non-free modes.

    ``free`` lists one mode (for Psi_{A,j}) or two ascending modes (for
    Psi_{A,j,k}); identity is placed in the free slots.  Each entry is a sum
    over the spectator indices of ``e^T M e'`` with Kronecker basis vectors.
    """
    dims = tuple(dims)
    mats = [np.eye(n) if l in free else np.asarray(X) for l, (n, X) in enumerate(zip(dims, xs))]
    M = np.asarray(A_dense) @ _kron_all(mats)
    spectators = [l for l in range(len(dims)) if l not in free]
    free_dims = [dims[f] for f in free]
    size = int(np.prod(free_dims))
    out = np.zeros((size, size), dtype=np.result_type(M.dtype, np.float64))
    free_idx = list(np.ndindex(*free_dims))
    for s_pos, s in enumerate(free_idx):
        for t_pos, t in enumerate(free_idx):
            total = 0.0
            for rest in np.ndindex(*[dims[l] for l in spectators]):
                row, col = [0] * len(dims), [0] * len(dims)
                for l, i in zip(spectators, rest):
                    row[l] = col[l] = i
                for f, a, b in zip(free, s, t):
                    row[f], col[f] = a, b
                total = total + _basis_kron(dims, row) @ M @ _basis_kron(dims, col)
            out[s_pos, t_pos] = total
    return out

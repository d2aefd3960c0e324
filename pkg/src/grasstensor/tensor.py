"""Dense tensors: unfoldings, mode products, inner products and truncated HOSVD.

Storage follows C (row-major) order, so the last mode varies fastest.  An
unfolding along ``row_modes`` lists the row modes in the given order with the
last one fastest, and the remaining modes (ascending) as columns.  With
``row_modes = (0, ..., r-1)`` this is ``vec``; it is also the index order of
``np.kron``, which keeps ``vec`` and Kronecker products of per-mode operators
consistent.

Modes are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InvalidSpecError(ValueError):
    """Raised for malformed mode partitions."""


@dataclass(frozen=True)
class DenseTensor:
    """Order-r array of real or complex scalars.

    ``data`` is the flat canonical (C-order) layout; ``array`` is the shaped view.
    """

    shape: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) < 1:
            raise ValueError("tensor order must be at least 1")
        if any(s < 1 for s in shape):
            raise ValueError(f"dimensions must be positive, got {shape}")
        data = np.ascontiguousarray(self.data).reshape(-1)
        if data.size != int(np.prod(shape)):
            raise ValueError(f"data length {data.size} does not match shape {shape}")
        if not np.iscomplexobj(data):
            data = data.astype(np.float64, copy=False)
        else:
            data = data.astype(np.complex128, copy=False)
        data.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array) -> "DenseTensor":
        array = np.asarray(array)
        return cls(array.shape, array.reshape(-1))

    @property
    def array(self) -> np.ndarray:
        return self.data.reshape(self.shape)

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def field(self) -> str:
        return "complex" if np.iscomplexobj(self.data) else "real"


def as_array(T) -> np.ndarray:
    """Return the shaped ndarray behind ``T`` (a DenseTensor or array-like)."""
    if isinstance(T, DenseTensor):
        return T.array
    array = np.asarray(T)
    if array.ndim < 1:
        raise ValueError("tensor order must be at least 1")
    return array


def _check_partition(order: int, row_modes, col_modes=None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    rows = tuple(int(k) for k in row_modes)
    if col_modes is None:
        cols = tuple(k for k in range(order) if k not in rows)
    else:
        cols = tuple(int(k) for k in col_modes)
    modes = rows + cols
    if len(set(modes)) != len(modes) or sorted(modes) != list(range(order)):
        raise InvalidSpecError(
            f"row modes {rows} and column modes {cols} are not a partition of {tuple(range(order))}"
        )
    return rows, cols


def unfold(T, row_modes: Sequence[int], col_modes: Sequence[int] | None = None) -> np.ndarray:
    """Matrix unfolding with ``row_modes`` as rows and the rest as columns.

    Both groups are linearized with their last listed mode varying fastest.
    """
    array = as_array(T)
    rows, cols = _check_partition(array.ndim, row_modes, col_modes)
    n_rows = int(np.prod([array.shape[k] for k in rows], dtype=int))
    n_cols = int(np.prod([array.shape[k] for k in cols], dtype=int))
    return np.transpose(array, rows + cols).reshape(n_rows, n_cols)


def fold(M: np.ndarray, shape: Sequence[int], row_modes: Sequence[int],
         col_modes: Sequence[int] | None = None) -> np.ndarray:
    """Inverse of :func:`unfold` for the same partition."""
    shape = tuple(int(s) for s in shape)
    rows, cols = _check_partition(len(shape), row_modes, col_modes)
    perm = rows + cols
    permuted = np.asarray(M).reshape([shape[k] for k in perm])
    return np.transpose(permuted, np.argsort(perm))


def vec(T) -> np.ndarray:
    """Column vector of all entries in canonical order (N x 1)."""
    array = as_array(T)
    return array.reshape(-1, 1)


def mode_multiply(T, X: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` product ``T x_mode X`` for ``X`` of shape (q, n_mode)."""
    array = as_array(T)
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != array.shape[mode]:
        raise ValueError(
            f"matrix of shape {X.shape} cannot act on mode {mode} of size {array.shape[mode]}"
        )
    out = np.tensordot(X, array, axes=([1], [mode]))
    return np.moveaxis(out, 0, mode)


def multi_mode_multiply(T, matrices: Sequence[np.ndarray | None], skip: Sequence[int] = ()) -> np.ndarray:
    """Apply ``matrices[k]`` along every mode ``k`` not in ``skip`` (``None`` entries are skipped)."""
    out = as_array(T)
    for k, X in enumerate(matrices):
        if X is None or k in skip:
            continue
        out = mode_multiply(out, X, k)
    return out


def inner(T1, T2) -> complex | float:
    """Frobenius inner product ``vec(T1)^H vec(T2)``."""
    a, b = as_array(T1), as_array(T2)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.vdot(a.reshape(-1), b.reshape(-1))


def norm(T) -> float:
    return float(np.linalg.norm(as_array(T).reshape(-1)))


def _phase_normalize(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Scale each column so its first non-negligible entry is real positive."""
    out = vectors.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        scale = np.max(np.abs(col)) if col.size else 0.0
        idx = np.flatnonzero(np.abs(col) > tol * max(scale, 1.0))
        if idx.size:
            z = col[idx[0]]
            out[:, c] = col * (np.conj(z) / abs(z))
    return out


def _lex_key(v: np.ndarray) -> tuple:
    return tuple(x for z in v for x in (round(float(np.real(z)), 12), round(float(np.imag(z)), 12)))


def leading_left_singular(M: np.ndarray, m: int, rel_tie: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Top-``m`` left singular vectors of ``M`` with a deterministic ordering.

    Columns are phase-normalized (first nonzero component real positive); within
    a cluster of equal singular values they are sorted lexicographically.
    Returns ``(U, s)`` with ``U`` of shape (rows, m) and all singular values ``s``.
    """
    U, s, _ = np.linalg.svd(M, full_matrices=True)
    U = _phase_normalize(U)
    k = len(s)
    if U.shape[1] > k:
        s_full = np.concatenate([s, np.zeros(U.shape[1] - k)])
    else:
        s_full = s
    order = []
    i = 0
    top = s_full[0] if s_full.size else 0.0
    while i < len(s_full):
        j = i + 1
        while j < len(s_full) and abs(s_full[j] - s_full[i]) <= rel_tie * max(top, 1.0):
            j += 1
        group = list(range(i, j))
        if len(group) > 1:
            group.sort(key=lambda c: _lex_key(U[:, c]))
        order.extend(group)
        i = j
    return U[:, order[:m]], s


def hosvd_truncate(T, ranks: Sequence[int]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Truncated HOSVD: per-mode leading singular subspaces and the projected core.

    Returns ``(core, factors)`` where ``factors[j]`` is n_j x m_j with orthonormal
    columns and ``core = T x_1 U_1^H ... x_r U_r^H``.
    """
    array = as_array(T)
    ranks = tuple(int(m) for m in ranks)
    if len(ranks) != array.ndim:
        raise ValueError(f"expected {array.ndim} ranks, got {len(ranks)}")
    for j, (m, n) in enumerate(zip(ranks, array.shape)):
        if not 1 <= m <= n:
            raise ValueError(f"rank {m} out of range [1, {n}] for mode {j}")
    factors = [leading_left_singular(unfold(array, (j,)), m)[0] for j, m in enumerate(ranks)]
    core = multi_mode_multiply(array, [U.conj().T for U in factors])
    return core, factors


def reconstruct(core, factors: Sequence[np.ndarray]) -> np.ndarray:
    """``core x_1 U_1 ... x_r U_r``."""
    return multi_mode_multiply(core, list(factors))


def multilinear_rank(T, tol: float = 1e-10) -> tuple[int, ...]:
    """Number of singular values of each mode unfolding above ``tol * sigma_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    array = as_array(T)
    ranks = []
    for j in range(array.ndim):
        s = np.linalg.svd(unfold(array, (j,)), compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            ranks.append(0)
        else:
            ranks.append(int(np.sum(s > tol * s[0])))
    return tuple(ranks)

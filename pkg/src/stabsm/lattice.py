"""Finite periodic tori, instantiation of polynomial maps, and F2 linear algebra.

Indexing convention (shared by every module):

* Unit cells are enumerated lexicographically with the first coordinate most
  significant, ``cell = ((u_0 * L_1) + u_1) * L_2 + u_2``.
* A row-labelled object with ``r`` components per cell (qubit components for
  Pauli vectors, stabilizer types for syndromes) lives at ``cell * r + i``.
  For Pauli vectors ``r = 2l``; components ``0..l-1`` are Z, ``l..2l-1`` X.
* The monomial ``x^a`` inside a column placed at cell ``u`` touches cell
  ``(u + a) mod L``.

Binary matrices are plain ``numpy.uint8`` arrays with entries in {0, 1}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .polyalg import LaurentPoly, PolyMatrix


class WrapAroundWarning(UserWarning):
    """A polynomial support folds onto itself on a small torus."""


@dataclass(frozen=True)
class Torus:
    dims: tuple[int, ...]
    l: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(L) for L in self.dims))
        if not self.dims:
            raise ValueError("torus needs at least one dimension")
        if any(L < 2 for L in self.dims):
            raise ValueError(f"all torus sizes must be >= 2, got {self.dims}")
        if self.l < 1:
            raise ValueError("need at least one qubit per cell")

    @classmethod
    def cubic(cls, L: int, d: int, l: int = 1) -> Torus:
        return cls((L,) * d, l)

    @property
    def d(self) -> int:
        return len(self.dims)

    @cached_property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_qubits(self) -> int:
        return self.l * self.n_cells

    @cached_property
    def _strides(self) -> np.ndarray:
        strides = np.ones(self.d, dtype=np.int64)
        for k in range(self.d - 2, -1, -1):
            strides[k] = strides[k + 1] * self.dims[k + 1]
        return strides

    @cached_property
    def coords(self) -> np.ndarray:
        """``(n_cells, d)`` array of cell coordinates in index order."""
        grids = np.meshgrid(*[np.arange(L) for L in self.dims], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def cell_index(self, coord: Sequence[int] | np.ndarray) -> int | np.ndarray:
        c = np.mod(np.asarray(coord, dtype=np.int64), np.asarray(self.dims))
        return c @ self._strides if c.ndim > 1 else int(c @ self._strides)

    def shifted_cells(self, offset: Sequence[int]) -> np.ndarray:
        """Index of cell ``u + offset`` for every cell ``u``."""
        return self.cell_index(self.coords + np.asarray(offset, dtype=np.int64))

    def with_l(self, l: int) -> Torus:
        return Torus(self.dims, l)


def _check_dim(M_d: int, t: Torus) -> None:
    if M_d != t.d:
        raise ValueError(f"polynomial dimension {M_d} does not match torus dimension {t.d}")


def _column_collides(col: Sequence[LaurentPoly], t: Torus) -> bool:
    seen = set()
    L = np.asarray(t.dims)
    for i, p in enumerate(col):
        for e in p.terms:
            key = (i, tuple(np.mod(e, L)))
            if key in seen:
                return True
            seen.add(key)
    return False


def instantiate(M: PolyMatrix, t: Torus, *, warn: bool = True) -> np.ndarray:
    """Expand a translation-invariant map into its block-circulant binary matrix.

    The result has shape ``(n_cells * M.rows, n_cells * M.cols)``; column
    ``cell * M.cols + j`` is column ``j`` of ``M`` translated to ``cell``.
    Monomials that land on the same site cancel mod 2.
    """
    _check_dim(M.d, t)
    C, r, c = t.n_cells, M.rows, M.cols
    out = np.zeros((C * r, C * c), dtype=np.uint8)
    cols_idx = np.arange(C) * c
    for j in range(c):
        col = M.column(j)
        if warn and _column_collides(col, t):
            warnings.warn(
                f"column {j} support wraps onto itself on torus {t.dims}",
                WrapAroundWarning,
                stacklevel=2,
            )
        for i, p in enumerate(col):
            for e in p.terms:
                rows = t.shifted_cells(e) * r + i
                np.bitwise_xor.at(out, (rows, cols_idx + j), 1)
    return out


def instantiate_vector(
    vec: Sequence[LaurentPoly], t: Torus, offset: Sequence[int] | None = None
) -> np.ndarray:
    """Binary realization of one Pauli polynomial vector placed at ``offset``."""
    r = len(vec)
    out = np.zeros(t.n_cells * r, dtype=np.uint8)
    off = np.zeros(t.d, dtype=np.int64) if offset is None else np.asarray(offset, dtype=np.int64)
    for i, p in enumerate(vec):
        _check_dim(p.d, t)
        for e in p.terms:
            out[t.cell_index(np.asarray(e) + off) * r + i] ^= 1
    return out


def split_zx(v: np.ndarray, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Split instantiated Pauli vector(s) into (Z part, X part) per qubit.

    Accepts a vector of length ``n_cells * 2l`` or a stack of them along the
    last axis; returns arrays with qubit index ``cell * l + i``.
    """
    v = np.asarray(v, dtype=np.uint8)
    lead = v.shape[:-1]
    blocks = v.reshape(*lead, -1, 2 * l)
    z = blocks[..., :l].reshape(*lead, -1)
    x = blocks[..., l:].reshape(*lead, -1)
    return z, x


def join_zx(z: np.ndarray, x: np.ndarray, l: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint8)
    x = np.asarray(x, dtype=np.uint8)
    lead = z.shape[:-1]
    zb = z.reshape(*lead, -1, l)
    xb = x.reshape(*lead, -1, l)
    return np.concatenate([zb, xb], axis=-1).reshape(*lead, -1)


def symplectic_product(a: np.ndarray, b: np.ndarray, l: int) -> np.ndarray:
    """Commutation bits ``a_z . b_x + a_x . b_z`` mod 2 between instantiated Paulis.

    With stacks ``a`` of shape (p, 2lC) and ``b`` of shape (q, 2lC) the result
    is the (p, q) matrix of pairwise bits.
    """
    az, ax = split_zx(np.atleast_2d(a), l)
    bz, bx = split_zx(np.atleast_2d(b), l)
    prod = az.astype(np.int64) @ bx.T.astype(np.int64) + ax.astype(np.int64) @ bz.T.astype(np.int64)
    return (prod % 2).astype(np.uint8)


# --------------------------------------------------------------------------
# F2 linear algebra


def as_f2(M) -> np.ndarray:
    a = np.asarray(M)
    if a.ndim == 1:
        a = a[None, :]
    return (a.astype(np.int64) % 2).astype(np.uint8)


def rref_f2(M) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over F2 and the list of pivot columns."""
    A = as_f2(M).copy()
    rows, cols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(A[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        mask = A[:, c].astype(bool)
        mask[r] = False
        A[mask] ^= A[r]
        pivots.append(c)
        r += 1
    return A[:r], pivots


def rank_f2(M) -> int:
    return len(rref_f2(M)[1])


def kernel_f2(M) -> np.ndarray:
    """Basis of ``{v : M v = 0}`` as rows, in reduced row-echelon form."""
    A = as_f2(M)
    cols = A.shape[1]
    R, pivots = rref_f2(A)
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for i, pc in enumerate(pivots):
            basis[k, pc] = R[i, f]
    if basis.shape[0] == 0:
        return basis
    return rref_f2(basis)[0]


def solve_f2(M, b) -> np.ndarray | None:
    """One solution ``v`` of ``M v = b`` over F2, or ``None`` if inconsistent."""
    A = as_f2(M)
    bb = as_f2(b).reshape(-1)
    if bb.size != A.shape[0]:
        raise ValueError("right-hand side length does not match matrix rows")
    aug = np.concatenate([A, bb[:, None]], axis=1)
    R, pivots = rref_f2(aug)
    n = A.shape[1]
    if pivots and pivots[-1] == n:
        return None
    v = np.zeros(n, dtype=np.uint8)
    for i, pc in enumerate(pivots):
        v[pc] = R[i, n]
    return v


def in_rowspace_f2(M, v) -> bool:
    """True iff ``v`` is an F2 combination of the rows of ``M``."""
    A = as_f2(M)
    if A.shape[0] == 0:
        return not np.any(as_f2(v))
    return rank_f2(np.vstack([A, as_f2(v)])) == rank_f2(A)


def independent_rows_f2(M, base=None) -> list[int]:
    """Greedy scan: indices of rows of ``M`` independent of ``base`` and earlier picks."""
    A = as_f2(M)
    basis_rows: list[np.ndarray] = []
    pivot_cols: list[int] = []

    def reduce(v: np.ndarray) -> np.ndarray:
        v = v.copy()
        for row, pc in zip(basis_rows, pivot_cols):
            if v[pc]:
                v ^= row
        return v

    def add(v: np.ndarray) -> bool:
        v = reduce(v)
        nz = np.nonzero(v)[0]
        if nz.size == 0:
            return False
        pc = int(nz[0])
        for k, row in enumerate(basis_rows):
            if row[pc]:
                basis_rows[k] = row ^ v
        basis_rows.append(v)
        pivot_cols.append(pc)
        return True

    if base is not None:
        for v in as_f2(base):
            add(v)
    return [i for i, v in enumerate(A) if add(v)]


def inverse_f2(M) -> np.ndarray:
    A = as_f2(M)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("inverse needs a square matrix")
    R, pivots = rref_f2(np.concatenate([A, np.eye(n, dtype=np.uint8)], axis=1))
    if pivots[:n] != list(range(n)) or len(pivots) < n:
        raise np.linalg.LinAlgError("matrix is singular over F2")
    return R[:n, n:]


def matmul_f2(A, B) -> np.ndarray:
    return ((np.asarray(A, dtype=np.int64) @ np.asarray(B, dtype=np.int64)) % 2).astype(np.uint8)


def to_bitmap(M) -> str:
    """Text rendering used by the CLI debugging flag."""
    return "\n".join("".join("1" if b else "." for b in row) for row in as_f2(M))


# --------------------------------------------------------------------------
# code parameters


@dataclass(frozen=True)
class CodeParameters:
    N: int
    N_s: int
    N_c: int

    @property
    def logical_count(self) -> int:
        return self.N - self.N_s + self.N_c

    def __post_init__(self) -> None:
        if self.logical_count < 0:
            raise ValueError(f"negative logical count from N={self.N}, N_s={self.N_s}, N_c={self.N_c}")


def code_parameters(code, t: Torus) -> CodeParameters:
    """Qubit, stabilizer and constraint counts of ``code`` on the torus ``t``.

    ``code`` needs ``S`` (a PolyMatrix with 2l rows) and ``l``.  The
    constraint count is the kernel dimension of the instantiated map from
    stabilizer labels to qubit supports.
    """
    S = code.S
    t = t.with_l(code.l)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WrapAroundWarning)
        S_inst = instantiate(S, t)
    N_s = S_inst.shape[1]
    N_c = N_s - rank_f2(S_inst)
    return CodeParameters(N=t.n_qubits, N_s=N_s, N_c=N_c)


def all_f2_vectors(k: int) -> np.ndarray:
    """Every vector of F2^k as rows; row ``idx`` has bit ``j`` of ``idx`` in column ``j``."""
    idx = np.arange(1 << k, dtype=np.int64)
    return ((idx[:, None] >> np.arange(k)) & 1).astype(np.uint8)

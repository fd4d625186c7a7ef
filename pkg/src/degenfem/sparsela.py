"""CSR storage and a Jacobi-preconditioned conjugate gradient solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

__all__ = ["CsrMatrix", "NonConvergence", "NonFiniteValue", "spmv", "pcg", "solve_spd"]

logger = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float, target: float):
        super().__init__(f"CG did not converge in {iterations} iterations "
                         f"(residual {residual:.3e} > {target:.3e})")
        self.iterations = iterations
        self.residual = residual


class NonFiniteValue(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Square sparse matrix in compressed sparse row form.

    Column indices are sorted and unique inside each row.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        col_idx = np.asarray(self.col_idx, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if row_ptr.shape != (self.n + 1,) or row_ptr[0] != 0 or row_ptr[-1] != len(col_idx):
            raise ValueError("row_ptr inconsistent with matrix size")
        if np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if len(values) != len(col_idx):
            raise ValueError("values and col_idx differ in length")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= self.n):
            raise ValueError("column index out of range")
        rows = np.repeat(np.arange(self.n), np.diff(row_ptr))
        same_row = rows[1:] == rows[:-1]
        if np.any(same_row & (col_idx[1:] <= col_idx[:-1])):
            raise ValueError("column indices must be sorted and unique per row")
        for name, arr in (("row_ptr", row_ptr), ("col_idx", col_idx), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_rows", rows)

    @classmethod
    def from_triplets(cls, n: int, rows, cols, vals) -> "CsrMatrix":
        """Build from (row, col, value) triplets, summing duplicates.

        Duplicates are summed in ascending value order, so the result does not
        depend on the order in which the triplets were produced.
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if len(rows) == 0:
            return cls(n, np.zeros(n + 1, dtype=np.int64), np.zeros(0, np.int64), np.zeros(0))
        order = np.lexsort((vals, cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        start = np.ones(len(rows), dtype=bool)
        start[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        first = np.flatnonzero(start)
        summed = np.add.reduceat(vals, first)
        urows, ucols = rows[first], cols[first]
        row_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(urows, minlength=n), out=row_ptr[1:])
        return cls(n, row_ptr, ucols, summed)

    @classmethod
    def from_dense(cls, a) -> "CsrMatrix":
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_triplets(a.shape[0], r, c, a[r, c])

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n)
        return cls.from_triplets(n, idx, idx, np.ones(n))

    @property
    def nnz(self) -> int:
        return len(self.values)

    def triplets(self):
        return self._rows, self.col_idx, self.values

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self._rows, self.col_idx] = self.values
        return out

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n)
        on = self._rows == self.col_idx
        d[self._rows[on]] = self.values[on]
        return d

    def transpose(self) -> "CsrMatrix":
        return CsrMatrix.from_triplets(self.n, self.col_idx, self._rows, self.values)

    def is_symmetric(self) -> bool:
        """Exact (bitwise) symmetry of pattern and values."""
        t = self.transpose()
        return (np.array_equal(t.row_ptr, self.row_ptr)
                and np.array_equal(t.col_idx, self.col_idx)
                and np.array_equal(t.values, self.values))

    def quad(self, v) -> float:
        """v^T M v."""
        v = np.asarray(v, dtype=float)
        return float(v @ spmv(self, v))

    def scaled(self, alpha: float) -> "CsrMatrix":
        return CsrMatrix(self.n, self.row_ptr, self.col_idx, alpha * self.values)

    def __add__(self, other: "CsrMatrix") -> "CsrMatrix":
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        r1, c1, v1 = self.triplets()
        r2, c2, v2 = other.triplets()
        return CsrMatrix.from_triplets(self.n, np.concatenate([r1, r2]),
                                       np.concatenate([c1, c2]), np.concatenate([v1, v2]))

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(m: CsrMatrix, x) -> np.ndarray:
    """y = M x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n,):
        raise ValueError(f"dimension mismatch: matrix is {m.n}x{m.n}, vector has shape {x.shape}")
    return np.bincount(m._rows, weights=m.values * x[m.col_idx], minlength=m.n)


def pcg(m: CsrMatrix, b, rtol: float = 1e-10, max_iter: int | None = None, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``(x, iterations, residual_norm)``. Convergence is declared on the
    true residual ``||b - M x|| <= rtol ||b||``.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (m.n,):
        raise ValueError(f"dimension mismatch: matrix is {m.n}x{m.n}, rhs has shape {b.shape}")
    if not 0.0 < rtol < 1.0:
        raise ValueError(f"rtol must lie in (0, 1), got {rtol}")
    if max_iter is None:
        max_iter = 10 * max(m.n, 1)
    if not np.isfinite(b).all():
        raise NonFiniteValue("right-hand side contains non-finite values")

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(m.n), 0, 0.0
    target = rtol * bnorm

    diag = m.diagonal()
    if np.any(diag <= 0):
        raise NonFiniteValue("Jacobi preconditioner needs a positive diagonal")
    inv_diag = 1.0 / diag

    x = np.zeros(m.n) if x0 is None else np.array(x0, dtype=float)
    r = b - spmv(m, x)
    it = 0
    while True:
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            return x, it, float(rnorm)
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        # inner loop on the recursive residual; the outer loop re-checks the true one
        while it < max_iter:
            q = spmv(m, p)
            pq = p @ q
            if not np.isfinite(pq) or pq <= 0.0:
                raise NonFiniteValue(f"CG breakdown at iteration {it} (p^T M p = {pq})")
            step = rz / pq
            x += step * p
            r -= step * q
            it += 1
            if np.linalg.norm(r) <= target:
                break
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - spmv(m, x)
        if not np.isfinite(r).all():
            raise NonFiniteValue("non-finite residual")
        if it >= max_iter and np.linalg.norm(r) > target:
            raise NonConvergence(it, float(np.linalg.norm(r)), float(target))


def solve_spd(m: CsrMatrix, b, rtol: float = 1e-10, max_iter: int | None = None, x0=None) -> np.ndarray:
    x, it, res = pcg(m, b, rtol=rtol, max_iter=max_iter, x0=x0)
    logger.debug("pcg: n=%d iterations=%d residual=%.3e", m.n, it, res)
    return x

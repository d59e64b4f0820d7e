"""Square CSR matrices with sorted column indices."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, DimensionError


class SparseMatrix:
    """Immutable square matrix in compressed sparse row form.

    ``col_idx`` is strictly increasing inside every row, so each (row, col)
    pair is stored at most once. Products are delegated to scipy's CSR
    kernels through a zero-copy view of the same three arrays.
    """

    __slots__ = ("dim", "row_ptr", "col_idx", "values", "symmetric", "_csr")

    def __init__(self, dim, row_ptr, col_idx, values, symmetric=False, check=True):
        self.dim = int(dim)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.symmetric = bool(symmetric)
        if check:
            self._validate()
        for arr in (self.row_ptr, self.col_idx, self.values):
            arr.setflags(write=False)
        self._csr = sp.csr_matrix(
            (self.values, self.col_idx, self.row_ptr), shape=(self.dim, self.dim), copy=False
        )
        if check and self.symmetric and not self.is_symmetric():
            raise DataError("matrix flagged symmetric but (i,j) and (j,i) differ")

    def _validate(self) -> None:
        n = self.dim
        if n < 0:
            raise DataError(f"negative dimension {n}")
        if self.row_ptr.shape != (n + 1,):
            raise DataError(f"row_ptr must have {n + 1} entries, got {self.row_ptr.shape[0]}")
        if self.row_ptr[0] != 0 or np.any(np.diff(self.row_ptr) < 0):
            raise DataError("row_ptr must start at 0 and be non-decreasing")
        nnz = int(self.row_ptr[-1])
        if self.col_idx.shape != (nnz,) or self.values.shape != (nnz,):
            raise DataError(f"col_idx/values must have nnz={nnz} entries")
        if nnz and (self.col_idx.min() < 0 or self.col_idx.max() >= n):
            raise DataError("column index out of range")
        # strictly increasing within each row: a non-positive step is only allowed at a row start
        if nnz > 1:
            step = np.diff(self.col_idx)
            row_starts = np.zeros(nnz, dtype=bool)
            row_starts[self.row_ptr[1:-1][self.row_ptr[1:-1] < nnz]] = True
            if np.any((step <= 0) & ~row_starts[1:]):
                raise DataError("column indices must be strictly increasing within a row")
        if not np.all(np.isfinite(self.values)):
            raise DataError("non-finite stored value")

    @classmethod
    def from_coo(cls, dim: int, rows, cols, values=None, symmetric: bool = False) -> "SparseMatrix":
        """Build from coordinate triplets; duplicate coordinates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if values is None:
            values = np.ones(rows.shape[0])
        if rows.size and (rows.min() < 0 or rows.max() >= dim or cols.min() < 0 or cols.max() >= dim):
            raise DataError(f"coordinate outside [0, {dim})")
        m = sp.coo_matrix((np.asarray(values, dtype=np.float64), (rows, cols)), shape=(dim, dim)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(dim, m.indptr, m.indices, m.data, symmetric=symmetric)

    @classmethod
    def identity(cls, dim: int) -> "SparseMatrix":
        idx = np.arange(dim)
        return cls(dim, np.arange(dim + 1), idx, np.ones(dim), symmetric=True)

    @classmethod
    def zeros(cls, dim: int) -> "SparseMatrix":
        return cls(dim, np.zeros(dim + 1), [], [], symmetric=True)

    @classmethod
    def block_diag(cls, blocks: Sequence["SparseMatrix"]) -> "SparseMatrix":
        if not blocks:
            raise DataError("block_diag needs at least one block")
        offset_rows, offset_nnz = 0, 0
        ptrs, cols, vals = [np.zeros(1, dtype=np.int64)], [], []
        for b in blocks:
            ptrs.append(b.row_ptr[1:] + offset_nnz)
            cols.append(b.col_idx + offset_rows)
            vals.append(b.values)
            offset_rows += b.dim
            offset_nnz += b.nnz
        return cls(
            offset_rows,
            np.concatenate(ptrs),
            np.concatenate(cols),
            np.concatenate(vals),
            symmetric=all(b.symmetric for b in blocks),
            check=False,
        )

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim, self.dim)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO rows)."""
        return np.repeat(np.arange(self.dim), np.diff(self.row_ptr))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        out[self.row_indices(), self.col_idx] = self.values
        return out

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def transpose(self) -> "SparseMatrix":
        if self.symmetric:
            return self
        t = self._csr.T.tocsr()
        t.sort_indices()
        return SparseMatrix(self.dim, t.indptr, t.indices, t.data, check=False)

    def is_symmetric(self, atol: float = 0.0) -> bool:
        diff = self._csr - self._csr.T
        return diff.nnz == 0 or float(np.abs(diff.data).max()) <= atol

    def dot(self, dense: np.ndarray) -> np.ndarray:
        """Plain ndarray product ``self @ dense`` (no gradient tracking)."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.shape[0] != self.dim:
            raise DimensionError(f"sparse {self.shape} @ dense {dense.shape}: dimension mismatch")
        return np.asarray(self._csr @ dense)

    def permute(self, perm: np.ndarray) -> "SparseMatrix":
        """Relabel nodes so new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        rows = inv[self.row_indices()]
        cols = inv[self.col_idx]
        return SparseMatrix.from_coo(self.dim, rows, cols, self.values, symmetric=self.symmetric)

    def __repr__(self) -> str:
        return f"SparseMatrix(dim={self.dim}, nnz={self.nnz}, symmetric={self.symmetric})"

"""Minimal sparse containers used by the feature encoders and models.

SparseVector is the wire format every encoder emits; CscMatrix is the
column-major batch layout the tree trainer and batch predictors consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class SparseVector:
    """One feature vector: sorted column ids, matching values, total width.

    Indices are strictly increasing and no stored value is zero.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[int, float]], dim: int) -> "SparseVector":
        items = sorted((int(i), float(v)) for i, v in pairs if v != 0.0)
        if items:
            idx = np.fromiter((i for i, _ in items), dtype=np.int64, count=len(items))
            val = np.fromiter((v for _, v in items), dtype=np.float64, count=len(items))
        else:
            idx = np.empty(0, dtype=np.int64)
            val = np.empty(0, dtype=np.float64)
        if np.any(idx[1:] == idx[:-1]):
            raise ValueError("duplicate column id in sparse vector")
        if len(idx) and (idx[0] < 0 or idx[-1] >= dim):
            raise ValueError("column id out of range")
        return SparseVector(idx, val, dim)

    @staticmethod
    def from_dense(dense: Sequence[float] | np.ndarray) -> "SparseVector":
        arr = np.asarray(dense, dtype=np.float64)
        nz = np.nonzero(arr)[0]
        return SparseVector(nz.astype(np.int64), arr[nz], int(arr.size))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def l2_normalized(self) -> "SparseVector":
        """Scale to unit Euclidean norm; the all-zero vector is returned as is."""
        norm = float(np.sqrt(np.dot(self.values, self.values)))
        if norm == 0.0:
            return self
        return SparseVector(self.indices, self.values / norm, self.dim)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    @property
    def nnz(self) -> int:
        return int(len(self.indices))

    def get(self, column: int) -> float:
        pos = int(np.searchsorted(self.indices, column))
        if pos < len(self.indices) and self.indices[pos] == column:
            return float(self.values[pos])
        return 0.0

    def shifted(self, offset: int, dim: int) -> "SparseVector":
        """The same vector placed at a column offset inside a wider space."""
        return SparseVector(self.indices + offset, self.values, dim)


def concat(parts: Sequence[SparseVector]) -> SparseVector:
    """Concatenate vectors into one over the combined column space."""
    dim = sum(p.dim for p in parts)
    idx_parts, val_parts = [], []
    offset = 0
    for p in parts:
        idx_parts.append(p.indices + offset)
        val_parts.append(p.values)
        offset += p.dim
    return SparseVector(
        np.concatenate(idx_parts) if idx_parts else np.empty(0, dtype=np.int64),
        np.concatenate(val_parts) if val_parts else np.empty(0, dtype=np.float64),
        dim,
    )


class CscMatrix:
    """Column-compressed matrix built once from a batch of SparseVectors."""

    def __init__(self, indptr: np.ndarray, rows: np.ndarray, vals: np.ndarray,
                 shape: tuple[int, int]):
        self.indptr = indptr
        self.rows = rows
        self.vals = vals
        self.shape = shape

    @staticmethod
    def from_vectors(vectors: Sequence[SparseVector]) -> "CscMatrix":
        if not vectors:
            return CscMatrix(np.zeros(1, dtype=np.int64), np.empty(0, np.int64),
                             np.empty(0, np.float64), (0, 0))
        dim = vectors[0].dim
        for v in vectors:
            if v.dim != dim:
                raise ValueError("vectors of mixed widths")
        n = len(vectors)
        total = sum(v.nnz for v in vectors)
        cols = np.empty(total, dtype=np.int64)
        rows = np.empty(total, dtype=np.int64)
        vals = np.empty(total, dtype=np.float64)
        at = 0
        for i, v in enumerate(vectors):
            k = v.nnz
            cols[at:at + k] = v.indices
            rows[at:at + k] = i
            vals[at:at + k] = v.values
            at += k
        order = np.lexsort((rows, cols))
        cols, rows, vals = cols[order], rows[order], vals[order]
        indptr = np.zeros(dim + 1, dtype=np.int64)
        np.add.at(indptr, cols + 1, 1)
        np.cumsum(indptr, out=indptr)
        return CscMatrix(indptr, rows, vals, (n, dim))

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Row ids (ascending) and values of the nonzero entries of column j."""
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.rows[lo:hi], self.vals[lo:hi]

    def densify_columns(self, columns: Sequence[int]) -> np.ndarray:
        """A dense (n_rows, len(columns)) block, zeros filled in."""
        out = np.zeros((self.shape[0], len(columns)), dtype=np.float64)
        for k, j in enumerate(columns):
            r, v = self.column(j)
            out[r, k] = v
        return out

    def row_dense(self, i: int) -> np.ndarray:
        out = np.zeros(self.shape[1], dtype=np.float64)
        mask = self.rows == i
        # Columns are recoverable from indptr; cheap enough for tests only.
        cols = np.searchsorted(self.indptr, np.nonzero(mask)[0], side="right") - 1
        out[cols] = self.vals[mask]
        return out

"""Sparse and dense activation containers plus the single-layer inference kernels.

The layer operator is Y' = clip(Y W + gate(Y) * b) where clip(x) = min(max(x, 0), 32)
and the bias is applied only to batch rows that still carry at least one nonzero
activation, so dead inputs stay dead through the whole network.

Kernel arithmetic is float32; the 64-bit reference lives in spdnn.engine.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp

CLIP_MAX = 32.0


class ShapeError(ValueError):
    """Operand dimensions do not line up."""


@dataclasses.dataclass(frozen=True, eq=False)
class SparseMatrix:
    """CSR matrix: row_offsets (n_rows+1), col_indices and values (nnz each).

    Stored entries are sorted by column within each row and explicit zeros are
    never stored.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", np.asarray(self.row_offsets, dtype=np.int64))
        object.__setattr__(self, "col_indices", np.asarray(self.col_indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    @property
    def nnz(self):
        return int(self.row_offsets[-1])

    def row_nnz(self):
        return np.diff(self.row_offsets)

    @classmethod
    def empty(cls, n_rows, n_cols):
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64),
                   np.empty(0, dtype=np.int64), np.empty(0))

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals):
        """Build from unordered triples; duplicates are summed, zeros dropped."""
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls.from_scipy(m)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("dense input must be 2-D")
        m = sp.csr_matrix(a)
        m.eliminate_zeros()
        m.sort_indices()
        return cls.from_scipy(m)

    @classmethod
    def from_scipy(cls, m):
        m = m.tocsr()
        return cls(m.shape[0], m.shape[1], m.indptr.astype(np.int64),
                   m.indices.astype(np.int64), m.data.astype(np.float64))

    def to_scipy(self, dtype=np.float64):
        return sp.csr_matrix(
            (self.values.astype(dtype), self.col_indices, self.row_offsets),
            shape=(self.n_rows, self.n_cols))

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_cols))
        rows = np.repeat(np.arange(self.n_rows), self.row_nnz())
        out[rows, self.col_indices] = self.values
        return out

    def validate(self):
        """Raise ValueError on any structural-invariant violation."""
        if self.row_offsets.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows+1")
        if self.row_offsets[0] != 0:
            raise ValueError("row_offsets[0] must be 0")
        if np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        nnz = self.nnz
        if len(self.col_indices) != nnz or len(self.values) != nnz:
            raise ValueError("col_indices/values length must equal row_offsets[-1]")
        if nnz and (self.col_indices.min() < 0 or self.col_indices.max() >= self.n_cols):
            raise ValueError("column index out of range")
        for i in range(self.n_rows):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            if np.any(np.diff(self.col_indices[lo:hi]) <= 0):
                raise ValueError(f"row {i}: col_indices not strictly increasing")
        if np.any(self.values == 0.0):
            raise ValueError("explicitly stored zero value")

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.n_rows == other.n_rows and self.n_cols == other.n_cols
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))


@dataclasses.dataclass(frozen=True, eq=False)
class DenseBatch:
    """Row-major dense activation batch, one input per row."""

    data: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.data)
        if a.ndim != 2:
            raise ValueError("DenseBatch data must be 2-D")
        object.__setattr__(self, "data", a)

    @property
    def n_rows(self):
        return self.data.shape[0]

    @property
    def n_cols(self):
        return self.data.shape[1]


@dataclasses.dataclass(frozen=True, eq=False)
class BiasVector:
    """Per-neuron bias, broadcast along batch rows by layer_forward."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("bias entries must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n_cols(self):
        return len(self.values)


def relu_clip(x):
    """Clipped ReLU on a scalar: min(max(x, 0), 32). Rejects non-finite input."""
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"relu_clip: non-finite input {x}")
    return min(max(x, 0.0), CLIP_MAX)


def densify(m):
    return DenseBatch(m.to_dense())


def sparsify(d):
    return SparseMatrix.from_dense(d.data)


def nonzero_row_indicator(y):
    """Boolean array, entry i true iff row i of y has any nonzero."""
    if isinstance(y, SparseMatrix):
        return y.row_nnz() > 0
    return np.any(y.data != 0, axis=1)


def _check_mul_shapes(y, w, what):
    if y.n_cols != w.n_rows:
        raise ShapeError(
            f"{what}: left operand is {y.n_rows}x{y.n_cols}, "
            f"right operand is {w.n_rows}x{w.n_cols}")


def spmm_dense(y, w):
    """Dense batch times sparse matrix; no nonlinearity."""
    _check_mul_shapes(y, w, "spmm_dense")
    z = y.data.astype(np.float32, copy=False) @ w.to_scipy(np.float32)
    return DenseBatch(np.asarray(z))


def spgemm(y, w):
    """Sparse-sparse product with canonical (sorted, zero-free) CSR output."""
    _check_mul_shapes(y, w, "spgemm")
    p = y.to_scipy(np.float32) @ w.to_scipy(np.float32)
    p.sum_duplicates()
    p.eliminate_zeros()
    p.sort_indices()
    return SparseMatrix.from_scipy(p)


def _layer_forward_dense(data, wsp, b32):
    z = np.asarray(data @ wsp)
    gate = np.any(data != 0, axis=1)
    z[gate] += b32
    np.clip(z, 0.0, CLIP_MAX, out=z)
    return z


def _layer_forward_sparse(ysp, wsp, b32):
    z = ysp @ wsp
    if np.all(b32 <= 0):
        # Bias at unstored positions clips to zero, so only stored entries
        # change; rows with no activations have no stored product entries.
        z.data = z.data + b32[z.indices]
    else:
        gate = sp.csr_matrix((ysp.getnnz(axis=1) > 0).astype(np.float32).reshape(-1, 1))
        z = z + gate @ sp.csr_matrix(b32.reshape(1, -1))
    z.data = np.where(z.data > 0, np.minimum(z.data, np.float32(CLIP_MAX)), 0)
    z.eliminate_zeros()
    z.sort_indices()
    return z


def _row_chunks(n_rows, workers):
    bounds = np.linspace(0, n_rows, workers + 1).astype(int)
    return [(bounds[i], bounds[i + 1]) for i in range(workers) if bounds[i] < bounds[i + 1]]


def layer_forward(y, w, b, workers=1):
    """One DNN layer: product, nonzero-row-gated bias, clipped ReLU.

    Returns the same representation as y. Parallelizes over batch rows; each
    output row is produced by exactly one worker, so results do not depend on
    the worker count.
    """
    _check_mul_shapes(y, w, "layer_forward")
    if b.n_cols != w.n_cols:
        raise ShapeError(
            f"layer_forward: bias has {b.n_cols} entries, matrix has {w.n_cols} columns")
    wsp = w.to_scipy(np.float32)
    b32 = b.values.astype(np.float32)

    if isinstance(y, SparseMatrix):
        ysp = y.to_scipy(np.float32)
        if workers <= 1 or y.n_rows < 2:
            out = _layer_forward_sparse(ysp, wsp, b32)
        else:
            chunks = _row_chunks(y.n_rows, workers)
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                parts = list(pool.map(
                    lambda c: _layer_forward_sparse(ysp[c[0]:c[1]], wsp, b32), chunks))
            out = sp.vstack(parts, format="csr")
        return SparseMatrix.from_scipy(out)

    data = y.data.astype(np.float32, copy=False)
    if workers <= 1 or y.n_rows < 2:
        return DenseBatch(_layer_forward_dense(data, wsp, b32))
    chunks = _row_chunks(y.n_rows, workers)
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(
            lambda c: _layer_forward_dense(data[c[0]:c[1]], wsp, b32), chunks))
    return DenseBatch(np.vstack(parts))

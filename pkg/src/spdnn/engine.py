"""Timed challenge execution: layer loop, category extraction, verification, rate.

The timer covers exactly the layer evaluation loop plus category
identification. Loading, generation, and correctness checking happen outside
it; infer takes fully loaded in-memory inputs so no I/O can leak into the
timed region.
"""

from __future__ import annotations

import dataclasses
import time
from typing import NamedTuple

import numpy as np

from .sparse_core import DenseBatch, ShapeError, SparseMatrix, layer_forward

CLIP_MAX = 32.0


@dataclasses.dataclass(frozen=True)
class ChallengeResult:
    categories: tuple
    t_dnn: float
    n_inputs: int
    n_connections: int
    n_ops: int
    rate: float
    correct: bool


class InferenceRun(NamedTuple):
    activations: object
    categories: tuple
    t_seconds: float


def extract_categories(y_final):
    """1-based indices of rows with any entry > 0, strictly increasing."""
    if isinstance(y_final, SparseMatrix):
        rows = np.repeat(np.arange(y_final.n_rows), y_final.row_nnz())
        hit = np.zeros(y_final.n_rows, dtype=bool)
        hit[rows[y_final.values > 0]] = True
    else:
        hit = np.any(y_final.data > 0, axis=1)
    return tuple(int(i) + 1 for i in np.nonzero(hit)[0])


def infer(y0, net, workers=1):
    """Run all layers and extract categories; only that region is timed."""
    if y0.n_cols != net.width:
        raise ShapeError(f"input width {y0.n_cols} != network width {net.width}")
    for layer_idx, w in enumerate(net.layers):
        if w.n_rows != net.width or w.n_cols != net.width:
            raise ShapeError(f"layer {layer_idx}: expected {net.width}x{net.width}, "
                             f"got {w.n_rows}x{w.n_cols}")

    t0 = time.perf_counter_ns()
    y = y0
    for w, b in zip(net.layers, net.biases):
        y = layer_forward(y, w, b, workers=workers)
    categories = extract_categories(y)
    t1 = time.perf_counter_ns()
    return InferenceRun(y, categories, (t1 - t0) / 1e9)


def oracle_infer(y0, net):
    """Straightforward float64 dense reference; no pruning shortcuts.

    Deliberately avoids the sparse_core kernels so it can serve as an
    independent correctness check.
    """
    if y0.n_cols != net.width:
        raise ShapeError(f"input width {y0.n_cols} != network width {net.width}")
    if isinstance(y0, SparseMatrix):
        y = np.zeros((y0.n_rows, y0.n_cols))
        row_ids = np.repeat(np.arange(y0.n_rows), np.diff(y0.row_offsets))
        y[row_ids, y0.col_indices] = y0.values
    else:
        y = np.array(y0.data, dtype=np.float64)
    for w, b in zip(net.layers, net.biases):
        dense_w = np.zeros((w.n_rows, w.n_cols))
        row_ids = np.repeat(np.arange(w.n_rows), np.diff(w.row_offsets))
        dense_w[row_ids, w.col_indices] = w.values
        gate = np.any(y != 0, axis=1)
        z = y @ dense_w
        z[gate] += b.values
        y = np.minimum(np.maximum(z, 0.0), CLIP_MAX)
    return DenseBatch(y)


def verify(computed, truth):
    """Set equality of two sorted category lists."""
    return set(computed) == set(truth)


def compute_rate(n_ops, t_dnn):
    if t_dnn <= 0:
        raise ValueError(f"t_dnn must be positive, got {t_dnn}")
    return n_ops / t_dnn


def challenge_result(categories, t_dnn, n_inputs, n_connections, correct):
    n_ops = n_inputs * n_connections
    return ChallengeResult(tuple(categories), t_dnn, n_inputs, n_connections,
                           n_ops, compute_rate(n_ops, t_dnn), correct)


def result_record(result, n_neurons, n_layers, workers, representation, label=""):
    """JSON-lines record schema consumed by the performance model."""
    return {
        "n_neurons": n_neurons,
        "n_layers": n_layers,
        "n_inputs": result.n_inputs,
        "n_connections": result.n_connections,
        "n_ops": result.n_ops,
        "t_dnn_seconds": result.t_dnn,
        "rate": result.rate,
        "correct": result.correct,
        "workers": workers,
        "representation": representation,
        "label": label,
    }

"""Synthetic layered sparse network generator.

Layers are mixed-radix butterfly patterns (layer l exchanges digit l mod k of
the neuron index) expanded by a Kronecker product with an all-ones block.
Every neuron in layer l has fan-in and fan-out radices[l mod k] * kron_width,
and the product of the layer patterns over one full digit cycle is a constant
matrix: every input reaches every output through the same number of paths.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.sparse as sp

from .sparse_core import BiasVector, SparseMatrix

CHALLENGE_FAN_IN = 32


@dataclasses.dataclass(frozen=True)
class NetworkSpec:
    """Generation parameters. Width = prod(radices) * kron_width.

    weight_value/bias_value defaults keep a saturated neuron (32 active
    inputs at value 1) slightly positive: 32/16 - 0.3 = 1.7.
    """

    radices: tuple
    n_layers: int
    kron_width: int = 1
    weight_value: float = 0.0625
    bias_value: float = -0.30

    def __post_init__(self):
        object.__setattr__(self, "radices", tuple(int(r) for r in self.radices))
        if not self.radices or any(r < 2 for r in self.radices):
            raise ValueError(f"radices must be >= 2, got {self.radices}")
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.kron_width < 1:
            raise ValueError(f"kron_width must be >= 1, got {self.kron_width}")
        if self.weight_value == 0:
            raise ValueError("weight_value must be nonzero")

    @property
    def base_width(self):
        return math.prod(self.radices)

    @property
    def width(self):
        return self.base_width * self.kron_width

    def fan_in(self, layer):
        return self.radices[layer % len(self.radices)] * self.kron_width


@dataclasses.dataclass(frozen=True)
class LayeredNetwork:
    layers: tuple
    biases: tuple
    spec: NetworkSpec

    @property
    def width(self):
        # actual layer width; falls back to the spec for layer-free networks
        return self.layers[0].n_rows if self.layers else self.spec.width

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def n_connections(self):
        return sum(w.nnz for w in self.layers)


def butterfly_layer(radices, digit, n0=None, weight_value=1.0):
    """One butterfly layer over the given mixed-radix digit.

    Neuron j connects to j' iff their mixed-radix digit strings agree
    everywhere except at `digit` (radices[0] is the least significant digit).
    Each row and column gets exactly radices[digit] nonzeros.
    """
    radices = tuple(int(r) for r in radices)
    if not 0 <= digit < len(radices):
        raise ValueError(f"digit {digit} out of range for {len(radices)} radices")
    width = math.prod(radices)
    if n0 is not None and n0 != width:
        raise ValueError(f"n0={n0} does not match prod(radices)={width}")
    r = radices[digit]
    place = math.prod(radices[:digit])

    j = np.arange(width, dtype=np.int64)
    base = j - ((j // place) % r) * place
    cols = (base[:, None] + np.arange(r, dtype=np.int64) * place).ravel()
    offsets = np.arange(width + 1, dtype=np.int64) * r
    values = np.full(width * r, float(weight_value))
    return SparseMatrix(width, width, offsets, cols, values)


def kronecker_expand(layer, kron_width):
    """layer (x) all-ones block; nonzero values are preserved."""
    if kron_width < 1:
        raise ValueError(f"kron_width must be >= 1, got {kron_width}")
    if kron_width == 1:
        return layer
    block = np.ones((kron_width, kron_width))
    out = sp.kron(layer.to_scipy(), block, format="csr")
    out.sort_indices()
    return SparseMatrix.from_scipy(out)


def generate_network(spec):
    """Deterministic network from a spec: layer l uses digit l mod k."""
    k = len(spec.radices)
    layers = []
    for layer_idx in range(spec.n_layers):
        base = butterfly_layer(spec.radices, layer_idx % k,
                               weight_value=spec.weight_value)
        layers.append(kronecker_expand(base, spec.kron_width))
    bias = BiasVector(np.full(spec.width, spec.bias_value))
    return LayeredNetwork(tuple(layers), tuple(bias for _ in layers), spec)


def count_connections(n_layers, n_neurons):
    """Challenge connection count: 32 x layers x neurons."""
    if n_layers < 1 or n_neurons < 1:
        raise ValueError("n_layers and n_neurons must be positive")
    return CHALLENGE_FAN_IN * n_layers * n_neurons


def count_paths(net, from_layer, to_layer):
    """Path-count matrix between two layer boundaries (validation oracle).

    Entry (i, j) counts distinct paths from neuron i at boundary from_layer
    to neuron j at boundary to_layer through the binary layer patterns.
    """
    if not 0 <= from_layer < to_layer <= net.n_layers:
        raise ValueError(f"bad layer window [{from_layer}, {to_layer})")
    acc = None
    for w in net.layers[from_layer:to_layer]:
        pattern = w.to_scipy(np.int64)
        pattern.data[:] = 1
        acc = pattern if acc is None else acc @ pattern
    return np.asarray(acc.todense())


def validate_network(net):
    """Check squareness, degree regularity, and uniform weights; raise on failure."""
    n = net.width
    for layer_idx, w in enumerate(net.layers):
        if (w.n_rows, w.n_cols) != (n, n):
            raise ValueError(f"layer {layer_idx}: not {n}x{n}")
        expected = net.spec.fan_in(layer_idx)
        if not np.all(w.row_nnz() == expected):
            raise ValueError(f"layer {layer_idx}: row degree != {expected}")
        col_deg = np.bincount(w.col_indices, minlength=n)
        if not np.all(col_deg == expected):
            raise ValueError(f"layer {layer_idx}: column degree != {expected}")
        if not np.all(w.values == net.spec.weight_value):
            raise ValueError(f"layer {layer_idx}: non-uniform weight value")

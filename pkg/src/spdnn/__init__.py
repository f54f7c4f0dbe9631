"""Sparse DNN inference benchmark engine.

Synthetic layered-network generation, challenge file I/O, timed clipped-ReLU
inference with an independent correctness oracle, and power-law performance
modeling.
"""

from .sparse_core import (
    CLIP_MAX,
    BiasVector,
    DenseBatch,
    ShapeError,
    SparseMatrix,
    densify,
    layer_forward,
    nonzero_row_indicator,
    relu_clip,
    sparsify,
    spgemm,
    spmm_dense,
)
from .radixnet import (
    LayeredNetwork,
    NetworkSpec,
    butterfly_layer,
    count_connections,
    count_paths,
    generate_network,
    kronecker_expand,
    validate_network,
)
from .engine import (
    ChallengeResult,
    challenge_result,
    compute_rate,
    extract_categories,
    infer,
    oracle_infer,
    verify,
)
from .perfmodel import (
    PowerLawFit,
    TimingRecord,
    emit_report,
    fit_power_law,
    predict,
    reference_table,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

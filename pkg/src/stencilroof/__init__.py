"""Analytical toolkit answering: does a matrix unit speed up this stencil?

Builds stencil kernels, fuses them over time steps, quantifies the fusion
redundancy and operand-padding sparsity that tensor-core adaptation incurs,
and pins every strategy under an enhanced roofline model to classify the
workload and locate the acceleration sweet spot.  A brute-force simulator
validates the counting claims.
"""

from .kernels import (
    FusedKernel,
    Kernel,
    SupportCapExceeded,
    box_redundancy_exact,
    fuse,
    fused_point_count,
    fusion_redundancy,
    fusion_redundancy_exact,
    make_kernel,
    point_count,
)
from .roofline import (
    DTYPES,
    DataTypeSpec,
    RooflinePoint,
    ScenarioReport,
    WorkloadMetrics,
    analyze,
    attainable,
    classify_scenario,
    cuda_metrics,
    in_sweet_spot,
    min_fusion_depth,
    single_step_metrics,
    sparse_tensor_point,
    speedup_ratio,
    stencil_rate,
    tensor_actual,
    tensor_metrics,
)
from .simulator import (
    EquivalenceReport,
    ExecutionTally,
    Grid,
    equivalence_check,
    run_fused,
    run_iterated,
)
from .transform import (
    MMA_DOUBLE,
    MMA_FLOAT,
    MmaShape,
    SparseCheckReport,
    TransformScheme,
    TransformedOperands,
    build_operands,
    check_2to4,
    compress_2to4,
    decompress_2to4,
    effective_ops,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

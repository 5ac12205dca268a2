"""Enhanced roofline model for stencils on CUDA, tensor and sparse units.

Per output point, a K-point stencil performs C = 2K flops (one multiply-add
per neighbor) against M = 2D bytes of compulsory traffic, giving intensity
I = K/D.  Temporal fusion over t steps scales C by t while M stays fixed.
Mapping onto matrix units additionally inflates the executed work by the
fusion redundancy (enlarged fused support) divided by the operand sparsity
(zero padding), so the matrix-unit intensity is t * (redundancy/sparsity)
* K/D and only the sparsity/redundancy fraction of the attained rate is
useful output.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

MEMORY = "memory"
COMPUTE = "compute"

UNIT_CUDA = "cuda"
UNIT_TENSOR = "tensor"
UNIT_SPARSE = "sparse_tensor"

VERDICT_ACCELERATE = "accelerate"
VERDICT_DEGRADE = "degrade"
VERDICT_NEUTRAL = "neutral"

#: Speedup ratios inside this closed band report a neutral verdict.
DEFAULT_NEUTRAL_BAND = (0.9, 1.1)

VALID_DTYPE_SIZES = (2, 4, 8)


@dataclass(frozen=True)
class DataTypeSpec:
    name: str
    size: int

    def __post_init__(self):
        if self.size not in VALID_DTYPE_SIZES:
            raise ValueError(f"dtype size must be one of {VALID_DTYPE_SIZES}, got {self.size}")


DTYPES = {
    "half": DataTypeSpec("half", 2),
    "float": DataTypeSpec("float", 4),
    "double": DataTypeSpec("double", 8),
}


@dataclass(frozen=True)
class WorkloadMetrics:
    """Per-output-point flops, bytes and intensity for one strategy."""

    flops: float
    bytes_moved: float
    intensity: float


@dataclass(frozen=True)
class RooflinePoint:
    """A workload pinned under a roofline: raw ceiling and useful rate."""

    intensity: float
    ridge: float
    p_raw: float
    p_actual: float
    bound: str


def _check_positive(**values):
    for name, v in values.items():
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")


def _metrics(flops: float, dtype_size: int) -> WorkloadMetrics:
    # bytes_moved is always a power of two (dtype sizes are 2/4/8), so the
    # division is exact and intensity * bytes_moved == flops holds exactly
    bytes_moved = 2.0 * dtype_size
    return WorkloadMetrics(flops=flops, bytes_moved=bytes_moved, intensity=flops / bytes_moved)


def single_step_metrics(points: int, dtype_size: int) -> WorkloadMetrics:
    """Unfused stencil: C = 2K, M = 2D, I = K/D."""
    _check_positive(points=points, dtype_size=dtype_size)
    return _metrics(2.0 * points, dtype_size)


def cuda_metrics(points: int, dtype_size: int, steps: int) -> WorkloadMetrics:
    """Temporally fused scalar-unit stencil: C = 2Kt, M = 2D, I = tK/D.

    Intermediate steps stay on chip, so traffic is independent of depth.
    """
    _check_positive(points=points, dtype_size=dtype_size, steps=steps)
    return _metrics(2.0 * points * steps, dtype_size)


def tensor_metrics(
    points: int, dtype_size: int, steps: int, redundancy: float, sparsity: float
) -> WorkloadMetrics:
    """Kernel-fused matrix-unit stencil: work inflated by redundancy/sparsity."""
    _check_positive(points=points, dtype_size=dtype_size, steps=steps)
    if redundancy < 1:
        raise ValueError(f"redundancy must be >= 1, got {redundancy}")
    if not (0.0 < sparsity <= 1.0):
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    return _metrics(2.0 * points * steps * redundancy / sparsity, dtype_size)


def attainable(metrics: WorkloadMetrics, peak: float, bandwidth: float) -> RooflinePoint:
    """Pin a workload under a roofline: P = min(peak, bandwidth * I).

    At the ridge point exactly, the workload classifies as compute-bound
    (the attained rate is identical either way; classification must still
    be deterministic).  p_actual defaults to p_raw; matrix-unit callers
    normalize it afterwards.
    """
    _check_positive(peak=peak, bandwidth=bandwidth)
    ridge = peak / bandwidth
    p_raw = min(peak, bandwidth * metrics.intensity)
    bound = MEMORY if metrics.intensity < ridge else COMPUTE
    return RooflinePoint(
        intensity=metrics.intensity, ridge=ridge, p_raw=p_raw, p_actual=p_raw, bound=bound
    )


def tensor_actual(point: RooflinePoint, redundancy: float, sparsity: float) -> RooflinePoint:
    """Discount a matrix-unit point to its useful-output rate.

    Only sparsity/redundancy of the attained flops produce output; scalar
    units carry no such overhead and keep p_actual == p_raw.
    """
    if redundancy < 1:
        raise ValueError(f"redundancy must be >= 1, got {redundancy}")
    if not (0.0 < sparsity <= 1.0):
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    return replace(point, p_actual=(sparsity / redundancy) * point.p_raw)


def sparse_tensor_point(
    metrics: WorkloadMetrics,
    peak_sparse: Optional[float],
    bandwidth: float,
    redundancy: float,
    sparsity: float,
) -> RooflinePoint:
    """Roofline point on the sparse matrix unit.

    The 2:4 format leaves the theoretical intensity unchanged; only the
    ceiling rises to the sparse peak.
    """
    if peak_sparse is None:
        raise ValueError("hardware profile provides no sparse matrix-unit peak")
    return tensor_actual(attainable(metrics, peak_sparse, bandwidth), redundancy, sparsity)


def classify_scenario(cu_point: RooflinePoint, tc_point: RooflinePoint) -> int:
    """Four orthogonal scenarios from the (scalar, matrix) bound pair."""
    table = {
        (MEMORY, MEMORY): 1,
        (MEMORY, COMPUTE): 2,
        (COMPUTE, MEMORY): 3,
        (COMPUTE, COMPUTE): 4,
    }
    return table[(cu_point.bound, tc_point.bound)]


def speedup_ratio(
    cu_point: RooflinePoint,
    tc_point: RooflinePoint,
    redundancy: float,
    sparsity: float,
) -> float:
    """Useful matrix-unit rate over the scalar-unit rate.

    Evaluated per scenario in simplified form so the structural facts hold
    exactly in floating point: both memory-bound gives identically 1 (the
    overhead cancels against the inflated intensity), memory-to-compute is
    strictly below 1, compute-to-memory strictly above 1, and
    compute-to-compute reduces to (sparsity/redundancy) * peak ratio.
    """
    scenario = classify_scenario(cu_point, tc_point)
    if scenario == 1:
        return 1.0
    if scenario == 3:
        # overheads cancel: useful matrix-unit rate is bandwidth * scalar intensity
        bandwidth = tc_point.p_raw / tc_point.intensity
        return bandwidth * cu_point.intensity / cu_point.p_raw
    # scenarios 2 and 4: the matrix unit sits at its ceiling (p_raw = peak)
    return (sparsity / redundancy) * tc_point.p_raw / cu_point.p_raw


def in_sweet_spot(
    redundancy: float,
    sparsity: float,
    peak_tc: float,
    peak_cuda: float,
    scenario: int,
) -> bool:
    """Whether the matrix unit beats the scalar roofline.

    Scenario 3 always qualifies (the ceiling is broken); scenario 4 requires
    redundancy < sparsity * peak_tc / peak_cuda; scenarios 1-2 never qualify.
    """
    if scenario not in (1, 2, 3, 4):
        raise ValueError(f"scenario must be 1..4, got {scenario}")
    if scenario in (1, 2):
        return False
    if scenario == 3:
        return True
    return redundancy < sparsity * peak_tc / peak_cuda


def min_fusion_depth(points: int, dtype_size: int, peak_cuda: float, bandwidth: float) -> int:
    """Smallest depth t with t * K / D at or past the scalar ridge point."""
    _check_positive(points=points, dtype_size=dtype_size, peak_cuda=peak_cuda, bandwidth=bandwidth)
    ridge = peak_cuda / bandwidth
    return max(1, math.ceil(ridge * dtype_size / points))


def stencil_rate(p_actual: float, points: int) -> float:
    """Useful flops/sec converted to grid-point updates/sec.

    One update costs 2K flops of useful work regardless of fusion depth, so
    the rate is p_actual / (2K).  This is a model upper bound, not a
    measurement.
    """
    _check_positive(points=points)
    return p_actual / (2.0 * points)


@dataclass
class UnitResult:
    """One execution unit's roofline placement within a report."""

    unit: str
    point: RooflinePoint
    rate_bound: float  # updates/sec, model upper bound


@dataclass
class ScenarioReport:
    """Full comparison of scalar vs matrix execution for one configuration."""

    scenario: int
    cu: UnitResult
    tc: UnitResult
    tc_unit: str
    speedup_ratio: float
    sweet_spot: bool
    verdict: str
    recommendation: str
    points: int
    fused_points: int
    dtype_size: int
    steps: int
    redundancy: float
    sparsity: float
    extra_units: dict


def analyze(
    points: int,
    dtype_size: int,
    steps: int,
    redundancy: float,
    sparsity: float,
    bandwidth: float,
    peak_cuda: float,
    peak_tensor: Optional[float] = None,
    peak_sparse: Optional[float] = None,
    tc_unit: str = UNIT_TENSOR,
    fused_points: Optional[int] = None,
    neutral_band: tuple = DEFAULT_NEUTRAL_BAND,
) -> ScenarioReport:
    """Build the full scenario report for one stencil configuration.

    ``tc_unit`` selects which matrix unit the scenario comparison targets;
    every unit with a peak supplied still appears in ``extra_units`` and
    competes for the recommendation (ties resolve toward the scalar unit,
    the simpler deployment).
    """
    cu_m = cuda_metrics(points, dtype_size, steps)
    tc_m = tensor_metrics(points, dtype_size, steps, redundancy, sparsity)
    cu_point = attainable(cu_m, peak_cuda, bandwidth)

    candidates = {}
    if peak_tensor is not None:
        candidates[UNIT_TENSOR] = tensor_actual(
            attainable(tc_m, peak_tensor, bandwidth), redundancy, sparsity
        )
    if peak_sparse is not None:
        candidates[UNIT_SPARSE] = sparse_tensor_point(
            tc_m, peak_sparse, bandwidth, redundancy, sparsity
        )
    if tc_unit not in candidates:
        raise ValueError(f"no peak supplied for comparison unit {tc_unit!r}")
    tc_point = candidates[tc_unit]
    comparison_peak = peak_sparse if tc_unit == UNIT_SPARSE else peak_tensor

    scenario = classify_scenario(cu_point, tc_point)
    ratio = speedup_ratio(cu_point, tc_point, redundancy, sparsity)
    sweet = in_sweet_spot(redundancy, sparsity, comparison_peak, peak_cuda, scenario)

    lo, hi = neutral_band
    if lo <= ratio <= hi:
        verdict = VERDICT_NEUTRAL
    elif ratio > hi:
        verdict = VERDICT_ACCELERATE
    else:
        verdict = VERDICT_DEGRADE

    rates = {UNIT_CUDA: stencil_rate(cu_point.p_actual, points)}
    for unit, pt in candidates.items():
        rates[unit] = stencil_rate(pt.p_actual, points)
    best = UNIT_CUDA
    for unit, rate in rates.items():
        if rate > rates[best]:
            best = unit

    return ScenarioReport(
        scenario=scenario,
        cu=UnitResult(UNIT_CUDA, cu_point, rates[UNIT_CUDA]),
        tc=UnitResult(tc_unit, tc_point, rates[tc_unit]),
        tc_unit=tc_unit,
        speedup_ratio=ratio,
        sweet_spot=sweet,
        verdict=verdict,
        recommendation=best,
        points=points,
        fused_points=fused_points if fused_points is not None else points,
        dtype_size=dtype_size,
        steps=steps,
        redundancy=redundancy,
        sparsity=sparsity,
        extra_units={u: UnitResult(u, p, rates[u]) for u, p in candidates.items()},
    )

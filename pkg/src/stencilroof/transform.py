"""Mapping stencil kernels onto matrix-multiply-accumulate operands.

Models the two common adaptation schemes (flattening and decomposition),
the zero padding forced by fixed MMA tile sizes, the resulting sparsity of
the operand matrix, and the 2:4 structured-sparsity format used by sparse
matrix units.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

SCHEME_KINDS = ("flattening", "decomposition")


@dataclass(frozen=True)
class MmaShape:
    """Matrix-tile dimensions of one MMA instruction."""

    m: int
    n: int
    k: int

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise ValueError(f"MMA dimensions must be >= 1, got {self!r}")


#: Native instruction shapes on current NVIDIA parts.
MMA_DOUBLE = MmaShape(8, 8, 4)
MMA_FLOAT = MmaShape(16, 8, 16)

#: Default for the decomposition scheme: per-line vectors keep their natural
#: reduction length (k=1 means no reduction-axis padding), so the reported
#: sparsity models only the operand-height constraint.  Pass an explicit
#: instruction shape to model reduction padding as well.
MMA_DECOMPOSITION_DEFAULT = MmaShape(8, 8, 1)


@dataclass(frozen=True)
class TransformScheme:
    kind: str
    mma: MmaShape
    sparsity_override: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}, expected {SCHEME_KINDS}")
        if self.sparsity_override is not None and not (0.0 < self.sparsity_override <= 1.0):
            raise ValueError(
                f"sparsity override must lie in (0, 1], got {self.sparsity_override}"
            )


def flattening_scheme(mma: MmaShape = MMA_DOUBLE, sparsity_override=None) -> TransformScheme:
    return TransformScheme("flattening", mma, sparsity_override)


def decomposition_scheme(
    mma: MmaShape = MMA_DECOMPOSITION_DEFAULT, sparsity_override=None
) -> TransformScheme:
    return TransformScheme("decomposition", mma, sparsity_override)


@dataclass
class TransformedOperands:
    """The padded kernel operand matrix and its structural sparsity."""

    rows: int
    cols: int
    nonzeros: int
    sparsity: float
    scheme: TransformScheme
    matrix: np.ndarray
    unpadded_rows: int
    unpadded_cols: int

    def sparsity_fraction(self) -> Fraction:
        """Exact structural sparsity; ignores any override."""
        return Fraction(self.nonzeros, self.rows * self.cols)


def _pad_up(value: int, multiple: int) -> int:
    return -(-value // multiple) * multiple


def build_operands(kernel, scheme: TransformScheme) -> TransformedOperands:
    """Construct the scheme's operand matrix for a (possibly fused) kernel.

    Flattening linearizes the whole support along the reduction axis: one
    row variant per distinct output alignment along the leading axis, each
    carrying all K structural weights.  Decomposition emits one row per
    occupied line along the trailing axis.  Rows pad up to a multiple of
    mma.m and columns to a multiple of mma.k with structural zeros; padding
    zeros count in the sparsity denominator.

    With ``sparsity_override`` set, the reported sparsity is the override
    (authoritative when reproducing published implementations) while the
    constructed matrix is retained for inspection.
    """
    entries = kernel.entries
    if not entries:
        raise ValueError("cannot transform an empty kernel")
    dims = kernel.dims

    if scheme.kind == "flattening":
        lo = min(off[0] for off in entries)
        hi = max(off[0] for off in entries)
        nat_rows = hi - lo + 1
        order = sorted(entries)
        nat_cols = len(order)
        unpadded = np.zeros((nat_rows, nat_cols))
        weights = np.array([entries[off] for off in order])
        unpadded[:] = weights  # each row variant holds the full kernel
        structural_per_row = nat_cols
        nonzeros = nat_rows * structural_per_row
    else:
        if dims < 2:
            raise ValueError("decomposition requires kernel dims >= 2")
        lo = min(off[-1] for off in entries)
        hi = max(off[-1] for off in entries)
        nat_cols = hi - lo + 1
        lines = {}
        for off in sorted(entries):
            lines.setdefault(off[:-1], []).append(off)
        nat_rows = len(lines)
        unpadded = np.zeros((nat_rows, nat_cols))
        for row, (_, offs) in enumerate(sorted(lines.items())):
            for off in offs:
                unpadded[row, off[-1] - lo] = entries[off]
        nonzeros = len(entries)

    rows = _pad_up(nat_rows, scheme.mma.m)
    cols = _pad_up(nat_cols, scheme.mma.k)
    matrix = np.zeros((rows, cols))
    matrix[:nat_rows, :nat_cols] = unpadded

    if scheme.sparsity_override is not None:
        sparsity = float(scheme.sparsity_override)
    else:
        sparsity = nonzeros / (rows * cols)
    return TransformedOperands(
        rows=rows,
        cols=cols,
        nonzeros=nonzeros,
        sparsity=sparsity,
        scheme=scheme,
        matrix=matrix,
        unpadded_rows=nat_rows,
        unpadded_cols=nat_cols,
    )


def effective_ops(ideal_flops: float, sparsity: float) -> float:
    """Operations actually executed when a fraction ``sparsity`` is useful."""
    if not (0.0 < sparsity <= 1.0):
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    if ideal_flops < 0:
        raise ValueError("ideal_flops must be non-negative")
    return ideal_flops / sparsity


def operands_to_csv(operands: TransformedOperands) -> str:
    """Row-major CSV of the padded operand matrix, structural zeros as 0."""
    lines = []
    for row in operands.matrix:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class SparseCheckReport:
    satisfies_2to4: bool
    violating_groups: list
    compressed_cols: Optional[int]
    padded_cols: int


@dataclass
class Compressed2to4:
    """Packed 2:4 representation: two values plus their lane index per group."""

    values: np.ndarray
    positions: np.ndarray
    cols: int


def _rows_to_array(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D row matrix, got {arr.ndim} dims")
    return arr


def _pad_rows_to_quad(arr: np.ndarray) -> np.ndarray:
    cols = arr.shape[1]
    padded = _pad_up(cols, 4)
    if padded == cols:
        return arr
    out = np.zeros((arr.shape[0], padded))
    out[:, :cols] = arr
    return out


def check_2to4(rows) -> SparseCheckReport:
    """Flag every 4-wide group holding more than two nonzeros.

    Rows with lengths not divisible by 4 are padded with structural zeros
    first; the padded width is reported.
    """
    arr = _pad_rows_to_quad(_rows_to_array(rows))
    violations = []
    for r in range(arr.shape[0]):
        for g in range(0, arr.shape[1], 4):
            if np.count_nonzero(arr[r, g:g + 4]) > 2:
                violations.append((r, g))
    ok = not violations
    return SparseCheckReport(
        satisfies_2to4=ok,
        violating_groups=violations,
        compressed_cols=arr.shape[1] // 2 if ok else None,
        padded_cols=arr.shape[1],
    )


def compress_2to4(rows) -> Compressed2to4:
    """Pack a 2:4-valid matrix into per-group value pairs plus positions.

    Groups with fewer than two nonzeros keep their nonzeros and fill the
    remaining slot(s) with zero at the smallest unused lane, so the all-zero
    group canonically compresses to values (0, 0) at lanes (0, 1).  This
    makes compression deterministic and the round trip exact.
    """
    arr = _pad_rows_to_quad(_rows_to_array(rows))
    report = check_2to4(arr)
    if not report.satisfies_2to4:
        raise ValueError(
            f"matrix violates the 2:4 constraint at groups {report.violating_groups}; "
            "restructure before compressing"
        )
    n_groups = arr.shape[1] // 4
    values = np.zeros((arr.shape[0], 2 * n_groups))
    positions = np.zeros((arr.shape[0], 2 * n_groups), dtype=np.int8)
    for r in range(arr.shape[0]):
        for g in range(n_groups):
            group = arr[r, 4 * g:4 * g + 4]
            kept = [int(i) for i in np.flatnonzero(group)]
            lane = 0
            while len(kept) < 2:
                if lane not in kept:
                    kept.append(lane)
                lane += 1
            kept.sort()
            for slot, pos in enumerate(kept):
                values[r, 2 * g + slot] = group[pos]
                positions[r, 2 * g + slot] = pos
    return Compressed2to4(values=values, positions=positions, cols=arr.shape[1])


def decompress_2to4(compressed: Compressed2to4) -> np.ndarray:
    out = np.zeros((compressed.values.shape[0], compressed.cols))
    n_groups = compressed.cols // 4
    for r in range(out.shape[0]):
        for g in range(n_groups):
            for slot in range(2):
                pos = int(compressed.positions[r, 2 * g + slot])
                out[r, 4 * g + pos] = compressed.values[r, 2 * g + slot]
    return out

"""Desk-scale reference executor for stencil kernels.

Runs a kernel either step by step or as one fused application on a periodic
grid and tallies floating-point work and ideal (compulsory) memory traffic.
Periodic boundaries keep iterated-vs-fused equivalence exact and avoid halo
bookkeeping, which the analytical model deliberately ignores.

Determinism: each output point accumulates its weighted neighbors in
offset-lexicographic order, so results are bitwise reproducible for a given
grid and kernel regardless of how callers parallelize over configurations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .kernels import FusedKernel, Kernel, fuse

_MAGIC = b"SGRD"
_DTYPE_CODES = {8: "<f8", 4: "<f4"}


@dataclass
class Grid:
    """A periodic d-dimensional grid of real values."""

    values: np.ndarray
    boundary: str = "periodic"

    def __post_init__(self):
        if self.boundary != "periodic":
            raise ValueError(f"unsupported boundary {self.boundary!r}; only 'periodic'")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim < 1:
            raise ValueError("grid must have at least one dimension")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def dims(self) -> int:
        return self.values.ndim

    @property
    def extents(self) -> tuple:
        return self.values.shape


@dataclass
class ExecutionTally:
    """Operation and ideal-traffic counts for one run."""

    flops: int
    ideal_reads: int
    ideal_writes: int
    points_updated: int


@dataclass
class EquivalenceReport:
    max_rel_error: float
    passed: bool
    tally_iterated: ExecutionTally
    tally_fused: ExecutionTally


def _check_extents(grid: Grid, max_offsets: tuple, steps: int) -> None:
    """Require extent >= 2 * reach * steps + 1 per axis (no self-wrap)."""
    for axis, (extent, reach) in enumerate(zip(grid.extents, max_offsets)):
        needed = 2 * reach * steps + 1
        if extent < needed:
            raise ValueError(
                f"grid extent {extent} along axis {axis} is below the "
                f"minimum {needed} for this kernel and fusion depth"
            )


def _apply_once(values: np.ndarray, entries: dict) -> np.ndarray:
    out = np.zeros_like(values)
    axes = tuple(range(values.ndim))
    for off in sorted(entries):
        w = entries[off]
        out += w * np.roll(values, shift=tuple(-c for c in off), axis=axes)
    return out


def _ideal_traffic(grid: Grid) -> int:
    # One compulsory read and one write per point per fused chain.
    return grid.values.size * grid.values.itemsize


def run_iterated(grid: Grid, kernel: Kernel, steps: int):
    """Apply ``kernel`` ``steps`` times sequentially.

    Returns the resulting grid and a tally with flops = 2 * K * N * steps.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if kernel.dims != grid.dims:
        raise ValueError(f"kernel dims {kernel.dims} != grid dims {grid.dims}")
    _check_extents(grid, kernel.max_offset_per_axis(), steps)
    values = grid.values
    for _ in range(steps):
        values = _apply_once(values, kernel.entries)
    n = grid.values.size
    tally = ExecutionTally(
        flops=2 * kernel.point_count * n * steps,
        ideal_reads=_ideal_traffic(grid),
        ideal_writes=_ideal_traffic(grid),
        points_updated=n,
    )
    return Grid(values), tally


def run_fused(grid: Grid, fused: FusedKernel):
    """Apply a fused kernel once; flops = 2 * K_fused * N.

    Every structural entry counts as one multiply-add even when its numeric
    weight is zero: the fused operand carries those slots.
    """
    if fused.dims != grid.dims:
        raise ValueError(f"kernel dims {fused.dims} != grid dims {grid.dims}")
    _check_extents(grid, fused.max_offset_per_axis(), 1)
    values = _apply_once(grid.values, fused.entries)
    n = grid.values.size
    tally = ExecutionTally(
        flops=2 * fused.point_count * n,
        ideal_reads=_ideal_traffic(grid),
        ideal_writes=_ideal_traffic(grid),
        points_updated=n,
    )
    return Grid(values), tally


def equivalence_check(
    grid: Grid, kernel: Kernel, steps: int, tolerance: float = 1e-10
) -> EquivalenceReport:
    """Run both strategies on copies of ``grid`` and compare element-wise.

    The relative error denominator falls back to 1e-300 so zero reference
    values cannot divide by zero.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    iterated, tally_it = run_iterated(grid, kernel, steps)
    fused_kernel = fuse(kernel, steps)
    fused, tally_fu = run_fused(grid, fused_kernel)
    denom = np.maximum(np.abs(iterated.values), 1e-300)
    max_rel = float(np.max(np.abs(fused.values - iterated.values) / denom))
    return EquivalenceReport(
        max_rel_error=max_rel,
        passed=max_rel <= tolerance,
        tally_iterated=tally_it,
        tally_fused=tally_fu,
    )


def save_grid(grid: Grid, path) -> None:
    """Write a grid as flat little-endian binary with a small header."""
    code = grid.values.itemsize
    if code not in _DTYPE_CODES:
        raise ValueError(f"unsupported element size {code}")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", grid.dims, code))
        fh.write(struct.pack(f"<{grid.dims}Q", *grid.extents))
        fh.write(np.ascontiguousarray(grid.values, dtype=_DTYPE_CODES[code]).tobytes())


def load_grid(path) -> Grid:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a grid file (bad magic {magic!r})")
        dims, code = struct.unpack("<II", fh.read(8))
        if code not in _DTYPE_CODES:
            raise ValueError(f"{path}: unsupported element size {code}")
        extents = struct.unpack(f"<{dims}Q", fh.read(8 * dims))
        data = np.frombuffer(fh.read(), dtype=_DTYPE_CODES[code])
    expected = int(np.prod(extents))
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} values, found {data.size}")
    return Grid(data.reshape(extents).astype(np.float64))


def grid_to_csv(grid: Grid, path) -> None:
    """CSV export for small 1D/2D grids (row-major)."""
    if grid.dims > 2:
        raise ValueError("CSV export supports 1D and 2D grids only")
    rows = grid.values.reshape(1, -1) if grid.dims == 1 else grid.values
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def grid_from_csv(path) -> Grid:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: empty grid")
    arr = np.array(rows, dtype=np.float64)
    return Grid(arr[0] if arr.shape[0] == 1 else arr)

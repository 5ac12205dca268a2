"""Stencil kernel algebra: construction, temporal fusion, redundancy.

A stencil kernel is a finite map from integer grid offsets to real weights.
Applying a linear kernel ``steps`` times is equivalent to one application of
its ``steps``-fold discrete self-convolution, so fusing time steps is kernel
self-convolution.  The fused support is tracked combinatorially (Minkowski
sum of supports), never by thresholding numeric weights: an analytic
cancellation must not shrink the structural point count.

Kernels are immutable values and every function here is pure, so concurrent
use needs no coordination.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np
from scipy.signal import convolve

Offset = tuple  # tuple[int, ...] of length == kernel dims

#: Refuse to enumerate fused supports whose bounding volume exceeds this.
DEFAULT_SUPPORT_CAP = 100_000_000

KERNEL_SHAPES = ("box", "star", "custom")


class SupportCapExceeded(ValueError):
    """Fused support bounding volume exceeds the enumeration cap."""


@dataclass(frozen=True)
class Kernel:
    """A stencil pattern: dimensionality, shape tag, radius and weight map.

    ``entries`` maps each offset (a length-``dims`` tuple of ints) to its
    real weight.  The structural support is the key set; weights may be
    numerically zero without leaving the support.
    """

    dims: int
    shape: str
    radius: int
    entries: dict = field(repr=False)

    @property
    def point_count(self) -> int:
        return len(self.entries)

    def max_offset_per_axis(self) -> tuple:
        """Largest absolute coordinate per axis, e.g. (r, r) for a 2D box."""
        return tuple(
            max(abs(off[axis]) for off in self.entries) for axis in range(self.dims)
        )


@dataclass(frozen=True)
class FusedKernel:
    """Result of fusing ``steps`` applications of ``base`` into one kernel."""

    base: Kernel
    steps: int
    entries: dict = field(repr=False)

    @property
    def point_count(self) -> int:
        return len(self.entries)

    @property
    def dims(self) -> int:
        return self.base.dims

    def max_offset_per_axis(self) -> tuple:
        return tuple(
            max(abs(off[axis]) for off in self.entries) for axis in range(self.dims)
        )


def _box_support(dims: int, radius: int) -> list:
    return list(itertools.product(range(-radius, radius + 1), repeat=dims))


def _star_support(dims: int, radius: int) -> list:
    offsets = [(0,) * dims]
    for axis in range(dims):
        for step in range(1, radius + 1):
            for sign in (-1, 1):
                off = [0] * dims
                off[axis] = sign * step
                offsets.append(tuple(off))
    return offsets


def make_kernel(
    shape: str,
    dims: int,
    radius: int = 1,
    weights: Optional[Mapping] = None,
) -> Kernel:
    """Construct a stencil kernel.

    Args:
        shape: "box", "star" or "custom".
        dims: grid dimensionality, >= 1.
        radius: neighborhood radius, >= 1 (ignored for "custom").
        weights: offset -> weight map.  Required for "custom"; for box/star
            it must cover the shape's support exactly.  When omitted, every
            point gets the normalized default weight 1/K.

    Raises:
        ValueError: unknown shape tag, non-positive dims/radius, or a weight
            map whose support does not match the requested shape.
    """
    if shape not in KERNEL_SHAPES:
        raise ValueError(f"unknown kernel shape {shape!r}, expected one of {KERNEL_SHAPES}")
    if dims < 1:
        raise ValueError(f"kernel dims must be >= 1, got {dims}")

    if shape == "custom":
        if not weights:
            raise ValueError("custom kernels require an explicit weight map")
        entries = {}
        for off, w in weights.items():
            off = tuple(int(c) for c in off)
            if len(off) != dims:
                raise ValueError(f"offset {off} has length {len(off)}, expected {dims}")
            if not math.isfinite(w):
                raise ValueError(f"weight for offset {off} is not finite")
            if off in entries:
                raise ValueError(f"duplicate offset {off}")
            entries[off] = float(w)
        radius = max((max(abs(c) for c in off) for off in entries), default=0)
        return Kernel(dims=dims, shape=shape, radius=radius, entries=entries)

    if radius < 1:
        raise ValueError(f"kernel radius must be >= 1, got {radius}")

    support = _box_support(dims, radius) if shape == "box" else _star_support(dims, radius)
    if weights is None:
        default = 1.0 / len(support)
        entries = {off: default for off in support}
    else:
        given = {tuple(int(c) for c in off): float(w) for off, w in weights.items()}
        if set(given) != set(support):
            missing = set(support) - set(given)
            extra = set(given) - set(support)
            raise ValueError(
                f"weight map does not match {shape} support "
                f"(missing {len(missing)}, extraneous {len(extra)} offsets)"
            )
        for off, w in given.items():
            if not math.isfinite(w):
                raise ValueError(f"weight for offset {off} is not finite")
        entries = given
    return Kernel(dims=dims, shape=shape, radius=radius, entries=entries)


def point_count(kernel) -> int:
    """Number of structural points K in a kernel's support."""
    return len(kernel.entries)


def _to_arrays(kernel: Kernel):
    """Dense weight / indicator arrays plus the grid coordinate of index 0."""
    mins = tuple(min(off[a] for off in kernel.entries) for a in range(kernel.dims))
    maxs = tuple(max(off[a] for off in kernel.entries) for a in range(kernel.dims))
    extent = tuple(hi - lo + 1 for lo, hi in zip(mins, maxs))
    weights = np.zeros(extent, dtype=np.float64)
    indicator = np.zeros(extent, dtype=np.float64)
    for off, w in kernel.entries.items():
        idx = tuple(c - lo for c, lo in zip(off, mins))
        weights[idx] = w
        indicator[idx] = 1.0
    return weights, indicator, np.array(mins, dtype=np.int64)


def _check_cap(kernel: Kernel, steps: int, cap: int) -> None:
    mins = tuple(min(off[a] for off in kernel.entries) for a in range(kernel.dims))
    maxs = tuple(max(off[a] for off in kernel.entries) for a in range(kernel.dims))
    volume = 1
    for lo, hi in zip(mins, maxs):
        volume *= steps * (hi - lo) + 1
    if volume > cap:
        raise SupportCapExceeded(
            f"fused support bounding volume {volume} exceeds cap {cap} "
            f"(steps={steps})"
        )


def _self_convolve(kernel: Kernel, steps: int, with_weights: bool):
    """steps-fold self-convolution by exponentiation-by-squaring.

    Support indicators are re-binarized after every product so counts never
    overflow and the support stays the exact Minkowski sum.  Thresholding at
    0.5 is exact even under FFT convolution: true entries are integers >= 1
    while FFT round-off is bounded well below 0.5 at any size under the
    enumeration cap.
    """
    weights, indicator, origin = _to_arrays(kernel)
    acc = None  # (weights|None, indicator, origin)
    base = (weights if with_weights else None, indicator, origin)
    e = steps
    while e:
        if e & 1:
            if acc is None:
                acc = base
            else:
                acc = _product(acc, base, with_weights)
        e >>= 1
        if e:
            base = _product(base, base, with_weights)
    return acc


def _product(a, b, with_weights: bool):
    wa, ia, oa = a
    wb, ib, ob = b
    ind = convolve(ia, ib, method="auto")
    ind = (ind > 0.5).astype(np.float64)
    w = convolve(wa, wb, method="auto") if with_weights else None
    return w, ind, oa + ob


def fused_point_count(kernel: Kernel, steps: int, max_cells: int = DEFAULT_SUPPORT_CAP) -> int:
    """Structural point count of the steps-fold fused kernel, by enumeration."""
    if steps < 1:
        raise ValueError(f"fusion depth must be >= 1, got {steps}")
    if steps == 1:
        return kernel.point_count
    _check_cap(kernel, steps, max_cells)
    _, ind, _ = _self_convolve(kernel, steps, with_weights=False)
    return int(ind.sum())


def fuse(kernel: Kernel, steps: int, max_cells: int = DEFAULT_SUPPORT_CAP) -> FusedKernel:
    """Fuse ``steps`` time steps into one kernel by self-convolution.

    The returned entries carry the convolved numeric weights on the
    combinatorial support; offsets whose weight cancels to zero stay present.
    """
    if steps < 1:
        raise ValueError(f"fusion depth must be >= 1, got {steps}")
    if steps == 1:
        return FusedKernel(base=kernel, steps=1, entries=dict(kernel.entries))
    _check_cap(kernel, steps, max_cells)
    w, ind, origin = _self_convolve(kernel, steps, with_weights=True)
    entries = {}
    for idx in np.argwhere(ind > 0.5):
        off = tuple(int(c) for c in (idx + origin))
        entries[off] = float(w[tuple(idx)])
    return FusedKernel(base=kernel, steps=steps, entries=entries)


def fusion_redundancy_exact(
    kernel: Kernel, steps: int, max_cells: int = DEFAULT_SUPPORT_CAP
) -> Fraction:
    """Extra work of fused over sequential execution, K_fused / (steps * K)."""
    return Fraction(fused_point_count(kernel, steps, max_cells), steps * kernel.point_count)


def fusion_redundancy(kernel: Kernel, steps: int, max_cells: int = DEFAULT_SUPPORT_CAP) -> float:
    return float(fusion_redundancy_exact(kernel, steps, max_cells))


def box_redundancy_exact(dims: int, radius: int, steps: int) -> Fraction:
    """Closed form of the fusion redundancy for box kernels.

    A box of radius r fused over t steps spans a box of radius r*t, so the
    ratio is (2rt+1)^d / (t * (2r+1)^d).  Valid for box shapes only; other
    shapes must be enumerated.
    """
    if dims < 1 or radius < 1 or steps < 1:
        raise ValueError("dims, radius and steps must all be >= 1")
    return Fraction((2 * radius * steps + 1) ** dims, steps * (2 * radius + 1) ** dims)


def has_symmetric_support(entries: Mapping) -> bool:
    """True when the support is centrally symmetric (off in S <=> -off in S)."""
    support = set(entries)
    return all(tuple(-c for c in off) in support for off in support)


def load_weights_csv(path, dims: int) -> dict:
    """Read a kernel weight map from CSV rows of ``c1,...,cd,weight``."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != dims + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {dims} coordinates plus weight, "
                    f"got {len(parts)} fields"
                )
            off = tuple(int(p) for p in parts[:dims])
            if off in entries:
                raise ValueError(f"{path}:{lineno}: duplicate offset {off}")
            entries[off] = float(parts[dims])
    if not entries:
        raise ValueError(f"{path}: no kernel entries found")
    return entries

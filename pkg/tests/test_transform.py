from fractions import Fraction

import numpy as np
import pytest

from stencilroof import transform
from stencilroof.kernels import fuse, make_kernel
from stencilroof.transform import (
    MMA_DOUBLE,
    MMA_FLOAT,
    MmaShape,
    TransformScheme,
    build_operands,
    check_2to4,
    compress_2to4,
    decomposition_scheme,
    decompress_2to4,
    effective_ops,
    flattening_scheme,
    operands_to_csv,
)


def box2d1r():
    return fuse(make_kernel("box", 2, 1), 1)


class TestSchemes:
    def test_mma_presets(self):
        assert (MMA_DOUBLE.m, MMA_DOUBLE.n, MMA_DOUBLE.k) == (8, 8, 4)
        assert (MMA_FLOAT.m, MMA_FLOAT.n, MMA_FLOAT.k) == (16, 8, 16)

    def test_invalid_mma(self):
        with pytest.raises(ValueError):
            MmaShape(0, 8, 4)

    def test_invalid_kind(self):
        with pytest.raises(ValueError, match="unknown scheme kind"):
            TransformScheme("tessellate", MMA_DOUBLE)

    def test_override_range(self):
        with pytest.raises(ValueError):
            TransformScheme("flattening", MMA_DOUBLE, sparsity_override=1.5)


class TestBuildOperands:
    def test_flattening_box2d1r_unpadded_shape(self):
        ops = build_operands(box2d1r(), flattening_scheme(MMA_DOUBLE))
        assert (ops.unpadded_rows, ops.unpadded_cols) == (3, 9)
        # padding 3 rows up to m=8 wastes 5/8 = 62.5% of row capacity
        assert ops.rows == 8
        assert 1 - ops.unpadded_rows / ops.rows == pytest.approx(0.625)

    def test_flattening_nine_reduction_columns_before_padding(self):
        ops = build_operands(box2d1r(), flattening_scheme(MMA_DOUBLE))
        assert ops.unpadded_cols == 9

    def test_decomposition_default_sparsity(self):
        ops = build_operands(box2d1r(), decomposition_scheme())
        assert ops.sparsity == pytest.approx(0.375)
        assert ops.nonzeros == 9

    def test_override_is_authoritative(self):
        scheme = decomposition_scheme(sparsity_override=0.47)
        ops = build_operands(box2d1r(), scheme)
        assert ops.sparsity == 0.47
        assert ops.rows == 8 and ops.cols == 3  # constructed dims retained

    def test_padded_dims_are_tile_multiples(self):
        fused = fuse(make_kernel("box", 2, 1), 3)
        for scheme in (flattening_scheme(MMA_FLOAT), decomposition_scheme(MMA_DOUBLE)):
            ops = build_operands(fused, scheme)
            assert ops.rows % scheme.mma.m == 0
            assert ops.cols % scheme.mma.k == 0

    def test_sparsity_times_area_is_nonzeros(self):
        for shape, dims, radius, steps in (("box", 2, 1, 3), ("star", 2, 2, 2), ("box", 3, 1, 2)):
            fused = fuse(make_kernel(shape, dims, radius), steps)
            for scheme in (flattening_scheme(), decomposition_scheme()):
                ops = build_operands(fused, scheme)
                assert ops.sparsity_fraction() == Fraction(ops.nonzeros, ops.rows * ops.cols)
                assert ops.sparsity_fraction() * ops.rows * ops.cols == ops.nonzeros

    def test_padding_never_increases_sparsity(self):
        for steps in (1, 2, 3):
            fused = fuse(make_kernel("box", 2, 1), steps)
            ops = build_operands(fused, flattening_scheme(MMA_DOUBLE))
            unpadded_density = ops.nonzeros / (ops.unpadded_rows * ops.unpadded_cols)
            assert ops.sparsity <= unpadded_density

    def test_decomposition_star_lines(self):
        ops = build_operands(fuse(make_kernel("star", 2, 1), 1), decomposition_scheme())
        assert ops.unpadded_rows == 3  # one occupied line per leading coordinate
        assert ops.nonzeros == 5

    def test_decomposition_rejects_1d(self):
        with pytest.raises(ValueError, match="dims >= 2"):
            build_operands(fuse(make_kernel("box", 1, 1), 1), decomposition_scheme())

    def test_flattening_supports_1d(self):
        ops = build_operands(fuse(make_kernel("box", 1, 2), 1), flattening_scheme())
        assert ops.unpadded_cols == 5

    def test_csv_export(self):
        ops = build_operands(box2d1r(), decomposition_scheme())
        text = operands_to_csv(ops)
        rows = text.strip().split("\n")
        assert len(rows) == ops.rows
        parsed = np.array([[float(v) for v in row.split(",")] for row in rows])
        assert np.array_equal(parsed, ops.matrix)


class TestEffectiveOps:
    def test_half_sparsity_doubles_work(self):
        assert effective_ops(54, 0.5) == 108

    def test_spider_ratio(self):
        assert effective_ops(126, 15 / 32) == pytest.approx(268.8)

    def test_dense_identity(self):
        assert effective_ops(100, 1.0) == 100

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            effective_ops(10, 0.0)
        with pytest.raises(ValueError):
            effective_ops(10, 1.2)


class TestTwoFour:
    def test_alternating_row_satisfies(self):
        report = check_2to4([[1.0, 0, 2.0, 0, 3.0, 0, 4.0, 0]])
        assert report.satisfies_2to4
        assert report.compressed_cols == 4
        assert report.violating_groups == []

    def test_three_nonzeros_violate(self):
        report = check_2to4([[1.0, 2.0, 3.0, 0]])
        assert not report.satisfies_2to4
        assert report.violating_groups == [(0, 0)]
        assert report.compressed_cols is None

    def test_zero_group_satisfies(self):
        assert check_2to4([[0.0, 0.0, 0.0, 0.0]]).satisfies_2to4

    def test_ragged_width_is_padded(self):
        report = check_2to4([[1.0, 2.0, 0.0, 0.0, 5.0]])
        assert report.padded_cols == 8
        assert report.satisfies_2to4

    def test_compress_example(self):
        packed = compress_2to4([[3.0, 0, 7.0, 0]])
        assert packed.values.tolist() == [[3.0, 7.0]]
        assert packed.positions.tolist() == [[0, 2]]

    def test_zero_group_canonical_form(self):
        packed = compress_2to4([[0.0, 0.0, 0.0, 0.0]])
        assert packed.values.tolist() == [[0.0, 0.0]]
        assert packed.positions.tolist() == [[0, 1]]

    def test_compress_rejects_violations(self):
        with pytest.raises(ValueError, match="violates the 2:4 constraint"):
            compress_2to4([[1.0, 1.0, 1.0, 0.0]])

    def test_storage_is_half_plus_metadata(self):
        rng = np.random.default_rng(7)
        matrix = random_2to4_matrix(rng, rows=4, cols=16)
        packed = compress_2to4(matrix)
        assert packed.values.shape == (4, 8)
        assert packed.positions.shape == (4, 8)
        assert packed.positions.dtype == np.int8  # 2 bits needed, one byte stored

    def test_round_trip_random_matrices(self):
        rng = np.random.default_rng(20240811)
        for _ in range(200):
            rows = int(rng.integers(1, 6))
            cols = 4 * int(rng.integers(1, 6))
            matrix = random_2to4_matrix(rng, rows, cols)
            packed = compress_2to4(matrix)
            assert np.array_equal(decompress_2to4(packed), matrix)


def random_2to4_matrix(rng, rows, cols):
    """Random matrix with at most two nonzeros in every 4-wide group."""
    matrix = np.zeros((rows, cols))
    for r in range(rows):
        for g in range(0, cols, 4):
            count = int(rng.integers(0, 3))
            lanes = rng.choice(4, size=count, replace=False)
            for lane in lanes:
                value = 0.0
                while value == 0.0:
                    value = float(rng.normal())
                matrix[r, g + lane] = value
    return matrix

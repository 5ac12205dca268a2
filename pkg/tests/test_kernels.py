import itertools
from fractions import Fraction

import pytest

from stencilroof import kernels
from stencilroof.kernels import (
    SupportCapExceeded,
    box_redundancy_exact,
    fuse,
    fused_point_count,
    fusion_redundancy,
    fusion_redundancy_exact,
    has_symmetric_support,
    make_kernel,
    point_count,
)


def dict_conv(a, b):
    """Independent brute-force discrete convolution over weight maps."""
    out = {}
    for oa, wa in a.items():
        for ob, wb in b.items():
            off = tuple(x + y for x, y in zip(oa, ob))
            out[off] = out.get(off, 0.0) + wa * wb
    return out


def dict_power(entries, t):
    acc = dict(entries)
    for _ in range(t - 1):
        acc = dict_conv(acc, entries)
    return acc


class TestMakeKernel:
    def test_box_2d_r1_count(self):
        assert make_kernel("box", 2, 1).point_count == 9

    def test_star_2d_r1_count(self):
        assert make_kernel("star", 2, 1).point_count == 5

    def test_box_2d_r3_count(self):
        assert make_kernel("box", 2, 3).point_count == 49

    @pytest.mark.parametrize(
        "shape,dims,radius,expected",
        [("box", 3, 1, 27), ("box", 2, 7, 225), ("star", 3, 2, 13), ("star", 1, 4, 9)],
    )
    def test_point_count_formulas(self, shape, dims, radius, expected):
        k = make_kernel(shape, dims, radius)
        assert point_count(k) == expected

    def test_default_weights_normalized(self):
        k = make_kernel("box", 2, 1)
        assert all(w == pytest.approx(1 / 9) for w in k.entries.values())
        assert sum(k.entries.values()) == pytest.approx(1.0)

    def test_explicit_weights_must_match_support(self):
        with pytest.raises(ValueError, match="does not match"):
            make_kernel("box", 2, 1, weights={(0, 0): 1.0})

    def test_custom_kernel(self):
        k = make_kernel("custom", 2, weights={(0, 0): 0.5, (2, -1): 0.25})
        assert k.point_count == 2
        assert k.radius == 2

    def test_custom_requires_weights(self):
        with pytest.raises(ValueError, match="explicit weight map"):
            make_kernel("custom", 2)

    @pytest.mark.parametrize("shape,dims,radius", [("blob", 2, 1), ("box", 0, 1), ("box", 2, 0)])
    def test_invalid_arguments(self, shape, dims, radius):
        with pytest.raises(ValueError):
            make_kernel(shape, dims, radius)

    def test_non_finite_weight_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            make_kernel("custom", 1, weights={(0,): float("inf")})


class TestFuse:
    def test_box_2d_r1_t3_spans_7x7(self):
        fused = fuse(make_kernel("box", 2, 1), 3)
        assert fused.point_count == 49
        assert fused.max_offset_per_axis() == (3, 3)

    def test_identity_at_depth_one(self):
        k = make_kernel("star", 3, 2)
        fused = fuse(k, 1)
        assert fused.entries == k.entries

    def test_star_2d_t2_support(self):
        # frozen from the brute-force convolution oracle below
        assert fused_point_count(make_kernel("star", 2, 1), 2) == 13

    @pytest.mark.parametrize(
        "shape,dims,radius,steps,expected",
        [("star", 2, 1, 4, 41), ("star", 3, 2, 3, 245), ("box", 3, 1, 7, 3375)],
    )
    def test_support_counts_against_oracle(self, shape, dims, radius, steps, expected):
        k = make_kernel(shape, dims, radius)
        assert fused_point_count(k, steps) == expected
        assert len(dict_power(k.entries, steps)) == expected

    def test_fused_weights_match_oracle(self):
        k = make_kernel("star", 2, 1)
        fused = fuse(k, 3)
        oracle = dict_power(k.entries, 3)
        assert set(fused.entries) == set(oracle)
        for off, w in oracle.items():
            assert fused.entries[off] == pytest.approx(w, rel=1e-12)

    def test_structural_support_survives_cancellation(self):
        # +1/-1 weights cancel at some fused offsets; the support must not shrink
        k = make_kernel("custom", 1, weights={(-1,): 1.0, (0,): 0.0, (1,): -1.0})
        fused = fuse(k, 2)
        assert fused.point_count == 5  # offsets -2..2 all kept
        assert set(fused.entries) == {(-2,), (-1,), (0,), (1,), (2,)}
        assert fused.entries[(0,)] == pytest.approx(-2.0)
        assert fused.entries[(-1,)] == pytest.approx(0.0, abs=1e-12)
        assert fused.entries[(1,)] == pytest.approx(0.0, abs=1e-12)

    def test_depth_below_one_rejected(self):
        with pytest.raises(ValueError):
            fuse(make_kernel("box", 2, 1), 0)

    def test_support_cap(self):
        with pytest.raises(SupportCapExceeded):
            fused_point_count(make_kernel("box", 3, 3), 100)

    def test_point_count_nondecreasing_in_depth(self):
        for shape in ("box", "star"):
            k = make_kernel(shape, 2, 1)
            counts = [fused_point_count(k, t) for t in range(1, 9)]
            assert counts == sorted(counts)

    def test_symmetric_support_stays_symmetric(self):
        asym = make_kernel("custom", 2, weights={(0, 0): 1.0, (1, 0): 1.0, (0, -1): 1.0})
        assert not has_symmetric_support(asym.entries)
        for k in (make_kernel("box", 2, 2), make_kernel("star", 3, 1), asym):
            expected = has_symmetric_support(k.entries)
            if expected:
                assert has_symmetric_support(fuse(k, 3).entries)


class TestRedundancy:
    def test_identity_at_depth_one(self):
        for shape, dims, radius in (("box", 2, 1), ("star", 3, 2), ("box", 1, 3)):
            assert fusion_redundancy(make_kernel(shape, dims, radius), 1) == 1.0

    def test_published_two_decimal_values(self):
        k = make_kernel("box", 2, 1)
        assert fusion_redundancy_exact(k, 3) == Fraction(49, 27)
        assert round(fusion_redundancy(k, 3), 2) == 1.81
        assert fusion_redundancy_exact(k, 7) == Fraction(225, 63)
        assert round(fusion_redundancy(k, 7), 2) == 3.57

    def test_box_3d_t7(self):
        assert fusion_redundancy_exact(make_kernel("box", 3, 1), 7) == Fraction(3375, 189)

    def test_closed_form_matches_enumeration(self):
        for d, r, t in itertools.product((1, 2, 3), (1, 2), (1, 2, 5)):
            k = make_kernel("box", d, r)
            assert fusion_redundancy_exact(k, t) == box_redundancy_exact(d, r, t)

    def test_growth_approaches_limit_by_t64(self):
        # alpha(t)/t -> (2r)^2/(2r+1)^2 for d=2 boxes; within 5% at t=64
        for r in (1, 2, 3):
            k = make_kernel("box", 2, r)
            limit = (2 * r) ** 2 / (2 * r + 1) ** 2
            value = fusion_redundancy(k, 64) / 64
            assert abs(value - limit) / limit < 0.05

    def test_closed_form_rejects_bad_args(self):
        with pytest.raises(ValueError):
            box_redundancy_exact(0, 1, 1)


class TestWeightsCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("# comment\n0,0,0.5\n1,-1,0.25\n")
        entries = kernels.load_weights_csv(path, 2)
        assert entries == {(0, 0): 0.5, (1, -1): 0.25}

    def test_field_count_error(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("0,0,1,0.5\n")
        with pytest.raises(ValueError, match="expected 2 coordinates"):
            kernels.load_weights_csv(path, 2)

    def test_duplicate_offset(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text("0,0,0.5\n0,0,0.25\n")
        with pytest.raises(ValueError, match="duplicate"):
            kernels.load_weights_csv(path, 2)

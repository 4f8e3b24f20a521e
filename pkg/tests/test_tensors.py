import numpy as np
import pytest

from attrkit import (
    BinaryMask,
    Heatmap,
    ImageTensor,
    NumericError,
    ShapeError,
    bilinear_upsample,
    l2_distance,
    minmax_normalize,
    pearson_correlation,
)


class TestTypes:
    def test_heatmap_rejects_nan(self):
        with pytest.raises(NumericError):
            Heatmap([[1.0, np.nan]])

    def test_heatmap_rejects_empty_and_wrong_rank(self):
        with pytest.raises(ShapeError):
            Heatmap(np.zeros((0, 3)))
        with pytest.raises(ShapeError):
            Heatmap(np.zeros((2, 2, 2)))

    def test_heatmap_is_immutable(self):
        h = Heatmap([[1.0, 2.0]])
        with pytest.raises(ValueError):
            h.values[0, 0] = 9.0

    def test_mask_requires_binary_values(self):
        with pytest.raises(NumericError):
            BinaryMask([[0.0, 0.5]])

    def test_mask_threshold_maps_any_nonzero_to_one(self):
        m = BinaryMask.from_threshold([[0, 255], [-3, 0]])
        assert m.values.tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_mask_complement(self):
        m = BinaryMask([[1, 0], [0, 1]])
        assert m.complement().values.tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_image_tensor_shape(self):
        img = ImageTensor(np.zeros((2, 3, 4)))
        assert (img.channels, img.height, img.width) == (2, 3, 4)
        with pytest.raises(ShapeError):
            ImageTensor(np.zeros((3, 4)))


class TestPearson:
    def test_self_correlation_is_one(self):
        a = Heatmap([[1.0, 2.0], [3.0, 4.0]])
        assert pearson_correlation(a, a).value == pytest.approx(1.0)

    def test_negation_gives_minus_one(self):
        a = Heatmap([[1.0, 2.0], [3.0, 4.0]])
        b = Heatmap(-a.values)
        assert pearson_correlation(a, b).value == pytest.approx(-1.0)

    def test_hand_computed_value(self):
        # cov = 4, both variances sum to 5 -> r = 0.8
        a = Heatmap([[1.0, 2.0], [3.0, 4.0]])
        b = Heatmap([[1.0, 3.0], [2.0, 4.0]])
        assert pearson_correlation(a, b).value == pytest.approx(0.8, abs=1e-12)

    def test_zero_variance_flags_degenerate(self):
        a = Heatmap([[2.0, 2.0], [2.0, 2.0]])
        b = Heatmap([[1.0, 2.0], [3.0, 4.0]])
        res = pearson_correlation(a, b)
        assert res.value == 0.0 and res.degenerate

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            pearson_correlation(Heatmap([[1.0, 2.0]]), Heatmap([[1.0], [2.0]]))

    def test_symmetry_and_affine_invariance(self, rng):
        for _ in range(25):
            a = Heatmap(rng.normal(size=(5, 4)))
            b = Heatmap(rng.normal(size=(5, 4)))
            r_ab = pearson_correlation(a, b).value
            r_ba = pearson_correlation(b, a).value
            assert r_ab == pytest.approx(r_ba, abs=1e-12)
            scale, shift = float(rng.uniform(0.1, 5.0)), float(rng.normal())
            a2 = Heatmap(scale * a.values + shift)
            assert pearson_correlation(a2, b).value == pytest.approx(r_ab, abs=1e-9)


class TestL2Distance:
    def test_identity_is_zero(self, rng):
        a = Heatmap(rng.normal(size=(3, 3)))
        assert l2_distance(a, a, normalized=False) == 0.0
        assert l2_distance(a, a, normalized=True) == 0.0

    def test_three_four_five(self):
        a = Heatmap([[0.0, 0.0]])
        b = Heatmap([[3.0, 4.0]])
        assert l2_distance(a, b, normalized=False) == pytest.approx(5.0)

    def test_normalized_hand_case(self):
        # min-max is the identity here; sqrt(2) / sqrt(4)
        a = Heatmap([[0.0, 0.0], [0.0, 1.0]])
        b = Heatmap([[1.0, 0.0], [0.0, 0.0]])
        assert l2_distance(a, b, normalized=True) == pytest.approx(np.sqrt(2) / 2, abs=1e-12)

    def test_symmetry_and_triangle_inequality(self, rng):
        for normalized in (False, True):
            for _ in range(30):
                a, b, c = (Heatmap(rng.normal(size=(4, 4))) for _ in range(3))
                dab = l2_distance(a, b, normalized)
                dba = l2_distance(b, a, normalized)
                assert dab == pytest.approx(dba, abs=1e-12)
                dac = l2_distance(a, c, normalized)
                dcb = l2_distance(c, b, normalized)
                assert dab <= dac + dcb + 1e-12


class TestBilinearUpsample:
    def test_same_size_is_identity(self, rng):
        a = Heatmap(rng.normal(size=(4, 5)))
        out = bilinear_upsample(a, 4, 5)
        np.testing.assert_array_equal(out.values, a.values)

    def test_constant_stays_constant(self):
        a = Heatmap(np.full((2, 2), 3.25))
        out = bilinear_upsample(a, 7, 9)
        np.testing.assert_allclose(out.values, 3.25)

    def test_half_pixel_centers_hand_case(self):
        a = Heatmap([[0.0, 1.0]])
        out = bilinear_upsample(a, 1, 4)
        np.testing.assert_allclose(out.values, [[0.0, 0.25, 0.75, 1.0]], atol=1e-15)

    def test_bounds_preserved(self, rng):
        for _ in range(20):
            a = Heatmap(rng.normal(size=(3, 4)))
            out = bilinear_upsample(a, 11, 13)
            assert out.values.min() >= a.values.min() - 1e-12
            assert out.values.max() <= a.values.max() + 1e-12

    def test_rejects_shrinking_and_zero_target(self):
        a = Heatmap(np.zeros((4, 4)))
        with pytest.raises(ShapeError):
            bilinear_upsample(a, 2, 8)
        with pytest.raises(ShapeError):
            bilinear_upsample(a, 0, 8)


class TestMinMaxNormalize:
    def test_affine_case(self):
        out = minmax_normalize(Heatmap([[-1.0, 0.0, 1.0]]))
        assert not out.degenerate
        np.testing.assert_allclose(out.heatmap.values, [[0.0, 0.5, 1.0]])

    def test_constant_maps_to_zeros_with_flag(self):
        out = minmax_normalize(Heatmap(np.full((2, 2), 7.0)))
        assert out.degenerate
        np.testing.assert_array_equal(out.heatmap.values, np.zeros((2, 2)))

    def test_unit_range_map_unchanged(self):
        a = Heatmap([[0.0, 0.25], [0.75, 1.0]])
        out = minmax_normalize(a)
        np.testing.assert_array_equal(out.heatmap.values, a.values)

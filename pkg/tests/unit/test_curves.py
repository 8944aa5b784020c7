"""Tests for density profiles and Fourier smoothing."""

import numpy as np
import pytest

from src.errors import ArgumentError, DataError
from src.fda.curves import FourierBasis, extract_ddp, extract_ddps, smooth_curves
from src.state.models import CurveSet, GridSpec, RegionOfInterest


class TestExtractDdp:
    """Tests for extract_ddp."""

    def test_all_ones_full_grid(self, make_day):
        """A 39x39 grid of ones holds 1521 people at every quarter."""
        day = make_day("2015-09-01", np.ones((4, 39, 39)))
        curve = extract_ddp(day, RegionOfInterest.full_grid(GridSpec()))
        assert curve.values.tolist() == [1521.0] * 4

    def test_single_cell_region(self, make_day):
        """A one-cell region follows that cell."""
        cube = np.random.default_rng(0).uniform(0, 9, (8, 6, 6))
        day = make_day("2016-06-01", cube)
        curve = extract_ddp(day, RegionOfInterest(row_range=(2, 2), col_range=(4, 4)))
        assert np.array_equal(curve.values, cube[:, 2, 4])

    def test_additive_over_disjoint_regions(self, make_day):
        """Splitting a region in two splits its profile in two."""
        cube = np.random.default_rng(1).uniform(0, 9, (8, 6, 6))
        day = make_day("2016-06-01", cube)
        whole = extract_ddp(day, RegionOfInterest(row_range=(0, 5), col_range=(1, 4)))
        top = extract_ddp(day, RegionOfInterest(row_range=(0, 2), col_range=(1, 4)))
        bottom = extract_ddp(day, RegionOfInterest(row_range=(3, 5), col_range=(1, 4)))
        np.testing.assert_allclose(whole.values, top.values + bottom.values, rtol=1e-12)

    def test_region_outside_grid(self, make_day):
        """A region past the grid edge is an argument error."""
        day = make_day("2016-06-01", np.ones((2, 6, 6)))
        with pytest.raises(ArgumentError):
            extract_ddp(day, RegionOfInterest(row_range=(0, 6), col_range=(0, 5)))

    def test_unobserved_day(self, make_day):
        """Profiles are only defined on fully observed days."""
        mask = np.ones((3, 6, 6), dtype=bool)
        mask[1, 0, 0] = False
        day = make_day("2016-06-01", np.ones((3, 6, 6)), mask)
        with pytest.raises(DataError) as exc_info:
            extract_ddp(day, RegionOfInterest(row_range=(0, 5), col_range=(0, 5)))
        assert exc_info.value.quarter == 1

    def test_many_days_keep_order(self, make_collection):
        """extract_ddps returns one row per day in the given order."""
        data = make_collection(3)
        curves = extract_ddps(reversed(data.days), RegionOfInterest(row_range=(0, 5), col_range=(0, 5)))
        assert curves.day_ids == tuple(reversed(data.day_ids))
        assert curves.n_points == 8


class TestFourierBasis:
    """Tests for FourierBasis."""

    @pytest.mark.parametrize("n_basis, n_points", [(11, 96), (7, 24), (1, 2), (23, 24)])
    def test_discrete_orthonormality(self, n_basis, n_points):
        """design.T @ design / Q is the identity at the midpoints."""
        basis = FourierBasis.build(n_basis, n_points)
        gram = basis.design.T @ basis.design / n_points
        np.testing.assert_allclose(gram, np.eye(n_basis), rtol=0, atol=1e-10)

    def test_column_order(self):
        """Constant first, then sine and cosine of rising frequency."""
        basis = FourierBasis.build(5, 96)
        t = basis.sample_points
        np.testing.assert_allclose(basis.design[:, 1], np.sqrt(2) * np.sin(2 * np.pi * t))
        np.testing.assert_allclose(basis.design[:, 2], np.sqrt(2) * np.cos(2 * np.pi * t))
        np.testing.assert_allclose(basis.design[:, 4], np.sqrt(2) * np.cos(4 * np.pi * t))
        assert t[0] == pytest.approx(0.5 / 96)

    @pytest.mark.parametrize("n_basis, n_points", [(8, 96), (0, 96), (-3, 96), (11, 11)])
    def test_invalid_sizes(self, n_basis, n_points):
        """Even, non-positive or too large bases are argument errors."""
        with pytest.raises(ArgumentError):
            FourierBasis.build(n_basis, n_points)


class TestSmoothCurves:
    """Tests for smooth_curves."""

    def test_constant_curve(self):
        """y = 5 has coefficients (5, 0, ..., 0) and no residual."""
        basis = FourierBasis.build(11, 96)
        fit = smooth_curves(CurveSet(day_ids=("a",), values=np.full((1, 96), 5.0)), basis).curves[0]
        expected = np.zeros(11)
        expected[0] = 5.0
        np.testing.assert_allclose(fit.coefficients, expected, atol=1e-12)
        assert fit.residual_sse == pytest.approx(0.0, abs=1e-20)

    def test_first_cosine(self):
        """sqrt(2) cos(2 pi t) is the third basis function."""
        basis = FourierBasis.build(11, 96)
        y = np.sqrt(2) * np.cos(2 * np.pi * basis.sample_points)
        fit = smooth_curves(CurveSet(day_ids=("a",), values=y[None]), basis).curves[0]
        expected = np.zeros(11)
        expected[2] = 1.0
        np.testing.assert_allclose(fit.coefficients, expected, atol=1e-12)

    def test_matches_normal_equations(self):
        """The closed form equals a generic least-squares solve."""
        basis = FourierBasis.build(9, 48)
        values = np.random.default_rng(2).uniform(0, 100, (5, 48))
        smoothed = smooth_curves(CurveSet(day_ids=tuple("abcde"), values=values), basis)
        B = basis.design
        oracle = np.linalg.solve(B.T @ B, B.T @ values.T).T
        np.testing.assert_allclose(smoothed.coefficient_matrix(), oracle, rtol=1e-10, atol=1e-9)
        for fit, y in zip(smoothed.curves, values):
            np.testing.assert_allclose(fit.fitted, B @ fit.coefficients)
            assert fit.residual_sse == pytest.approx(((y - fit.fitted) ** 2).sum())

    def test_smoothing_a_fit_is_idempotent(self):
        """Fitted curves lie in the basis span and project onto themselves."""
        basis = FourierBasis.build(11, 96)
        values = np.random.default_rng(3).uniform(0, 10, (3, 96))
        once = smooth_curves(CurveSet(day_ids=("a", "b", "c"), values=values), basis)
        fitted = CurveSet(day_ids=once.day_ids, values=np.stack([c.fitted for c in once.curves]))
        twice = smooth_curves(fitted, basis)
        np.testing.assert_allclose(
            twice.coefficient_matrix(), once.coefficient_matrix(), rtol=0, atol=1e-10
        )

    def test_residual_falls_with_basis_size(self):
        """A larger basis never fits worse."""
        y = np.random.default_rng(4).uniform(0, 10, (1, 48))
        curves = CurveSet(day_ids=("a",), values=y)
        sse = [smooth_curves(curves, FourierBasis.build(d, 48)).curves[0].residual_sse for d in (1, 5, 11, 21)]
        assert all(b <= a + 1e-9 for a, b in zip(sse, sse[1:]))

    def test_length_mismatch(self):
        """Curves must have the basis sample count."""
        with pytest.raises(DataError):
            smooth_curves(CurveSet(day_ids=("a",), values=np.ones((1, 24))), FourierBasis.build(5, 96))

    def test_empty_set(self):
        """No curves, no fits."""
        smoothed = smooth_curves(CurveSet(day_ids=(), values=np.empty((0, 96))), FourierBasis.build(5, 96))
        assert len(smoothed) == 0
        assert smoothed.coefficient_matrix().shape == (0, 5)

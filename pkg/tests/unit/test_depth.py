"""Tests for band depth, outlier trimming and functional boxplots."""

from itertools import combinations

import numpy as np
import pytest

from src.errors import ArgumentError
from src.fda.depth import (
    OutlierParams,
    band_depths,
    detect_outliers,
    functional_boxplot,
    modified_band_depth,
    resample_depths,
)
from src.state.models import CurveSet


def constants(levels: list[float], ids: list[str], n_points: int = 4) -> CurveSet:
    return CurveSet(
        day_ids=tuple(ids), values=np.repeat(np.asarray(levels, dtype=float)[:, None], n_points, axis=1)
    )


def brute_force_mbd(values: np.ndarray) -> np.ndarray:
    n = len(values)
    pairs = list(combinations(range(n), 2))
    depths = np.zeros(n)
    for i in range(n):
        inside = 0.0
        for a, b in pairs:
            low = np.minimum(values[a], values[b])
            high = np.maximum(values[a], values[b])
            inside += np.mean((low <= values[i]) & (values[i] <= high))
        depths[i] = inside / len(pairs)
    return depths


def profile_day(rng: np.random.Generator, n_points: int = 48, amplitude: float = 50e3) -> np.ndarray:
    hours = (np.arange(n_points) + 0.5) * 24 / n_points
    shape = 0.63 + 0.37 * np.exp(-((hours - 12.0) ** 2) / 8.0)
    return amplitude * shape * np.exp(0.05 * rng.standard_normal(n_points))


class TestModifiedBandDepth:
    """Tests for modified_band_depth."""

    def test_three_constants(self):
        """Levels 1, 2, 3 have depths 2/3, 1, 2/3."""
        result = modified_band_depth(constants([1, 2, 3], ["a", "b", "c"]))
        assert result.depths == pytest.approx({"a": 2 / 3, "b": 1.0, "c": 2 / 3})

    def test_identical_curves(self):
        """Every curve lies in every band."""
        result = modified_band_depth(constants([4, 4, 4, 4], ["a", "b", "c", "d"]))
        assert set(result.depths.values()) == {1.0}

    def test_two_curves(self):
        """Each of two curves bounds the only band."""
        values = np.random.default_rng(0).standard_normal((2, 10))
        assert band_depths(values).tolist() == [1.0, 1.0]

    def test_one_curve(self):
        """Depth is undefined for a single curve."""
        with pytest.raises(ArgumentError):
            modified_band_depth(constants([1], ["a"]))

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_matches_pair_enumeration(self, n):
        """Counting ranks equals enumerating every band, ties included."""
        rng = np.random.default_rng(n)
        for values in (rng.standard_normal((n, 12)), rng.integers(0, 3, (n, 12)).astype(float)):
            np.testing.assert_allclose(band_depths(values), brute_force_mbd(values), rtol=0, atol=1e-12)

    def test_common_shift(self):
        """Adding the same curve to every member changes no depth."""
        rng = np.random.default_rng(5)
        values = rng.uniform(0, 10, (7, 20))
        shift = rng.uniform(-100, 100, 20)
        np.testing.assert_allclose(band_depths(values + shift), band_depths(values), rtol=0, atol=1e-12)


class TestResampleDepths:
    """Tests for resample_depths."""

    def test_distinct_parents_match_band_depth(self):
        """Without repeated draws it is the plain band depth."""
        values = np.random.default_rng(5).standard_normal((9, 12))
        np.testing.assert_allclose(
            resample_depths(values, np.arange(9)), band_depths(values), rtol=0, atol=1e-12
        )

    def test_copies_do_not_see_each_other(self):
        """Each copy of a twice-drawn curve is scored as if its twin were absent."""
        rng = np.random.default_rng(6)
        values = rng.standard_normal((6, 10))
        values[1] = values[0] + 0.01 * rng.standard_normal(10)
        depths = resample_depths(values, np.array([0, 0, 1, 2, 3, 4]))
        assert depths[0] == pytest.approx(band_depths(values[[0, 2, 3, 4, 5]])[0], abs=1e-12)
        assert depths[1] == pytest.approx(band_depths(values[[1, 2, 3, 4, 5]])[0], abs=1e-12)
        assert depths[2] == pytest.approx(band_depths(values)[2], abs=1e-12)


class TestDetectOutliers:
    """Tests for detect_outliers."""

    def test_identical_curves_flag_nothing(self):
        """60 equal curves all have depth 1."""
        curves = constants([3.0] * 60, [f"d{i:02d}" for i in range(60)], n_points=24)
        result = detect_outliers(curves, OutlierParams(n_boot=20), seed=1)
        assert result.flagged == []
        assert len(result.kept) == 60
        assert len(result.passes) == 1

    def test_too_few_curves(self):
        """Five curves cannot support the bootstrap."""
        with pytest.raises(ArgumentError, match="manually"):
            detect_outliers(constants([1, 2, 3, 4, 5], list("abcde")), OutlierParams(), seed=0)

    @pytest.mark.parametrize("seed", [4, 11])
    def test_planted_shocks_are_flagged(self, seed):
        """Two amplitude-shocked days above 58 evenly crossing regular ones are the only flags."""
        hours = (np.arange(116) + 0.5) * 24 / 116
        shape = 50e3 * (0.63 + 0.37 * np.exp(-((hours - 12.0) ** 2) / 8.0))
        ranks = (np.arange(58)[:, None] + np.arange(116)[None, :]) % 58
        regular = shape * (1.0 + 0.01 * ranks)
        peak = regular.max(axis=0)
        shocked = np.stack([1.35 * peak, 1.40 * peak])
        ids = [f"r{i:02d}" for i in range(58)] + ["s0", "s1"]
        curves = CurveSet(day_ids=tuple(ids), values=np.vstack([regular, shocked]))
        result = detect_outliers(curves, OutlierParams(n_boot=40), seed=seed)
        assert result.flagged == ["s0", "s1"]
        assert result.passes[0].flagged == ["s0", "s1"]
        assert result.passes[-1].flagged == []
        assert len(result.kept) == 58

    def test_identical_curves_with_shocks(self):
        """Only the two shocks leave when every regular curve is the same."""
        ids = [f"r{i:02d}" for i in range(58)] + ["s0", "s1"]
        curves = constants([3.0] * 58 + [5.0, 6.0], ids)
        result = detect_outliers(curves, OutlierParams(n_boot=20), seed=3)
        assert result.flagged == ["s0", "s1"]
        assert len(result.kept) == 58

    def test_false_alarm_rate_on_clean_samples(self):
        """Homogeneous samples lose at most 5% of their curves over 20 seeds."""
        params = OutlierParams(n_boot=40)
        false_alarms = 0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            curves = CurveSet(
                day_ids=tuple(f"d{i:02d}" for i in range(60)),
                values=np.stack([profile_day(rng, 24) for _ in range(60)]),
            )
            false_alarms += len(detect_outliers(curves, params, seed=seed).flagged)
        assert false_alarms <= 0.05 * 20 * 60

    def test_deterministic(self):
        """A fixed seed gives the same flags and cutoffs, whatever the worker count."""
        rng = np.random.default_rng(8)
        curves = CurveSet(
            day_ids=tuple(f"d{i:02d}" for i in range(30)),
            values=np.stack([profile_day(rng, 24) for _ in range(30)]),
        )
        params = OutlierParams(n_boot=30, max_passes=3)
        first = detect_outliers(curves, params, seed=12, workers=1)
        second = detect_outliers(curves, params, seed=12, workers=4)
        assert first.flagged == second.flagged
        assert first.cutoffs == second.cutoffs


class TestFunctionalBoxplot:
    """Tests for functional_boxplot."""

    IDS = ["d01", "d02", "d03", "d04", "d05"]

    def test_five_nested_constants(self):
        """Levels 1..5: median 3, central [2, 4], fences [-1, 7], whiskers [1, 5]."""
        box = functional_boxplot(constants([1, 2, 3, 4, 5], self.IDS))
        assert box.median_day_id == "d03"
        assert box.central_lower.tolist() == [2.0] * 4
        assert box.central_upper.tolist() == [4.0] * 4
        assert box.fence_lower.tolist() == [-1.0] * 4
        assert box.fence_upper.tolist() == [7.0] * 4
        assert box.whisker_lower.tolist() == [1.0] * 4
        assert box.whisker_upper.tolist() == [5.0] * 4
        assert box.outlier_day_ids == []

    def test_far_curve_is_outside_the_fence(self):
        """Adding a level-10 curve flags it; whiskers stay at [1, 5]."""
        box = functional_boxplot(constants([1, 2, 3, 4, 5, 10], self.IDS + ["d10"]))
        assert box.outlier_day_ids == ["d10"]
        assert box.median_day_id == "d03"
        assert box.fence_upper.tolist() == [7.0] * 4
        assert box.whisker_lower.tolist() == [1.0] * 4
        assert box.whisker_upper.tolist() == [5.0] * 4

    def test_single_curve(self):
        """One curve is its own median and every band."""
        values = np.array([[1.0, 4.0, 2.0]])
        box = functional_boxplot(CurveSet(day_ids=("only",), values=values))
        assert box.median_day_id == "only"
        for band in box.bands().values():
            assert band == [1.0, 4.0, 2.0]

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_bands_nest(self, seed):
        """fence >= whisker >= central >= median, pointwise, on random data."""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 25))
        values = rng.standard_normal((n, 16)) * rng.uniform(0.5, 3.0, (n, 1))
        curves = CurveSet(day_ids=tuple(f"d{i:02d}" for i in range(n)), values=values)
        box = functional_boxplot(curves)
        median = values[curves.day_ids.index(box.median_day_id)]
        assert np.all(box.fence_lower <= box.whisker_lower)
        assert np.all(box.whisker_lower <= box.central_lower)
        assert np.all(box.central_lower <= median)
        assert np.all(median <= box.central_upper)
        assert np.all(box.central_upper <= box.whisker_upper)
        assert np.all(box.whisker_upper <= box.fence_upper)
        assert box.median_day_id not in box.outlier_day_ids

    def test_argument_checks(self):
        """Empty input and a proportion outside (0, 1] are rejected."""
        with pytest.raises(ArgumentError):
            functional_boxplot(CurveSet(day_ids=(), values=np.empty((0, 3))))
        with pytest.raises(ArgumentError):
            functional_boxplot(constants([1, 2], ["a", "b"]), p=0.0)

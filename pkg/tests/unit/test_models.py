"""Tests for the core domain types."""

from datetime import date as Date

import numpy as np
import pytest
from pydantic import ValidationError

from src.state.models import (
    CurveSet,
    DayCollection,
    DayRecord,
    GridSnapshot,
    GridSpec,
    RegionOfInterest,
    Weekday,
)


class TestGridSpec:
    """Tests for GridSpec."""

    def test_defaults(self):
        """Default grid is 39x39 cells of 150 m with 96 quarters."""
        spec = GridSpec()
        assert spec.shape == (39, 39)
        assert spec.cell_size_m == 150.0
        assert spec.quarters_per_day == 96

    @pytest.mark.parametrize("field, value", [("n_rows", 2), ("n_cols", 1), ("quarters_per_day", 1)])
    def test_rejects_tiny_grids(self, field, value):
        """Grids too small for interior gradients are rejected."""
        with pytest.raises(ValidationError):
            GridSpec(**{field: value})


class TestRegionOfInterest:
    """Tests for RegionOfInterest."""

    def test_slices_are_inclusive(self):
        """Both ends of each range belong to the region."""
        roi = RegionOfInterest(row_range=(1, 2), col_range=(0, 0))
        grid = np.arange(16).reshape(4, 4)
        assert grid[roi.slices].tolist() == [[4], [8]]

    def test_fits(self):
        """fits() checks the upper bounds against the grid."""
        roi = RegionOfInterest(row_range=(0, 38), col_range=(0, 38))
        assert roi.fits(39, 39)
        assert not roi.fits(38, 39)

    def test_rejects_reversed_range(self):
        """A range with high < low is invalid."""
        with pytest.raises(ValidationError):
            RegionOfInterest(row_range=(5, 2))


class TestDayRecord:
    """Tests for DayRecord and GridSnapshot."""

    def test_from_arrays_indexes_quarters(self, make_day):
        """Quarters map one to one onto 0..Q-1."""
        day = make_day("2015-09-01", np.ones((4, 3, 3)))
        assert [s.quarter for s in day.snapshots] == [0, 1, 2, 3]
        assert day.weekday == Weekday.TUE
        assert day.month == 9

    def test_snapshot_arrays_are_read_only(self, make_day):
        """Arrays of a frozen day cannot be written."""
        day = make_day("2015-09-01", np.ones((2, 3, 3)))
        with pytest.raises(ValueError):
            day.snapshots[0].values[0, 0] = 5.0

    def test_rejects_negative_observed_value(self):
        """Observed counts are non-negative."""
        values = np.ones((3, 3))
        values[1, 1] = -1.0
        with pytest.raises(ValidationError):
            GridSnapshot(values=values, mask=np.ones((3, 3), bool), day_id="d", quarter=0)

    def test_unobserved_cells_may_hold_anything(self):
        """Non-finite values are allowed where the mask is false."""
        values = np.ones((3, 3))
        values[0, 0] = np.nan
        mask = np.ones((3, 3), bool)
        mask[0, 0] = False
        snap = GridSnapshot(values=values, mask=mask, day_id="d", quarter=0)
        assert not snap.fully_observed

    def test_rejects_weekday_mismatch(self, make_day):
        """weekday and month must agree with the date."""
        day = make_day("2015-09-01", np.ones((2, 3, 3)))
        with pytest.raises(ValidationError):
            DayRecord(
                day_id=day.day_id,
                date=Date(2015, 9, 1),
                weekday=Weekday.MON,
                month=9,
                snapshots=day.snapshots,
            )

    def test_unobserved_quarters(self, make_day):
        """Quarters with any unobserved cell are listed."""
        mask = np.ones((4, 3, 3), bool)
        mask[2, 0, 1] = False
        day = make_day("2015-09-01", np.ones((4, 3, 3)), mask)
        assert day.unobserved_quarters() == [2]


class TestDayCollection:
    """Tests for DayCollection."""

    def test_rejects_duplicate_day_ids(self, small_grid, make_day):
        """day_ids are unique within a collection."""
        day = make_day("2016-06-01", np.ones((8, 6, 6)))
        with pytest.raises(ValidationError):
            DayCollection(spec=small_grid, days=(day, day))

    def test_rejects_wrong_quarter_count(self, small_grid, make_day):
        """Every day has exactly Q snapshots."""
        day = make_day("2016-06-01", np.ones((7, 6, 6)))
        with pytest.raises(ValidationError):
            DayCollection(spec=small_grid, days=(day,))

    def test_get_and_with_days(self, make_collection):
        """Lookup by id and replacing the days keeps spec and provenance."""
        collection = make_collection(3)
        assert collection.get("2016-06-02").day_id == "2016-06-02"
        assert collection.get("1999-01-01") is None
        smaller = collection.with_days(collection.days[:1])
        assert len(smaller) == 1
        assert smaller.provenance == "fixture"


class TestCurveSet:
    """Tests for CurveSet."""

    def test_subset_keeps_requested_order(self):
        """subset returns the curves in the order asked for."""
        curves = CurveSet(day_ids=("a", "b", "c"), values=np.arange(6.0).reshape(3, 2))
        sub = curves.subset(["c", "a"])
        assert sub.day_ids == ("c", "a")
        assert sub.values.tolist() == [[4.0, 5.0], [0.0, 1.0]]

    def test_empty_subset(self):
        """An empty subset has no rows but keeps the time axis."""
        curves = CurveSet(day_ids=("a",), values=np.ones((1, 5)))
        assert len(curves.subset([])) == 0

    def test_rejects_non_finite(self):
        """Curve values are finite."""
        with pytest.raises(ValidationError):
            CurveSet(day_ids=("a",), values=np.array([[1.0, np.inf]]))

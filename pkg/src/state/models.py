"""Core domain types for grid-aggregated presence data.

All types are frozen after construction and their arrays are read-only views,
so they can be shared freely across worker threads.
"""

from datetime import date as Date
from enum import Enum
from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def frozen_array(value, dtype) -> np.ndarray:
    """Return a read-only array view of ``value`` with the given dtype."""
    arr = np.asarray(value, dtype=dtype).view()
    arr.setflags(write=False)
    return arr


class Weekday(str, Enum):
    """Day of the week."""

    MON = "Mon"
    TUE = "Tue"
    WED = "Wed"
    THU = "Thu"
    FRI = "Fri"
    SAT = "Sat"
    SUN = "Sun"

    @classmethod
    def from_date(cls, day: Date) -> "Weekday":
        return list(cls)[day.weekday()]


class GridSpec(BaseModel):
    """Geometry of the presence grid and the daily sampling."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_rows: int = Field(default=39, ge=3, description="Grid rows (HOG needs interior gradients)")
    n_cols: int = Field(default=39, ge=3, description="Grid columns")
    cell_size_m: float = Field(default=150.0, gt=0, description="Cell side in metres (metadata)")
    extent: str = Field(
        default="latitude 45.516 N - 46.564 N, longitude 10.18 - 10.245",
        description="Geographic extent as published (metadata, never computed on)",
    )
    quarters_per_day: int = Field(default=96, ge=2, description="Quarter-hours per day (Q)")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)


class RegionOfInterest(BaseModel):
    """Rectangular block of cells, both ranges inclusive."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    row_range: tuple[int, int] = (0, 38)
    col_range: tuple[int, int] = (0, 38)

    @field_validator("row_range", "col_range")
    @classmethod
    def _ordered(cls, v: tuple[int, int]) -> tuple[int, int]:
        lo, hi = v
        if lo < 0 or hi < lo:
            raise ValueError(f"expected 0 <= low <= high, got [{lo}, {hi}]")
        return v

    @classmethod
    def full_grid(cls, spec: GridSpec) -> "RegionOfInterest":
        return cls(row_range=(0, spec.n_rows - 1), col_range=(0, spec.n_cols - 1))

    def fits(self, n_rows: int, n_cols: int) -> bool:
        """True when the region lies inside an n_rows x n_cols grid."""
        return self.row_range[1] < n_rows and self.col_range[1] < n_cols

    @property
    def slices(self) -> tuple[slice, slice]:
        return (
            slice(self.row_range[0], self.row_range[1] + 1),
            slice(self.col_range[0], self.col_range[1] + 1),
        )


class GridSnapshot(BaseModel):
    """Average connected phones per cell for one quarter of one day."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    mask: np.ndarray
    day_id: str
    quarter: int = Field(ge=0)

    @field_validator("values", mode="before")
    @classmethod
    def _values_array(cls, v) -> np.ndarray:
        return frozen_array(v, np.float64)

    @field_validator("mask", mode="before")
    @classmethod
    def _mask_array(cls, v) -> np.ndarray:
        return frozen_array(v, bool)

    @model_validator(mode="after")
    def _check(self) -> "GridSnapshot":
        if self.values.ndim != 2 or self.values.shape != self.mask.shape:
            raise ValueError(
                f"values {self.values.shape} and mask {self.mask.shape} must be equal 2-D shapes"
            )
        observed = self.values[self.mask]
        if not np.all(np.isfinite(observed)):
            raise ValueError(f"non-finite observed value in {self.day_id} quarter {self.quarter}")
        if np.any(observed < 0):
            raise ValueError(f"negative count in {self.day_id} quarter {self.quarter}")
        return self

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())


class DayRecord(BaseModel):
    """The Q snapshots of one calendar day."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    day_id: str
    date: Date
    weekday: Weekday
    month: int = Field(ge=1, le=12)
    snapshots: tuple[GridSnapshot, ...]

    @model_validator(mode="after")
    def _check(self) -> "DayRecord":
        quarters = [s.quarter for s in self.snapshots]
        if quarters != list(range(len(self.snapshots))):
            raise ValueError(
                f"day {self.day_id}: snapshot quarters must be exactly 0..{len(quarters) - 1}"
            )
        if any(s.day_id != self.day_id for s in self.snapshots):
            raise ValueError(f"day {self.day_id}: snapshot with foreign day_id")
        if len({s.values.shape for s in self.snapshots}) > 1:
            raise ValueError(f"day {self.day_id}: snapshots differ in shape")
        if self.weekday != Weekday.from_date(self.date) or self.month != self.date.month:
            raise ValueError(f"day {self.day_id}: weekday/month disagree with date {self.date}")
        return self

    @classmethod
    def from_arrays(
        cls, day_id: str, date: Date, values: np.ndarray, mask: np.ndarray
    ) -> "DayRecord":
        """Build a day from (Q, rows, cols) value and mask cubes."""
        values = frozen_array(values, np.float64)
        mask = frozen_array(mask, bool)
        snapshots = tuple(
            GridSnapshot(values=values[q], mask=mask[q], day_id=day_id, quarter=q)
            for q in range(values.shape[0])
        )
        return cls(
            day_id=day_id,
            date=date,
            weekday=Weekday.from_date(date),
            month=date.month,
            snapshots=snapshots,
        )

    @property
    def n_quarters(self) -> int:
        return len(self.snapshots)

    @property
    def shape(self) -> tuple[int, int]:
        return self.snapshots[0].values.shape

    def values_cube(self) -> np.ndarray:
        """(Q, rows, cols) array of values."""
        return np.stack([s.values for s in self.snapshots])

    def mask_cube(self) -> np.ndarray:
        """(Q, rows, cols) array of observation flags."""
        return np.stack([s.mask for s in self.snapshots])

    def unobserved_quarters(self) -> list[int]:
        """Quarters with at least one unobserved cell."""
        return [s.quarter for s in self.snapshots if not s.fully_observed]


class DayCollection(BaseModel):
    """Ordered set of days on one grid; the unit of clustering."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: GridSpec
    days: tuple[DayRecord, ...]
    provenance: str = ""

    @model_validator(mode="after")
    def _check(self) -> "DayCollection":
        ids = [d.day_id for d in self.days]
        if len(set(ids)) != len(ids):
            raise ValueError("day_ids must be unique")
        for day in self.days:
            if day.n_quarters != self.spec.quarters_per_day:
                raise ValueError(
                    f"day {day.day_id} has {day.n_quarters} quarters, "
                    f"expected {self.spec.quarters_per_day}"
                )
            if day.shape != self.spec.shape:
                raise ValueError(f"day {day.day_id} grid {day.shape} != {self.spec.shape}")
        return self

    def __len__(self) -> int:
        return len(self.days)

    @property
    def day_ids(self) -> list[str]:
        return [d.day_id for d in self.days]

    def get(self, day_id: str) -> Optional[DayRecord]:
        for day in self.days:
            if day.day_id == day_id:
                return day
        return None

    def with_days(self, days: Iterable[DayRecord]) -> "DayCollection":
        """Same spec and provenance, different days."""
        return DayCollection(spec=self.spec, days=tuple(days), provenance=self.provenance)


class Curve(BaseModel):
    """A daily density profile: Q people counts for one day."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    day_id: str
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _values_array(cls, v) -> np.ndarray:
        arr = frozen_array(v, np.float64)
        if arr.ndim != 1:
            raise ValueError("curve values must be 1-D")
        if not np.all(np.isfinite(arr)):
            raise ValueError("curve values must be finite")
        return arr


class CurveSet(BaseModel):
    """Curves sharing one time axis, stored as an (n, Q) matrix."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    day_ids: tuple[str, ...]
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _values_array(cls, v) -> np.ndarray:
        arr = frozen_array(v, np.float64)
        if arr.ndim != 2:
            raise ValueError("curve matrix must be 2-D (n_curves, n_points)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("curve values must be finite")
        return arr

    @model_validator(mode="after")
    def _check(self) -> "CurveSet":
        if len(self.day_ids) != self.values.shape[0]:
            raise ValueError(
                f"{len(self.day_ids)} day_ids for {self.values.shape[0]} curves"
            )
        if len(set(self.day_ids)) != len(self.day_ids):
            raise ValueError("day_ids must be unique")
        return self

    @classmethod
    def from_curves(cls, curves: Iterable[Curve], n_points: Optional[int] = None) -> "CurveSet":
        curves = list(curves)
        if not curves:
            return cls(day_ids=(), values=np.empty((0, n_points or 0)))
        return cls(
            day_ids=tuple(c.day_id for c in curves),
            values=np.stack([c.values for c in curves]),
        )

    def __len__(self) -> int:
        return len(self.day_ids)

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    def curves(self) -> list[Curve]:
        return [Curve(day_id=i, values=v) for i, v in zip(self.day_ids, self.values)]

    def subset(self, day_ids: Iterable[str]) -> "CurveSet":
        """Curves for the given ids, in the given order."""
        index = {d: i for i, d in enumerate(self.day_ids)}
        ids = list(day_ids)
        rows = [index[d] for d in ids]
        return CurveSet(day_ids=tuple(ids), values=self.values[np.asarray(rows, dtype=int)])

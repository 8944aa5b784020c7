"""Deterministic synthetic presence data with planted day types.

Each day type fixes a weekday/month footprint, a bimodal intra-day profile, a
spatial field (a weighted mixture of Gaussian blobs) and an amplitude, the
peak full-grid presence. One type may be split into month-level amplitude
tiers. Days are drawn on an evenly thinned calendar; every day owns a seed
derived from its date, so any day can be regenerated on its own.
"""

import json
from datetime import date as Date
from datetime import timedelta
from pathlib import Path
from typing import Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import ConfigError
from src.state.models import DayCollection, DayRecord, GridSpec, Weekday
from src.state.seeds import make_rng
from src.workers import ordered_map

logger = structlog.get_logger()

WORKDAYS = [Weekday.MON, Weekday.TUE, Weekday.WED, Weekday.THU, Weekday.FRI]
WEEKEND = [Weekday.SAT, Weekday.SUN]
SUMMER = [6, 7, 8]
NON_SUMMER = [1, 2, 3, 4, 5, 9, 10, 11, 12]


class DayTypeSpec(BaseModel):
    """One planted day type."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    label: str
    weekdays: list[Weekday]
    months: list[int]
    amplitude: float = Field(gt=0, description="Peak full-grid presence, people")
    floor: float = Field(default=0.63, gt=0, lt=1, description="Night level relative to the peak")
    morning_peak_hour: float = 10.5
    afternoon_peak_hour: float = 16.0
    peak_width_hours: float = Field(default=2.0, gt=0)
    afternoon_weight: float = Field(default=0.85, ge=0)
    blob_weights: list[float]
    tiers: dict[int, float] = Field(
        default_factory=dict, description="Month -> amplitude multiplier (sub-groups)"
    )

    def amplitude_for(self, month: int) -> float:
        return self.amplitude * self.tiers.get(month, 1.0)

    def subgroup_for(self, month: int) -> Optional[str]:
        return f"{self.label}/{month:02d}" if month in self.tiers else None


def _weights(main: list[int], n_blobs: int = 5, high: float = 1.0, low: float = 0.15) -> list[float]:
    return [high if i in main else low for i in range(n_blobs)]


def default_day_types() -> list[DayTypeSpec]:
    """Six types: three workday seasons, Saturday, Sunday and summer weekends.

    Summer weekends light every corner blob, so they sit apart from each
    single-blob type in most HOG blocks.
    """
    return [
        DayTypeSpec(
            label="weekday-cold", weekdays=WORKDAYS, months=[1, 2, 3, 10, 11, 12],
            amplitude=58e3, blob_weights=_weights([0]),
        ),
        DayTypeSpec(
            label="weekday-mild", weekdays=WORKDAYS, months=[4, 5, 9],
            amplitude=55e3, blob_weights=_weights([1]),
        ),
        DayTypeSpec(
            label="weekday-summer", weekdays=WORKDAYS, months=SUMMER,
            amplitude=56e3, blob_weights=_weights([2]), tiers={6: 1.0, 7: 0.89, 8: 0.80},
        ),
        DayTypeSpec(
            label="saturday", weekdays=[Weekday.SAT], months=NON_SUMMER,
            amplitude=50e3, floor=0.65, blob_weights=_weights([3]),
        ),
        DayTypeSpec(
            label="sunday", weekdays=[Weekday.SUN], months=NON_SUMMER,
            amplitude=44e3, floor=0.65, afternoon_weight=1.0, blob_weights=_weights([4]),
        ),
        DayTypeSpec(
            label="weekend-summer", weekdays=WEEKEND, months=SUMMER,
            amplitude=42e3, floor=0.65, afternoon_weight=1.0, blob_weights=_weights([0, 1, 3, 4]),
        ),
    ]


class SynthConfig(BaseModel):
    """Synthetic city and calendar."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid: GridSpec = Field(default_factory=GridSpec)
    start_date: Date = Date(2015, 9, 1)
    end_date: Date = Date(2016, 8, 11)
    n_days: int = Field(default=330, ge=1, description="Days kept, evenly spread over the span")
    day_types: list[DayTypeSpec] = Field(default_factory=default_day_types)
    blob_centers: list[tuple[float, float]] = Field(
        default=[(0.15, 0.15), (0.15, 0.82), (0.5, 0.5), (0.82, 0.15), (0.82, 0.82)],
        description="Blob centers as fractions of the grid rows and cols",
    )
    blob_width: float = Field(default=0.1, gt=0, description="Blob sigma as a fraction of grid rows")
    background: float = Field(default=0.05, ge=0, description="Uniform share under the blobs")
    noise_sigma: float = Field(default=0.05, ge=0, description="Lognormal cell noise")
    quarter_sigma: float = Field(default=0.01, ge=0, description="Lognormal noise shared by a snapshot")
    day_sigma: float = Field(default=0.005, ge=0, description="Lognormal noise shared by a day")
    missing_prob: float = Field(default=0.01, ge=0, le=1, description="Chance a snapshot is lost")
    n_outliers: int = Field(default=2, ge=0)
    outlier_type: str = "weekday-summer"
    shock_magnitude: float = Field(default=1.35, gt=0)
    n_outage_days: int = Field(default=0, ge=0, description="Days losing a long block of quarters")
    outage_quarters: int = Field(default=32, ge=1)
    seed: int = Field(default=7, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "SynthConfig":
        seen: dict[tuple[Weekday, int], str] = {}
        for t in self.day_types:
            if len(t.blob_weights) != len(self.blob_centers):
                raise ValueError(f"type {t.label}: {len(t.blob_weights)} blob weights for {self.n_blobs} blobs")
            if not set(t.tiers) <= set(t.months):
                raise ValueError(f"type {t.label}: tier months outside its months")
            for w in t.weekdays:
                for m in t.months:
                    if (w, m) in seen:
                        raise ValueError(f"({w.value}, {m}) claimed by {seen[(w, m)]} and {t.label}")
                    seen[(w, m)] = t.label
        missing = [(w.value, m) for w in Weekday for m in range(1, 13) if (w, m) not in seen]
        if missing:
            raise ValueError(f"no day type covers {missing[0]}")
        span = (self.end_date - self.start_date).days + 1
        if span < 1 or self.n_days > span:
            raise ValueError(f"n_days {self.n_days} exceeds the {max(span, 0)} days between dates")
        if self.n_outliers and self.outlier_type not in {t.label for t in self.day_types}:
            raise ValueError(f"outlier_type {self.outlier_type} is not a day type")
        if self.outage_quarters > self.grid.quarters_per_day:
            raise ValueError("outage_quarters exceeds quarters per day")
        return self

    @property
    def n_blobs(self) -> int:
        return len(self.blob_centers)

    def type_for(self, day: Date) -> DayTypeSpec:
        weekday = Weekday.from_date(day)
        for t in self.day_types:
            if weekday in t.weekdays and day.month in t.months:
                return t
        raise ConfigError(f"no day type covers {day}")


class GroundTruth(BaseModel):
    """Planted labels of a synthetic collection."""

    day_types: dict[str, str]
    subgroups: dict[str, str] = Field(description="day_id -> tier label, for tiered types only")
    outlier_day_ids: list[str]
    outage_day_ids: list[str]
    seed: int

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.model_dump(), indent=2) + "\n")

    @classmethod
    def read(cls, path: Path) -> "GroundTruth":
        return cls.model_validate_json(path.read_text())


def _spread(items: list, count: int) -> list:
    """``count`` items evenly spread inside the list, avoiding its ends."""
    if count <= 0 or not items:
        return []
    positions = np.round(np.linspace(0, len(items) - 1, count + 2)[1:-1]).astype(int)
    return [items[i] for i in sorted(set(positions.tolist()))]


class SyntheticCity:
    """Precomputed spatial fields and profiles of a SynthConfig."""

    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        self.fields = {t.label: self._field(t) for t in cfg.day_types}
        self.profiles = {t.label: self._profile(t) for t in cfg.day_types}

    def _field(self, day_type: DayTypeSpec) -> np.ndarray:
        n_rows, n_cols = self.cfg.grid.shape
        rows, cols = np.mgrid[0:n_rows, 0:n_cols]
        sigma = self.cfg.blob_width * n_rows
        field = np.full((n_rows, n_cols), self.cfg.background / (n_rows * n_cols))
        blobs = np.zeros((n_rows, n_cols))
        for (fr, fc), weight in zip(self.cfg.blob_centers, day_type.blob_weights):
            r0, c0 = fr * (n_rows - 1), fc * (n_cols - 1)
            blobs += weight * np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2 * sigma**2))
        if blobs.sum() > 0:
            field += (1 - self.cfg.background) * blobs / blobs.sum()
        return field / field.sum()

    def _profile(self, day_type: DayTypeSpec) -> np.ndarray:
        """Relative presence per quarter, floor at night and 1 at the main peak."""
        n_q = self.cfg.grid.quarters_per_day
        hours = (np.arange(n_q) + 0.5) * 24.0 / n_q
        width = 2 * day_type.peak_width_hours**2
        bump = np.exp(-((hours - day_type.morning_peak_hour) ** 2) / width)
        bump += day_type.afternoon_weight * np.exp(-((hours - day_type.afternoon_peak_hour) ** 2) / width)
        bump /= bump.max()
        return day_type.floor + (1 - day_type.floor) * bump

    def calendar(self) -> list[Date]:
        span = (self.cfg.end_date - self.cfg.start_date).days + 1
        offsets = np.round(np.linspace(0, span - 1, self.cfg.n_days)).astype(int)
        return [self.cfg.start_date + timedelta(days=int(o)) for o in np.unique(offsets)]

    def expected_ddp(self, day: Date) -> np.ndarray:
        """Noise-free full-grid profile of a regular day."""
        day_type = self.cfg.type_for(day)
        mass = self.fields[day_type.label].sum()
        return day_type.amplitude_for(day.month) * self.profiles[day_type.label] * mass

    def day(self, day: Date, shocked: bool = False, outage: bool = False) -> DayRecord:
        cfg = self.cfg
        day_id = day.isoformat()
        day_type = cfg.type_for(day)
        rng = make_rng(cfg.seed, "synth", day_id)
        n_q, (n_rows, n_cols) = cfg.grid.quarters_per_day, cfg.grid.shape

        day_noise = np.exp(cfg.day_sigma * rng.standard_normal() - cfg.day_sigma**2 / 2)
        quarter_noise = np.exp(cfg.quarter_sigma * rng.standard_normal(n_q) - cfg.quarter_sigma**2 / 2)
        cell_noise = np.exp(
            cfg.noise_sigma * rng.standard_normal((n_q, n_rows, n_cols)) - cfg.noise_sigma**2 / 2
        )
        lost = rng.random(n_q) < cfg.missing_prob
        outage_start = int(rng.integers(0, n_q - cfg.outage_quarters + 1))

        amplitude = day_type.amplitude_for(day.month) * day_noise
        if shocked:
            amplitude *= cfg.shock_magnitude
        profile = self.profiles[day_type.label] * quarter_noise
        values = amplitude * profile[:, None, None] * self.fields[day_type.label][None] * cell_noise

        mask = np.ones_like(values, dtype=bool)
        mask[lost] = False
        if outage:
            mask[outage_start:outage_start + cfg.outage_quarters] = False
        values[~mask] = 0.0
        return DayRecord.from_arrays(day_id, day, values, mask)


def generate(cfg: SynthConfig, workers: int = 1) -> tuple[DayCollection, GroundTruth]:
    """Generate the synthetic collection and its ground truth.

    Outlier days are spread over the days of ``outlier_type``; outage days
    over the remaining days. Output is ordered by date.
    """
    city = SyntheticCity(cfg)
    dates = city.calendar()
    by_type: dict[str, list[Date]] = {}
    for d in dates:
        by_type.setdefault(cfg.type_for(d).label, []).append(d)

    shocked = set(_spread(by_type.get(cfg.outlier_type, []), cfg.n_outliers))
    regular = [d for d in dates if d not in shocked]
    outages = set(_spread(regular, cfg.n_outage_days))

    days = ordered_map(lambda d: city.day(d, d in shocked, d in outages), dates, workers)
    truth = GroundTruth(
        day_types={d.isoformat(): cfg.type_for(d).label for d in dates},
        subgroups={
            d.isoformat(): sub
            for d in dates
            if (sub := cfg.type_for(d).subgroup_for(d.month)) is not None
        },
        outlier_day_ids=sorted(d.isoformat() for d in shocked),
        outage_day_ids=sorted(d.isoformat() for d in outages),
        seed=cfg.seed,
    )
    provenance = (
        f"synthetic seed={cfg.seed} grid={cfg.grid.n_rows}x{cfg.grid.n_cols} "
        f"cell={cfg.grid.cell_size_m:g}m days={len(days)}"
    )
    logger.info("synthetic city generated", days=len(days), outliers=len(shocked), outages=len(outages))
    return DayCollection(spec=cfg.grid, days=tuple(days), provenance=provenance), truth

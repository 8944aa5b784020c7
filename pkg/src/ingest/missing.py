"""Missing-data policy: bounded gap interpolation and day dropping."""

from typing import Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from src.state.models import DayCollection, DayRecord
from src.workers import ordered_map

logger = structlog.get_logger()


class MissingPolicy(BaseModel):
    """How unobserved cells are repaired or their days discarded."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_gap_quarters: int = Field(
        default=4, ge=0, description="Longest run of missing quarters filled by interpolation"
    )
    drop_fraction: float = Field(
        default=0.10,
        ge=0.0,
        le=1.0,
        description="Drop a day when more than this fraction of cell-quarters stays missing",
    )


class IngestReport(BaseModel):
    """Accounting of the missing-data stage."""

    days_read: int = Field(ge=0)
    days_kept: int = Field(ge=0)
    days_dropped: int = Field(ge=0)
    interpolated_cells: int = Field(default=0, ge=0, description="Cell-quarters filled in kept days")
    residual_filled_cells: int = Field(
        default=0, ge=0, description="Cell-quarters of kept days filled beyond the gap limit"
    )
    dropped_day_ids: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _conserved(self) -> "IngestReport":
        if self.days_read != self.days_kept + self.days_dropped:
            raise ValueError("days_read must equal days_kept + days_dropped")
        if len(self.dropped_day_ids) != self.days_dropped:
            raise ValueError("dropped_day_ids must list every dropped day")
        return self


class _Repair(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    day: Optional[DayRecord]
    day_id: str
    interpolated: int = 0
    residual: int = 0
    missing_fraction: float = 0.0


def fill_time_gaps(
    values: np.ndarray, mask: np.ndarray, max_gap: Optional[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Fill missing entries along axis 0 of a (Q, N) series matrix.

    Interior gaps become the straight line between the bounding observations;
    leading and trailing gaps take the nearest observation. Gaps longer than
    ``max_gap`` (None means unbounded) and series never observed stay missing.
    Observed entries are never modified.

    Returns:
        (filled values, new mask)
    """
    n_q = values.shape[0]
    t = np.arange(n_q)[:, None]
    prev_obs = np.maximum.accumulate(np.where(mask, t, -1), axis=0)
    next_obs = np.flip(
        np.minimum.accumulate(np.flip(np.where(mask, t, n_q), axis=0), axis=0), axis=0
    )

    has_prev = prev_obs >= 0
    has_next = next_obs < n_q
    prev_val = np.take_along_axis(values, np.clip(prev_obs, 0, n_q - 1), axis=0)
    next_val = np.take_along_axis(values, np.clip(next_obs, 0, n_q - 1), axis=0)

    interior = has_prev & has_next
    gap_len = np.where(
        interior,
        next_obs - prev_obs - 1,
        np.where(has_next, next_obs, n_q - 1 - prev_obs),
    )
    span = np.where(interior, next_obs - prev_obs, 1)
    # observed entries have prev == next; only true gaps get a slope
    slope = np.divide(
        next_val - prev_val, span, out=np.zeros_like(values, dtype=float), where=interior & ~mask
    )
    line = prev_val + (t - prev_obs) * slope
    estimate = np.where(interior, line, np.where(has_next, next_val, prev_val))

    fillable = ~mask & (has_prev | has_next)
    if max_gap is not None:
        fillable &= gap_len <= max_gap

    filled = np.where(fillable, estimate, values)
    return filled, mask | fillable


def _fill_unobserved_cells(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Give cells never observed during the day the series of their nearest observed cell."""
    observed_cells = mask.all(axis=0)
    if observed_cells.all():
        return values
    _, (near_r, near_c) = ndimage.distance_transform_edt(~observed_cells, return_indices=True)
    filled = values.copy()
    hole = ~observed_cells
    filled[:, hole] = values[:, near_r[hole], near_c[hole]]
    return filled


def _repair_day(day: DayRecord, policy: MissingPolicy) -> _Repair:
    mask = day.mask_cube()
    if mask.all():
        return _Repair(day=day, day_id=day.day_id)
    if not mask.any():
        return _Repair(day=None, day_id=day.day_id, missing_fraction=1.0)

    n_q, n_r, n_c = mask.shape
    values = day.values_cube().reshape(n_q, -1)
    flat_mask = mask.reshape(n_q, -1)

    bounded, bounded_mask = fill_time_gaps(values, flat_mask, policy.max_gap_quarters)
    interpolated = int(bounded_mask.sum() - flat_mask.sum())
    missing_fraction = float((~bounded_mask).mean())
    if missing_fraction > policy.drop_fraction:
        return _Repair(day=None, day_id=day.day_id, missing_fraction=missing_fraction)

    residual = int((~bounded_mask).sum())
    if residual:
        unbounded, unbounded_mask = fill_time_gaps(bounded, bounded_mask, None)
        cube = _fill_unobserved_cells(
            unbounded.reshape(n_q, n_r, n_c), unbounded_mask.reshape(n_q, n_r, n_c)
        )
    else:
        cube = bounded.reshape(n_q, n_r, n_c)

    repaired = DayRecord.from_arrays(day.day_id, day.date, cube, np.ones_like(mask))
    return _Repair(
        day=repaired,
        day_id=day.day_id,
        interpolated=interpolated,
        residual=residual,
        missing_fraction=missing_fraction,
    )


def handle_missing(
    data: DayCollection, policy: MissingPolicy, workers: int = 1
) -> tuple[DayCollection, IngestReport]:
    """Apply the missing-data policy to every day.

    Gaps of at most ``max_gap_quarters`` consecutive missing quarters in a
    cell are interpolated. A day whose remaining missing fraction exceeds
    ``drop_fraction`` (or that has no observation at all) is dropped. The
    few entries a kept day still lacks are filled by unbounded interpolation
    and, for cells never observed, from the nearest observed cell, so every
    kept day leaves fully observed and a second application changes nothing.

    Returns:
        (kept days ordered by day_id, report)
    """
    repairs = ordered_map(lambda day: _repair_day(day, policy), data.days, workers)

    kept = sorted((r for r in repairs if r.day is not None), key=lambda r: r.day_id)
    dropped = sorted(r.day_id for r in repairs if r.day is None)
    for r in repairs:
        if r.day is None:
            logger.info("day dropped", day_id=r.day_id, missing_fraction=round(r.missing_fraction, 4))

    report = IngestReport(
        days_read=len(repairs),
        days_kept=len(kept),
        days_dropped=len(dropped),
        interpolated_cells=sum(r.interpolated for r in kept),
        residual_filled_cells=sum(r.residual for r in kept),
        dropped_day_ids=dropped,
    )
    logger.info(
        "missing data handled",
        days_kept=report.days_kept,
        days_dropped=report.days_dropped,
        interpolated_cells=report.interpolated_cells,
    )
    return data.with_days(r.day for r in kept), report

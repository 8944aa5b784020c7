"""Distribution of day clusters over months and weekdays."""

from typing import Mapping

import pandas as pd
from pydantic import BaseModel, Field

from src.errors import ArgumentError
from src.state.models import DayCollection, Weekday


class CalendarTable(BaseModel):
    """Day counts per (cluster, month) and per (cluster, weekday)."""

    by_month: dict[int, dict[int, int]] = Field(description="label -> month -> days")
    by_weekday: dict[int, dict[str, int]] = Field(description="label -> weekday -> days")

    def to_frame(self) -> pd.DataFrame:
        """Long table with one row per (label, dimension, key)."""
        rows = []
        for label, months in self.by_month.items():
            rows.extend(
                {"label": label, "dimension": "month", "key": str(m), "days": n}
                for m, n in months.items()
            )
        for label, weekdays in self.by_weekday.items():
            rows.extend(
                {"label": label, "dimension": "weekday", "key": w, "days": n}
                for w, n in weekdays.items()
            )
        return pd.DataFrame(rows, columns=["label", "dimension", "key", "days"])


def calendar_table(collection: DayCollection, assignments: Mapping[str, int]) -> CalendarTable:
    """Cross-tabulate cluster labels against the calendar of their days.

    Every assigned day must belong to the collection; days without a label
    are ignored.
    """
    by_id = {d.day_id: d for d in collection.days}
    unknown = [d for d in assignments if d not in by_id]
    if unknown:
        raise ArgumentError(f"assigned day {unknown[0]} is not in the collection")

    frame = pd.DataFrame(
        [
            {
                "label": int(label),
                "month": by_id[day_id].month,
                "weekday": by_id[day_id].weekday.value,
            }
            for day_id, label in assignments.items()
        ],
        columns=["label", "month", "weekday"],
    )
    months = pd.crosstab(frame["label"], frame["month"])
    weekdays = pd.crosstab(frame["label"], frame["weekday"]).reindex(
        columns=[w.value for w in Weekday], fill_value=0
    )
    return CalendarTable(
        by_month={
            int(label): {int(m): int(n) for m, n in row.items() if n}
            for label, row in months.iterrows()
        },
        by_weekday={
            int(label): {str(w): int(n) for w, n in row.items() if n}
            for label, row in weekdays.iterrows()
        },
    )

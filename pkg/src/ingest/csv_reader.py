"""Long-format CSV reading and writing of grid counts.

Schema (UTF-8, LF or CRLF): ``day_id,date,quarter,row,col,value`` with
zero-based quarter/row/col. A cell absent from the file is an unobserved cell.
"""

from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
import pandas as pd
import structlog

from src.errors import DataError
from src.state.models import DayCollection, DayRecord, GridSpec

logger = structlog.get_logger()

EXPECTED_COLUMNS = ["day_id", "date", "quarter", "row", "col", "value"]
FLOAT_FORMAT = "%.17g"

Source = Union[str, Path, BinaryIO]


def parse_long_csv(source: Source, spec: GridSpec, provenance: str = "") -> DayCollection:
    """Parse the long CSV schema into a DayCollection.

    Args:
        source: Path or binary stream with the CSV text
        spec: Grid the rows must fit
        provenance: Free-text source note stored on the collection; the grid's
            extent, when set, is appended verbatim

    Returns:
        One DayRecord per distinct day_id, ordered by day_id; masks are False
        exactly where no row was present

    Raises:
        DataError: malformed field (with line number), out-of-range index,
            duplicate (day, quarter, row, col) or inconsistent date
    """
    try:
        frame = pd.read_csv(
            source,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise DataError("input is empty; expected header " + ",".join(EXPECTED_COLUMNS))
    except pd.errors.ParserError as e:
        raise DataError(f"malformed CSV: {e}")
    except UnicodeDecodeError as e:
        raise DataError(f"input is not UTF-8: {e}")

    columns = [c.strip() for c in frame.columns]
    if columns != EXPECTED_COLUMNS:
        raise DataError(f"bad header {columns}; expected {EXPECTED_COLUMNS}", line=1)
    frame.columns = columns

    quarter = _parse_numeric(frame, "quarter", integer=True)
    row = _parse_numeric(frame, "row", integer=True)
    col = _parse_numeric(frame, "col", integer=True)
    value = _parse_numeric(frame, "value", integer=False)

    _check_range(quarter, "quarter", spec.quarters_per_day)
    _check_range(row, "row", spec.n_rows)
    _check_range(col, "col", spec.n_cols)
    negative = np.flatnonzero(value < 0)
    if negative.size:
        line = int(negative[0]) + 2
        raise DataError(f"line {line}: negative count {value[negative[0]]}", line=line)

    day_ids = frame["day_id"].str.strip()
    empty_ids = np.flatnonzero((day_ids == "").to_numpy())
    if empty_ids.size:
        line = int(empty_ids[0]) + 2
        raise DataError(f"line {line}: empty day_id", line=line)

    dates = pd.to_datetime(frame["date"].str.strip(), format="%Y-%m-%d", errors="coerce")
    bad_dates = np.flatnonzero(dates.isna().to_numpy())
    if bad_dates.size:
        line = int(bad_dates[0]) + 2
        raise DataError(f"line {line}: malformed date {frame['date'].iloc[bad_dates[0]]!r}", line=line)

    keys = pd.DataFrame({"day_id": day_ids, "quarter": quarter, "row": row, "col": col})
    duplicated = np.flatnonzero(keys.duplicated(keep="first").to_numpy())
    if duplicated.size:
        line = int(duplicated[0]) + 2
        raise DataError(f"line {line}: duplicate (day, quarter, row, col)", line=line)

    codes, uniques = pd.factorize(day_ids, sort=True)
    order = np.argsort(codes, kind="stable")
    bounds = np.searchsorted(codes[order], np.arange(len(uniques) + 1))

    shape = (spec.quarters_per_day, spec.n_rows, spec.n_cols)
    days = []
    for code, day_id in enumerate(uniques):
        rows = order[bounds[code]:bounds[code + 1]]
        day_dates = dates.iloc[rows].dt.date.unique()
        if len(day_dates) != 1:
            raise DataError(f"day {day_id} carries {len(day_dates)} different dates")
        cube = np.zeros(shape)
        mask = np.zeros(shape, dtype=bool)
        cube[quarter[rows], row[rows], col[rows]] = value[rows]
        mask[quarter[rows], row[rows], col[rows]] = True
        days.append(DayRecord.from_arrays(str(day_id), day_dates[0], cube, mask))

    if spec.extent:
        provenance = f"{provenance} [extent: {spec.extent}]".strip()
    logger.info("parsed long csv", rows=len(frame), days=len(days))
    return DayCollection(spec=spec, days=tuple(days), provenance=provenance)


def write_long_csv(collection: DayCollection, dest: Union[str, Path, BinaryIO]) -> None:
    """Write the observed cells of a collection in the long CSV schema.

    Floats are written with 17 significant digits so that parsing the output
    reproduces every value bit for bit.
    """
    frames = []
    for day in collection.days:
        q, r, c = np.nonzero(day.mask_cube())
        frames.append(
            pd.DataFrame(
                {
                    "day_id": day.day_id,
                    "date": day.date.isoformat(),
                    "quarter": q,
                    "row": r,
                    "col": c,
                    "value": day.values_cube()[q, r, c],
                }
            )
        )
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=EXPECTED_COLUMNS)
    frame.to_csv(dest, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _parse_numeric(frame: pd.DataFrame, column: str, integer: bool) -> np.ndarray:
    """Parse a numeric column, failing on the first malformed line."""
    raw = frame[column].str.strip()
    try:
        # correctly rounded, so written values parse back bit-exact
        parsed = raw.to_numpy(dtype=object).astype(float)
    except ValueError:
        parsed = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(parsed)
    if integer:
        bad |= np.isfinite(parsed) & (parsed != np.floor(parsed))
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        line = index + 2
        raise DataError(f"line {line}: malformed {column} {raw.iloc[index]!r}", line=line)
    return parsed.astype(np.int64) if integer else parsed


def _check_range(values: np.ndarray, column: str, upper: int) -> None:
    out = np.flatnonzero((values < 0) | (values >= upper))
    if out.size:
        line = int(out[0]) + 2
        raise DataError(
            f"line {line}: {column}={values[out[0]]} outside [0, {upper})", line=line
        )

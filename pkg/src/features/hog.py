"""Histogram-of-oriented-gradients descriptors of presence grids.

A snapshot is treated as a grayscale image. Gradient orientation is unsigned
(folded into [0, 180) degrees), so rotating a grid by 180 degrees permutes
blocks and cells but leaves every cell histogram unchanged.
"""

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import ArgumentError, DataError
from src.state.models import DayCollection, DayRecord, GridSnapshot, GridSpec, frozen_array
from src.workers import ordered_map

logger = structlog.get_logger()


class HogParams(BaseModel):
    """Cell, bin and block layout of the descriptor."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cell_rows: int = Field(default=13, ge=1, description="Grid rows per HOG cell")
    cell_cols: int = Field(default=13, ge=1, description="Grid columns per HOG cell")
    n_bins: int = Field(default=9, ge=1, description="Orientation bins over [0, 180) degrees")
    block_cells: int = Field(default=2, ge=1, description="Block side, in HOG cells")
    block_stride_cells: int = Field(default=1, ge=1, description="Block step, in HOG cells")
    norm_epsilon: float = Field(default=0.0, ge=0.0, description="L2 block norm regularizer")

    def problems(self, n_rows: int, n_cols: int) -> list[tuple[str, str]]:
        """(field, message) pairs for layouts the grid cannot host."""
        found = []
        if n_rows % self.cell_rows:
            found.append(("cell_rows", f"{self.cell_rows} does not divide grid rows {n_rows}"))
        if n_cols % self.cell_cols:
            found.append(("cell_cols", f"{self.cell_cols} does not divide grid cols {n_cols}"))
        if not found:
            cells_r, cells_c = n_rows // self.cell_rows, n_cols // self.cell_cols
            if self.block_cells > min(cells_r, cells_c):
                found.append(
                    ("block_cells", f"block of {self.block_cells} cells exceeds {cells_r}x{cells_c} cells")
                )
        return found

    def check(self, n_rows: int, n_cols: int) -> None:
        """Raise ArgumentError when the grid cannot host the layout."""
        found = self.problems(n_rows, n_cols)
        if found:
            raise ArgumentError("; ".join(f"hog.{key}: {msg}" for key, msg in found))

    def n_blocks(self, n_rows: int, n_cols: int) -> tuple[int, int]:
        cells_r, cells_c = n_rows // self.cell_rows, n_cols // self.cell_cols
        return (
            (cells_r - self.block_cells) // self.block_stride_cells + 1,
            (cells_c - self.block_cells) // self.block_stride_cells + 1,
        )


def hog_dimension(spec: GridSpec, params: HogParams) -> int:
    """Length of one snapshot descriptor; a day vector is Q times this."""
    params.check(spec.n_rows, spec.n_cols)
    blocks_r, blocks_c = params.n_blocks(spec.n_rows, spec.n_cols)
    return blocks_r * blocks_c * params.block_cells**2 * params.n_bins


def _hog_stack(cube: np.ndarray, params: HogParams) -> np.ndarray:
    """Descriptors of a (Q, rows, cols) stack of fully observed grids, shape (Q, D)."""
    n_q, n_rows, n_cols = cube.shape
    padded = np.pad(cube, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = padded[:, 1:-1, 2:] - padded[:, 1:-1, :-2]
    gy = padded[:, 2:, 1:-1] - padded[:, :-2, 1:-1]

    # fold into the upper half plane
    flip = (gy < 0) | ((gy == 0) & (gx < 0))
    gx = np.where(flip, -gx, gx)
    gy = np.where(flip, -gy, gy)
    magnitude = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx))
    bins = np.floor(angle / (180.0 / params.n_bins)).astype(np.int64) % params.n_bins

    cells_r, cells_c = n_rows // params.cell_rows, n_cols // params.cell_cols
    hist = np.empty((n_q, cells_r, cells_c, params.n_bins))
    for b in range(params.n_bins):
        weighted = np.where(bins == b, magnitude, 0.0)
        hist[..., b] = weighted.reshape(
            n_q, cells_r, params.cell_rows, cells_c, params.cell_cols
        ).sum(axis=(2, 4))

    side, step = params.block_cells, params.block_stride_cells
    blocks = []
    for r0 in range(0, cells_r - side + 1, step):
        for c0 in range(0, cells_c - side + 1, step):
            block = hist[:, r0:r0 + side, c0:c0 + side, :].reshape(n_q, -1)
            norm = np.sqrt((block**2).sum(axis=1) + params.norm_epsilon**2)
            safe = np.where(norm > 0, norm, 1.0)
            blocks.append(np.where(norm[:, None] > 0, block / safe[:, None], 0.0))
    return np.concatenate(blocks, axis=1)


def compute_snapshot_hog(snapshot: GridSnapshot, params: HogParams) -> np.ndarray:
    """Descriptor of one fully observed snapshot.

    Raises:
        ArgumentError: grid not divisible by the cell size, or block larger
            than the cell layout
        DataError: the snapshot has unobserved cells
    """
    n_rows, n_cols = snapshot.values.shape
    params.check(n_rows, n_cols)
    if not snapshot.fully_observed:
        raise DataError(
            f"day {snapshot.day_id} quarter {snapshot.quarter} has unobserved cells",
            quarter=snapshot.quarter,
        )
    return _hog_stack(np.asarray(snapshot.values)[None], params)[0]


class DayFeatureVector(BaseModel):
    """Quarter-ordered concatenation of a day's snapshot descriptors."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    day_id: str
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _array(cls, v) -> np.ndarray:
        return frozen_array(v, np.float64)


class FeatureMatrix(BaseModel):
    """Feature vectors of all days as columns of a (D, n) matrix."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    day_ids: tuple[str, ...]
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _array(cls, v) -> np.ndarray:
        arr = frozen_array(v, np.float64)
        if arr.ndim != 2:
            raise ValueError("feature matrix must be 2-D (D, n_days)")
        return arr

    @model_validator(mode="after")
    def _check(self) -> "FeatureMatrix":
        if self.values.shape[1] != len(self.day_ids):
            raise ValueError(f"{len(self.day_ids)} day_ids for {self.values.shape[1]} columns")
        if len(set(self.day_ids)) != len(self.day_ids):
            raise ValueError("day_ids must be unique")
        return self

    def __len__(self) -> int:
        return len(self.day_ids)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    def samples(self) -> np.ndarray:
        """Day-major (n, D) copy, one row per day."""
        return np.ascontiguousarray(self.values.T)

    def column(self, day_id: str) -> np.ndarray:
        return self.values[:, self.day_ids.index(day_id)]


def build_day_vector(day: DayRecord, params: HogParams) -> DayFeatureVector:
    """Concatenate the Q snapshot descriptors of a fully observed day.

    Raises:
        DataError: naming the first quarter with unobserved cells
    """
    n_rows, n_cols = day.shape
    params.check(n_rows, n_cols)
    unobserved = day.unobserved_quarters()
    if unobserved:
        raise DataError(
            f"day {day.day_id} quarter {unobserved[0]} has unobserved cells",
            quarter=unobserved[0],
        )
    return DayFeatureVector(
        day_id=day.day_id, values=_hog_stack(day.values_cube(), params).reshape(-1)
    )


def build_feature_matrix(
    data: DayCollection, params: HogParams, workers: int = 1
) -> FeatureMatrix:
    """Feature matrix with one column per day, in collection order."""
    if len(data) == 0:
        raise DataError("no days to describe")
    params.check(data.spec.n_rows, data.spec.n_cols)
    vectors = ordered_map(lambda day: build_day_vector(day, params), data.days, workers)
    matrix = np.stack([v.values for v in vectors], axis=1)
    logger.info("feature matrix built", dimension=matrix.shape[0], days=matrix.shape[1])
    return FeatureMatrix(day_ids=tuple(v.day_id for v in vectors), values=matrix)

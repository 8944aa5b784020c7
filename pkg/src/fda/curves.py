"""Daily density profiles and their Fourier smoothing."""

from functools import cached_property
from typing import Iterable, Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import ArgumentError, DataError
from src.state.models import Curve, CurveSet, DayRecord, RegionOfInterest, frozen_array

logger = structlog.get_logger()


def extract_ddp(day: DayRecord, roi: RegionOfInterest) -> Curve:
    """People inside ``roi`` for each quarter of a fully observed day.

    Raises:
        ArgumentError: roi outside the grid
        DataError: the day has unobserved cells
    """
    n_rows, n_cols = day.shape
    if not roi.fits(n_rows, n_cols):
        raise ArgumentError(
            f"roi rows {roi.row_range} cols {roi.col_range} outside {n_rows}x{n_cols} grid"
        )
    unobserved = day.unobserved_quarters()
    if unobserved:
        raise DataError(
            f"day {day.day_id} quarter {unobserved[0]} has unobserved cells",
            quarter=unobserved[0],
        )
    rows, cols = roi.slices
    return Curve(day_id=day.day_id, values=day.values_cube()[:, rows, cols].sum(axis=(1, 2)))


def extract_ddps(days: Iterable[DayRecord], roi: RegionOfInterest, n_points: Optional[int] = None) -> CurveSet:
    """DDPs of several days, in the given order."""
    return CurveSet.from_curves((extract_ddp(day, roi) for day in days), n_points=n_points)


class FourierBasis(BaseModel):
    """Orthonormal Fourier basis sampled at the Q quarter midpoints of [0, 1)."""

    model_config = ConfigDict(frozen=True)

    n_basis: int = Field(description="Odd number of basis functions d")
    n_points: int = Field(description="Samples per curve Q")

    @model_validator(mode="after")
    def _check(self) -> "FourierBasis":
        problem = _basis_problem(self.n_basis, self.n_points)
        if problem:
            raise ValueError(problem)
        return self

    @classmethod
    def build(cls, n_basis: int, n_points: int) -> "FourierBasis":
        """Construct, raising ArgumentError on an invalid size."""
        problem = _basis_problem(n_basis, n_points)
        if problem:
            raise ArgumentError(problem)
        return cls(n_basis=n_basis, n_points=n_points)

    @cached_property
    def sample_points(self) -> np.ndarray:
        return frozen_array((np.arange(self.n_points) + 0.5) / self.n_points, np.float64)

    @cached_property
    def design(self) -> np.ndarray:
        """(Q, d) matrix: 1, then sqrt(2) sin and cos pairs of rising frequency."""
        t = self.sample_points
        columns = [np.ones_like(t)]
        for m in range(1, (self.n_basis - 1) // 2 + 1):
            columns.append(np.sqrt(2.0) * np.sin(2 * np.pi * m * t))
            columns.append(np.sqrt(2.0) * np.cos(2 * np.pi * m * t))
        return frozen_array(np.column_stack(columns), np.float64)

    def evaluate(self, coefficients: np.ndarray) -> np.ndarray:
        """Curve values for coefficient vectors (d,) or (n, d)."""
        return np.asarray(coefficients) @ self.design.T


def _basis_problem(n_basis: int, n_points: int) -> Optional[str]:
    if n_basis < 1 or n_basis % 2 == 0:
        return f"n_basis must be a positive odd integer, got {n_basis}"
    if n_basis >= n_points:
        return f"n_basis {n_basis} must be smaller than the {n_points} samples per curve"
    return None


class SmoothedCurve(BaseModel):
    """Least-squares Fourier fit of one curve."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    day_id: str
    coefficients: np.ndarray
    fitted: np.ndarray
    residual_sse: float = Field(ge=0.0)

    @field_validator("coefficients", "fitted", mode="before")
    @classmethod
    def _array(cls, v) -> np.ndarray:
        return frozen_array(v, np.float64)


class SmoothedCurveSet(BaseModel):
    """Fits of a curve set on one basis, keyed by day_id."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    basis: FourierBasis
    curves: tuple[SmoothedCurve, ...]

    def __len__(self) -> int:
        return len(self.curves)

    @property
    def day_ids(self) -> tuple[str, ...]:
        return tuple(c.day_id for c in self.curves)

    def coefficient_matrix(self) -> np.ndarray:
        """(n, d) coefficients, one row per curve."""
        if not self.curves:
            return np.empty((0, self.basis.n_basis))
        return np.stack([c.coefficients for c in self.curves])

    @classmethod
    def from_coefficients(
        cls, basis: FourierBasis, day_ids: Iterable[str], coefficients: np.ndarray,
        observed: Optional[np.ndarray] = None,
    ) -> "SmoothedCurveSet":
        """Rebuild fits from stored coefficients; residuals need the observed curves."""
        coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1, basis.n_basis)
        fitted = basis.evaluate(coefficients)
        if observed is None:
            sse = np.zeros(len(coefficients))
        else:
            sse = ((np.asarray(observed) - fitted) ** 2).sum(axis=1)
        return cls(
            basis=basis,
            curves=tuple(
                SmoothedCurve(day_id=d, coefficients=c, fitted=f, residual_sse=float(s))
                for d, c, f, s in zip(day_ids, coefficients, fitted, sse)
            ),
        )


def smooth_curves(curves: CurveSet, basis: FourierBasis) -> SmoothedCurveSet:
    """Project every curve on the basis.

    The basis is orthonormal under the discrete inner product at the sample
    points, so the least-squares coefficients are ``design.T @ y / Q``.

    Raises:
        DataError: curve length differs from the basis sample count
    """
    if len(curves) and curves.n_points != basis.n_points:
        raise DataError(
            f"curves have {curves.n_points} points but the basis samples {basis.n_points}"
        )
    if not len(curves):
        return SmoothedCurveSet(basis=basis, curves=())
    coefficients = curves.values @ basis.design / basis.n_points
    result = SmoothedCurveSet.from_coefficients(basis, curves.day_ids, coefficients, curves.values)
    logger.debug("curves smoothed", n_curves=len(curves), n_basis=basis.n_basis)
    return result

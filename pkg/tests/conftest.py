"""Shared fixtures: small grids, hand-made days and reduced synthetic cities."""

from datetime import date as Date
from datetime import timedelta
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pytest

from src.config import settings
from src.config.pipeline import PipelineConfig
from src.state.models import DayCollection, DayRecord, GridSpec


@pytest.fixture(autouse=True)
def quiet_file_logging():
    """Keep test runs from writing log files."""
    original = settings.log_to_file
    settings.log_to_file = False
    yield
    settings.log_to_file = original


@pytest.fixture
def small_grid() -> GridSpec:
    """6x6 grid with 8 quarters per day."""
    return GridSpec(n_rows=6, n_cols=6, quarters_per_day=8)


@pytest.fixture
def make_day() -> Callable[..., DayRecord]:
    """Factory for a DayRecord from a (Q, rows, cols) cube."""

    def _make(
        day_id: str,
        values: np.ndarray,
        mask: Optional[np.ndarray] = None,
        date: Optional[Date] = None,
    ) -> DayRecord:
        values = np.asarray(values, dtype=float)
        if mask is None:
            mask = np.ones(values.shape, dtype=bool)
        return DayRecord.from_arrays(day_id, date or Date.fromisoformat(day_id), values, mask)

    return _make


@pytest.fixture
def make_collection(small_grid, make_day) -> Callable[..., DayCollection]:
    """Factory for a collection of random fully observed days on the small grid."""

    def _make(n_days: int = 3, seed: int = 0, start: Date = Date(2016, 6, 1)) -> DayCollection:
        rng = np.random.default_rng(seed)
        shape = (small_grid.quarters_per_day, small_grid.n_rows, small_grid.n_cols)
        days = [
            make_day((start + timedelta(days=i)).isoformat(), rng.uniform(1.0, 100.0, size=shape))
            for i in range(n_days)
        ]
        return DayCollection(spec=small_grid, days=tuple(days), provenance="fixture")

    return _make


def reduced_config_data(seed: int = 7) -> dict:
    """Config document for a small synthetic city that runs in seconds.

    26x26 grid (2x2 HOG cells of 13, one block), 24 quarters, 120 days.
    """
    return {
        "seed": seed,
        "grid": {"n_rows": 26, "n_cols": 26, "quarters_per_day": 24},
        "roi": {"row_range": [0, 25], "col_range": [0, 25]},
        "kmeans": {"k_range": [1, 8], "restarts": 4},
        "fda": {"n_basis": 7, "k_range": [2, 4], "restarts": 3, "max_iter": 100},
        "outliers": {"n_boot": 40, "max_passes": 3},
        "synth": {"n_days": 120, "outage_quarters": 8},
    }


@pytest.fixture(scope="session")
def reduced_config_doc() -> Callable[..., dict]:
    """Factory for fresh copies of the reduced config document."""
    return reduced_config_data


@pytest.fixture
def reduced_config() -> PipelineConfig:
    return PipelineConfig.model_validate(reduced_config_data())


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"

"""Modified band depth, bootstrap outlier trimming and functional boxplots."""

import math

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.errors import ArgumentError
from src.state.models import CurveSet, frozen_array
from src.state.seeds import make_rng
from src.workers import ordered_map

logger = structlog.get_logger()

MIN_OUTLIER_CURVES = 10


class DepthResult(BaseModel):
    """Modified band depth of each curve."""

    depths: dict[str, float]

    @field_validator("depths")
    @classmethod
    def _unit(cls, v: dict[str, float]) -> dict[str, float]:
        if any(not 0.0 <= d <= 1.0 for d in v.values()):
            raise ValueError("depths must lie in [0, 1]")
        return v


def band_depths(values: np.ndarray) -> np.ndarray:
    """Modified band depth (bands from pairs) of each row of an (n, Q) matrix.

    For every time point, the number of pairs whose band contains a curve is
    all pairs minus the pairs lying strictly below or strictly above it, with
    band boundaries inclusive.
    """
    n, n_points = values.shape
    below, above = _rank_counts(values)
    pairs = n * (n - 1) / 2
    inside = pairs - below * (below - 1) / 2 - above * (above - 1) / 2
    return inside.sum(axis=1) / (n_points * pairs)


def _rank_counts(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Curves strictly below and strictly above each curve, per time point."""
    n, n_points = values.shape
    ordered = np.sort(values, axis=0)
    below = np.empty((n, n_points))
    above = np.empty((n, n_points))
    for t in range(n_points):
        below[:, t] = np.searchsorted(ordered[:, t], values[:, t], side="left")
        above[:, t] = n - np.searchsorted(ordered[:, t], values[:, t], side="right")
    return below, above


def resample_depths(values: np.ndarray, parents: np.ndarray) -> np.ndarray:
    """Band depth of each resampled curve among the draws of other parents.

    The other copies of a curve are left out of its sample, so a parent drawn
    c times is scored as one curve among n - c + 1.
    """
    n, n_points = values.shape
    below, above = _rank_counts(values)
    _, group, sizes = np.unique(parents, return_inverse=True, return_counts=True)
    for g in np.flatnonzero(sizes > 1):
        members = np.flatnonzero(group == g)
        block = values[members]
        below[members] -= (block[None, :, :] < block[:, None, :]).sum(axis=1)
        above[members] -= (block[None, :, :] > block[:, None, :]).sum(axis=1)
    m = n - sizes[group] + 1
    pairs = np.maximum(m * (m - 1) / 2, 1.0)
    inside = pairs[:, None] - below * (below - 1) / 2 - above * (above - 1) / 2
    return inside.sum(axis=1) / (n_points * pairs)


def modified_band_depth(curves: CurveSet) -> DepthResult:
    """Depth of every curve among the set.

    Raises:
        ArgumentError: fewer than two curves
    """
    if len(curves) < 2:
        raise ArgumentError(f"band depth needs at least 2 curves, got {len(curves)}")
    depths = band_depths(np.asarray(curves.values))
    return DepthResult(depths={d: float(x) for d, x in zip(curves.day_ids, depths)})


class OutlierParams(BaseModel):
    """Depth-based trimming with a smoothed-bootstrap cutoff."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    trim_alpha: float = Field(
        default=0.10,
        gt=0.0,
        lt=0.5,
        description="Shallowest share kept out of the resampling pool; only it can be flagged",
    )
    smoothing_h: float = Field(default=0.05, gt=0.0, description="Bootstrap noise covariance scale")
    n_boot: int = Field(default=200, ge=1, description="Bootstrap resamples per pass")
    cutoff_percentile: float = Field(
        default=1.0, gt=0.0, le=10.0, description="Depth percentile taken in each resample"
    )
    max_passes: int = Field(default=5, ge=1)


class OutlierPass(BaseModel):
    """One trimming pass."""

    pass_index: int
    n_curves: int
    cutoff: float
    flagged: list[str]


class OutlierResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kept: CurveSet
    flagged: list[str]
    passes: list[OutlierPass]

    @property
    def cutoffs(self) -> list[float]:
        return [p.cutoff for p in self.passes]


def _bootstrap_cutoff(
    pool: np.ndarray, n: int, params: OutlierParams, seed: int, pass_index: int, workers: int
) -> float:
    n_points = pool.shape[1]
    if len(pool) > 1:
        cov = np.atleast_2d(np.cov(pool, rowvar=False))
    else:
        cov = np.zeros((n_points, n_points))
    eigvals, eigvecs = np.linalg.eigh(cov)
    root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None)) * math.sqrt(params.smoothing_h)

    def resample_cutoff(b: int) -> float:
        rng = make_rng(seed, "outliers", pass_index, b)
        picks = rng.integers(0, len(pool), size=n)
        noise = rng.standard_normal((n, n_points)) @ root.T
        depths = resample_depths(pool[picks] + noise, picks)
        return float(np.percentile(depths, params.cutoff_percentile))

    cutoffs = ordered_map(resample_cutoff, range(params.n_boot), workers)
    return float(np.median(cutoffs))


def detect_outliers(
    curves: CurveSet, params: OutlierParams, seed: int, workers: int = 1
) -> OutlierResult:
    """Iteratively trim curves whose depth falls below a bootstrap cutoff.

    Each pass computes band depths, draws ``n_boot`` resamples from the
    curves deeper than the ``trim_alpha`` quantile perturbed by Gaussian noise
    with covariance ``smoothing_h`` times their pointwise covariance, and
    takes the median over resamples of the ``cutoff_percentile`` depth
    percentile as the cutoff. Resampled depths ignore the other copies of the
    same curve. Curves outside the pool whose depth is below the cutoff are
    removed. Passes stop when nothing is flagged, after ``max_passes``, or
    once fewer than 10 curves remain.

    Raises:
        ArgumentError: fewer than 10 curves
    """
    if len(curves) < MIN_OUTLIER_CURVES:
        raise ArgumentError(
            f"outlier detection needs at least {MIN_OUTLIER_CURVES} curves, got {len(curves)}; "
            "inspect these days manually"
        )
    kept = curves
    flagged: list[str] = []
    passes: list[OutlierPass] = []
    for pass_index in range(params.max_passes):
        if len(kept) < MIN_OUTLIER_CURVES:
            logger.warning("outlier passes stopped early", remaining=len(kept))
            break
        values = np.asarray(kept.values)
        depths = band_depths(values)
        in_pool = depths >= np.quantile(depths, params.trim_alpha)
        cutoff = _bootstrap_cutoff(values[in_pool], len(kept), params, seed, pass_index, workers)
        below = (depths < cutoff) & ~in_pool
        out = [d for d, hit in zip(kept.day_ids, below) if hit]
        passes.append(
            OutlierPass(pass_index=pass_index, n_curves=len(kept), cutoff=cutoff, flagged=out)
        )
        logger.debug("outlier pass", pass_index=pass_index, cutoff=round(cutoff, 6), flagged=len(out))
        if not out:
            break
        flagged.extend(out)
        removed = set(out)
        kept = kept.subset(d for d in kept.day_ids if d not in removed)
    return OutlierResult(kept=kept, flagged=flagged, passes=passes)


class BoxplotParams(BaseModel):
    """Functional boxplot shape."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    central_proportion: float = Field(default=0.5, gt=0.0, le=1.0)
    fence_factor: float = Field(default=1.5, ge=0.0)


class FunctionalBoxplot(BaseModel):
    """Depth-ordered bands of a curve set."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    median_day_id: str
    central_lower: np.ndarray
    central_upper: np.ndarray
    fence_lower: np.ndarray
    fence_upper: np.ndarray
    whisker_lower: np.ndarray
    whisker_upper: np.ndarray
    outlier_day_ids: list[str]
    depths: dict[str, float] = Field(default_factory=dict)

    @field_validator(
        "central_lower", "central_upper", "fence_lower", "fence_upper",
        "whisker_lower", "whisker_upper", mode="before",
    )
    @classmethod
    def _array(cls, v) -> np.ndarray:
        return frozen_array(v, np.float64)

    def bands(self) -> dict[str, list[float]]:
        """Plain lists of the six band edges."""
        return {
            name: getattr(self, name).tolist()
            for name in (
                "central_lower", "central_upper", "fence_lower",
                "fence_upper", "whisker_lower", "whisker_upper",
            )
        }


def functional_boxplot(
    curves: CurveSet, p: float = 0.5, fence_factor: float = 1.5
) -> FunctionalBoxplot:
    """Functional boxplot from modified band depth.

    Curves are ranked by depth, ties broken by day_id. The central region
    envelopes the deepest ceil(p * n) curves, fences extend it by
    ``fence_factor`` times its width, and curves leaving the fences anywhere
    are outliers. Whiskers envelope the remaining curves.

    Raises:
        ArgumentError: empty curve set, or p outside (0, 1]
    """
    n = len(curves)
    if n == 0:
        raise ArgumentError("functional boxplot needs at least one curve")
    if not 0.0 < p <= 1.0:
        raise ArgumentError(f"central proportion must lie in (0, 1], got {p}")
    if fence_factor < 0:
        raise ArgumentError(f"fence factor must be non-negative, got {fence_factor}")

    values = np.asarray(curves.values)
    depths = band_depths(values) if n > 1 else np.ones(1)
    ids = np.asarray(curves.day_ids, dtype=str)
    ranking = np.lexsort((ids, -depths))

    central = values[ranking[: max(1, math.ceil(p * n))]]
    central_lower = central.min(axis=0)
    central_upper = central.max(axis=0)
    spread = central_upper - central_lower
    fence_lower = central_lower - fence_factor * spread
    fence_upper = central_upper + fence_factor * spread

    outside = ((values < fence_lower) | (values > fence_upper)).any(axis=1)
    inner = values[~outside]
    return FunctionalBoxplot(
        median_day_id=str(ids[ranking[0]]),
        central_lower=central_lower,
        central_upper=central_upper,
        fence_lower=fence_lower,
        fence_upper=fence_upper,
        whisker_lower=inner.min(axis=0),
        whisker_upper=inner.max(axis=0),
        outlier_day_ids=[str(d) for d in ids[outside]],
        depths={str(d): float(x) for d, x in zip(ids, depths)},
    )

"""K-means clustering of days and the within/total deviance elbow."""

from typing import Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import ArgumentError, DataError, DegenerateDataError
from src.features.hog import FeatureMatrix
from src.state.models import frozen_array
from src.state.seeds import derive_seed
from src.workers import ordered_map

logger = structlog.get_logger()


class KmeansParams(BaseModel):
    """Day clustering settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_range: tuple[int, int] = Field(default=(1, 10), description="Inclusive range of k tried")
    restarts: int = Field(default=10, ge=1)
    tol: float = Field(default=1e-8, ge=0.0, description="Relative within-deviance change to stop")
    max_iter: int = Field(default=300, ge=1)
    elbow_tau: float = Field(default=0.02, gt=0.0, description="Elbow first-difference threshold")
    force_k: Optional[int] = Field(default=None, ge=1, description="Skip the elbow and use this k")

    @field_validator("k_range")
    @classmethod
    def _range(cls, v: tuple[int, int]) -> tuple[int, int]:
        lo, hi = v
        if lo < 1 or hi < lo:
            raise ValueError(f"expected 1 <= low <= high, got [{lo}, {hi}]")
        return v


class KmeansResult(BaseModel):
    """Best k-means partition of the days for one k."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(ge=1)
    day_ids: tuple[str, ...]
    labels: tuple[int, ...] = Field(description="Cluster of each day, aligned with day_ids")
    centroids: np.ndarray
    within_deviance: float = Field(ge=0.0)
    total_deviance: float = Field(ge=0.0)
    iterations: int
    converged: bool
    history: tuple[float, ...] = Field(
        default=(), description="Within deviance after each assignment step of the best run"
    )

    @field_validator("centroids", mode="before")
    @classmethod
    def _array(cls, v) -> np.ndarray:
        return frozen_array(v, np.float64)

    @model_validator(mode="after")
    def _check(self) -> "KmeansResult":
        if set(self.labels) != set(range(self.k)):
            raise ValueError("every cluster label in [0, k) must be used")
        return self

    @property
    def ratio(self) -> float:
        if self.total_deviance == 0:
            return 0.0 if self.within_deviance == 0 else 1.0
        return self.within_deviance / self.total_deviance

    @property
    def assignments(self) -> dict[str, int]:
        return dict(zip(self.day_ids, self.labels))

    def members(self, label: int) -> list[str]:
        return [d for d, lab in zip(self.day_ids, self.labels) if lab == label]


class DevianceCurve(BaseModel):
    """Within/total deviance ratio for each k, with the fits behind it."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: list[tuple[int, float]]
    fits: dict[int, KmeansResult] = Field(default_factory=dict, exclude=True)


class _Run(BaseModel):
    """One Lloyd run on the canonical (day_id-sorted) sample matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    centers: np.ndarray
    labels: np.ndarray
    costs: np.ndarray
    within: float
    history: list[float]
    iterations: int
    converged: bool


def _sq_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances; the one formula used for every deviance."""
    out = np.empty((X.shape[0], centers.shape[0]))
    for j in range(centers.shape[0]):
        diff = X - centers[j]
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _sq_distances(X, X[chosen[0]][None])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.choice(np.setdiff1d(np.arange(n), chosen)))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_distances(X, X[idx][None])[:, 0])
    return X[chosen].copy()


def _repair_empty(
    X: np.ndarray, labels: np.ndarray, centers: np.ndarray, dist: np.ndarray
) -> None:
    """Move the point farthest from its centroid into each empty cluster, in place."""
    n, k = dist.shape
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        own = dist[np.arange(n), labels]
        movable = counts[labels] > 1
        if not movable.any():
            break
        p = int(np.argmax(np.where(movable, own, -1.0)))
        counts[labels[p]] -= 1
        counts[j] = 1
        labels[p] = j
        centers[j] = X[p]
        dist[:, j] = _sq_distances(X, X[p][None])[:, 0]


def _lloyd(X: np.ndarray, init: np.ndarray, tol: float, max_iter: int) -> _Run:
    """Lloyd iterations from ``init``; returns the best labelling visited with its own means."""
    n = X.shape[0]
    k = init.shape[0]
    centers = init.copy()
    history: list[float] = []
    best_labels: Optional[np.ndarray] = None
    best_within = np.inf
    converged = False
    prev_labels = None
    prev_within = np.inf

    for _ in range(max_iter):
        dist = _sq_distances(X, centers)
        labels = dist.argmin(axis=1)
        _repair_empty(X, labels, centers, dist)
        costs = dist[np.arange(n), labels]
        within = float(costs.sum())
        history.append(within)
        if within < best_within:
            best_labels, best_within = labels.copy(), within

        if prev_labels is not None and (
            np.array_equal(labels, prev_labels) or prev_within - within <= tol * prev_within
        ):
            converged = True
            break
        prev_labels, prev_within = labels, within
        centers = np.stack([X[labels == j].mean(axis=0) for j in range(k)])

    labels = best_labels
    # centroids are the means of the returned labels
    centers = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
    costs = _sq_distances(X, centers)[np.arange(n), labels]
    within = float(costs.sum())
    return _Run(
        centers=centers,
        labels=labels,
        costs=costs,
        within=within,
        history=history,
        iterations=len(history),
        converged=converged,
    )


def lloyd_labels(
    X: np.ndarray, k: int, rng: np.random.Generator, tol: float = 1e-8, max_iter: int = 300
) -> np.ndarray:
    """Hard labels of one k-means++ seeded Lloyd run on the rows of X."""
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= X.shape[0]:
        raise ArgumentError(f"k={k} outside [1, {X.shape[0]}]")
    return _lloyd(X, _kmeanspp(X, k, rng), tol, max_iter).labels


def _canonical(F: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Rows sorted by day_id, so results do not depend on input day order."""
    if len(F) == 0:
        raise DataError("no days to cluster")
    if not np.all(np.isfinite(F.values)):
        raise DataError("feature matrix has non-finite entries")
    order = np.argsort(np.asarray(F.day_ids, dtype=str), kind="stable")
    return F.samples()[order], order


def _total_deviance(X: np.ndarray) -> float:
    return float(_sq_distances(X, X.mean(axis=0)[None])[:, 0].sum())


def _best_run(
    X: np.ndarray, k: int, restarts: int, seed: int, tol: float, max_iter: int,
    workers: int, extra_init: Optional[np.ndarray] = None,
) -> _Run:
    inits = []
    for r in range(restarts):
        rng = np.random.default_rng(derive_seed(seed, "kmeans", k, r))
        inits.append(_kmeanspp(X, k, rng))
    if extra_init is not None:
        inits.append(extra_init)
    runs = ordered_map(lambda init: _lloyd(X, init, tol, max_iter), inits, workers)
    best = min(range(len(runs)), key=lambda r: (runs[r].within, r))
    return runs[best]


def _to_result(F: FeatureMatrix, order: np.ndarray, run: _Run, k: int, total: float) -> KmeansResult:
    # relabel by first appearance in day_id order
    mapping: dict[int, int] = {}
    for lab in run.labels:
        mapping.setdefault(int(lab), len(mapping))
    canonical = np.array([mapping[int(lab)] for lab in run.labels])
    labels = np.empty(len(order), dtype=np.int64)
    labels[order] = canonical
    centroids = np.empty_like(run.centers)
    for old, new in mapping.items():
        centroids[new] = run.centers[old]
    return KmeansResult(
        k=k,
        day_ids=F.day_ids,
        labels=tuple(int(x) for x in labels),
        centroids=centroids,
        within_deviance=run.within,
        total_deviance=total,
        iterations=run.iterations,
        converged=run.converged,
        history=tuple(run.history),
    )


def kmeans_fit(
    F: FeatureMatrix,
    k: int,
    restarts: int = 10,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 300,
    workers: int = 1,
) -> KmeansResult:
    """Best of ``restarts`` k-means++ seeded Lloyd runs on the days of F.

    Raises:
        ArgumentError: k outside [1, n_days] or restarts < 1
        DataError: non-finite features
    """
    if restarts < 1:
        raise ArgumentError(f"restarts must be >= 1, got {restarts}")
    if not 1 <= k <= len(F):
        raise ArgumentError(f"k={k} outside [1, {len(F)}]")
    X, order = _canonical(F)
    run = _best_run(X, k, restarts, seed, tol, max_iter, workers)
    return _to_result(F, order, run, k, _total_deviance(X))


def deviance_ratio_curve(
    F: FeatureMatrix,
    k_range: tuple[int, int],
    restarts: int = 10,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 300,
    workers: int = 1,
) -> DevianceCurve:
    """Within/total deviance ratio for every k in the inclusive range.

    Each k > low also tries the (k-1) solution's centroids plus the point
    farthest from its centroid, so the ratio never increases with k.

    Raises:
        ArgumentError: empty range or range outside [1, n_days]
        DegenerateDataError: all days identical (total deviance zero)
    """
    lo, hi = k_range
    if lo > hi or lo < 1 or hi > len(F):
        raise ArgumentError(f"k_range [{lo}, {hi}] must be non-empty within [1, {len(F)}]")
    if restarts < 1:
        raise ArgumentError(f"restarts must be >= 1, got {restarts}")
    X, order = _canonical(F)
    total = _total_deviance(X)
    if total == 0:
        raise DegenerateDataError("all days have identical features; total deviance is zero")

    points: list[tuple[int, float]] = []
    fits: dict[int, KmeansResult] = {}
    previous: Optional[_Run] = None
    for k in range(lo, hi + 1):
        nested = None
        if previous is not None:
            split = X[int(np.argmax(previous.costs))]
            nested = np.vstack([previous.centers, split[None]])
        run = _best_run(X, k, restarts, seed, tol, max_iter, workers, extra_init=nested)
        fits[k] = _to_result(F, order, run, k, total)
        points.append((k, run.within / total))
        logger.debug("kmeans fitted", k=k, ratio=round(run.within / total, 6))
        previous = run
    return DevianceCurve(points=points, fits=fits)


def select_k_elbow(curve: list[tuple[int, float]], tau: float) -> tuple[int, bool]:
    """Smallest k whose next ratio drop is below ``tau``.

    Returns:
        (k, warning) with warning set when no drop falls below tau and the
        largest k is returned
    """
    if len(curve) < 2:
        raise ArgumentError("elbow selection needs at least two (k, ratio) points")
    if tau <= 0:
        raise ArgumentError(f"tau must be positive, got {tau}")
    for (k, ratio), (_, next_ratio) in zip(curve, curve[1:]):
        if ratio - next_ratio < tau:
            return k, False
    return curve[-1][0], True

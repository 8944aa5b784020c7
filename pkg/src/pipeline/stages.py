"""Pipeline stages and the artifact formats that connect them.

Each stage is a pure function of the previous stages' results. The frame
builders and ``load_*`` readers move those results through the output
directory, so any stage can run on its own from the command line.
"""

from typing import Optional

import numpy as np
import pandas as pd
import structlog

from src.clustering.dfm import dfm_select
from src.clustering.kmeans import deviance_ratio_curve, kmeans_fit, select_k_elbow
from src.config.pipeline import FdaConfig, PipelineConfig
from src.errors import ArgumentError, DataError, NumericFailure
from src.fda.curves import FourierBasis, SmoothedCurveSet, extract_ddps, smooth_curves
from src.fda.depth import (
    MIN_OUTLIER_CURVES,
    BoxplotParams,
    OutlierParams,
    detect_outliers,
    functional_boxplot,
)
from src.features.hog import FeatureMatrix
from src.ingest.csv_reader import parse_long_csv
from src.pipeline.report import (
    BoxplotBands,
    BoxplotStage,
    ClusterBoxplots,
    ClusterOutliers,
    DayClusters,
    DayLabel,
    FdaCluster,
    FdaStage,
    OutlierStage,
    SubClusterBoxplot,
)
from src.state.models import CurveSet, DayCollection, RegionOfInterest
from src.state.seeds import derive_seed
from src.state.store import ArtifactStore

logger = structlog.get_logger()

DAYS_CSV = "days.csv"
FEATURES_CSV = "features.csv"
DAY_CLUSTERS_JSON = "day_clusters.json"
DDP_CSV = "ddp.csv"
OUTLIERS_JSON = "outliers.json"
SMOOTHED_CSV = "smoothed.csv"
FDA_CLUSTERS_JSON = "fda_clusters.json"
FBOXPLOT_JSON = "fboxplot.json"


# ============================================================================
# Stages
# ============================================================================


def cluster_days(
    features: FeatureMatrix, cfg: PipelineConfig, workers: int = 1
) -> DayClusters:
    """k-means on the day features, k from the elbow unless forced."""
    params = cfg.kmeans
    n_days = len(features)
    forced = params.force_k is not None
    if forced:
        k = params.force_k
        if k > n_days:
            raise ArgumentError(f"forced k={k} exceeds the {n_days} days")
        result = kmeans_fit(
            features, k, params.restarts, cfg.seed, params.tol, params.max_iter, workers
        )
        curve = [(k, result.ratio)]
        warning = False
    else:
        lo, hi = params.k_range[0], min(params.k_range[1], n_days)
        if lo > hi:
            raise ArgumentError(f"k_range starts at {lo} but only {n_days} days remain")
        ratios = deviance_ratio_curve(
            features, (lo, hi), params.restarts, cfg.seed, params.tol, params.max_iter, workers
        )
        curve = ratios.points
        if len(curve) >= 2:
            k, warning = select_k_elbow(curve, params.elbow_tau)
        else:
            k, warning = lo, True
        result = ratios.fits[k]
        if warning:
            logger.warning("no elbow in ratio curve; using largest k", k=k)

    logger.info("days clustered", k=k, ratio=round(result.ratio, 6), forced=forced)
    return DayClusters(
        k=k,
        ratio_curve=[(int(a), float(b)) for a, b in curve],
        assignments=[
            DayLabel(day_id=d, label=label)
            for d, label in sorted(result.assignments.items())
        ],
        warning=warning,
        forced=forced,
    )


def ddp_curves(collection: DayCollection, roi: RegionOfInterest) -> CurveSet:
    """Density profile of every day over the region of interest."""
    return extract_ddps(collection.days, roi, n_points=collection.spec.quarters_per_day)


def trim_outliers(
    curves: CurveSet, clusters: DayClusters, params: OutlierParams, seed: int, workers: int = 1
) -> OutlierStage:
    """Outlier trimming inside each day cluster."""
    results = []
    for label, members in clusters.members().items():
        member_curves = curves.subset(members)
        if len(member_curves) < MIN_OUTLIER_CURVES:
            logger.warning("outlier detection skipped", label=label, n_curves=len(member_curves))
            results.append(
                ClusterOutliers(
                    label=label,
                    member_day_ids=members,
                    kept_day_ids=members,
                    flagged_day_ids=[],
                    skipped=True,
                )
            )
            continue
        found = detect_outliers(
            member_curves, params, derive_seed(seed, "outliers", label), workers
        )
        results.append(
            ClusterOutliers(
                label=label,
                member_day_ids=members,
                kept_day_ids=list(found.kept.day_ids),
                flagged_day_ids=found.flagged,
                passes=found.passes,
            )
        )
        logger.info("outliers trimmed", label=label, flagged=len(found.flagged))
    return OutlierStage(clusters=results)


def smooth_kept(curves: CurveSet, outliers: OutlierStage, basis: FourierBasis) -> SmoothedCurveSet:
    """Fourier fits of every kept curve, cluster by cluster."""
    kept = [d for c in outliers.clusters for d in c.kept_day_ids]
    return smooth_curves(curves.subset(kept), basis)


def feasible_k_range(n: int, d: int, k_range: tuple[int, int]) -> Optional[tuple[int, int]]:
    """Ks a cluster of n curves with d coefficients can support, or None."""
    ks = [K for K in range(k_range[0], k_range[1] + 1) if n >= K * K and n > K and d > K - 1]
    return (ks[0], ks[-1]) if ks else None


def _single_group(
    label: int, ids: list[str], coeffs: np.ndarray, basis: FourierBasis, note: str
) -> FdaCluster:
    return FdaCluster(
        label=label,
        K=1,
        assignments=[DayLabel(day_id=d, label=0) for d in ids],
        centroid_curves={0: basis.evaluate(coeffs.mean(axis=0)).tolist()} if ids else {},
        note=note,
    )


def fda_subclusters(
    smoothed: SmoothedCurveSet, outliers: OutlierStage, cfg: FdaConfig, seed: int, workers: int = 1
) -> FdaStage:
    """Fisher-EM sub-clustering of the kept curves of each day cluster.

    Clusters too small for any K in range, or whose every K degenerates,
    become a single group carrying a note.
    """
    basis = smoothed.basis
    by_id = {c.day_id: c for c in smoothed.curves}
    results = []
    for cluster in outliers.clusters:
        ids = cluster.kept_day_ids
        coeffs = np.stack([by_id[d].coefficients for d in ids]) if ids else np.empty((0, basis.n_basis))
        k_range = feasible_k_range(len(ids), basis.n_basis, cfg.k_range)
        if k_range is None:
            logger.warning("too few curves for sub-clustering", label=cluster.label, n_curves=len(ids))
            results.append(
                _single_group(
                    cluster.label, ids, coeffs, basis,
                    f"{len(ids)} curves support no K in {list(cfg.k_range)}; single group",
                )
            )
            continue
        if k_range != tuple(cfg.k_range):
            logger.info("K range clipped", label=cluster.label, k_range=list(k_range))
        try:
            model, table = dfm_select(
                coeffs, cfg, derive_seed(seed, "fda", cluster.label), workers, k_range
            )
        except NumericFailure as e:
            logger.warning("sub-clustering degenerated", label=cluster.label, error=str(e))
            results.append(
                _single_group(cluster.label, ids, coeffs, basis, f"{e.message}; single group")
            )
            continue
        labels = model.labels
        used = sorted(set(int(x) for x in labels))
        centroids = model.centroid_curves(basis)
        results.append(
            FdaCluster(
                label=cluster.label,
                K=model.K,
                bic_table=table,
                assignments=[DayLabel(day_id=d, label=int(x)) for d, x in zip(ids, labels)],
                centroid_curves={k: centroids[k].tolist() for k in used},
            )
        )
        logger.info("sub-clusters fitted", label=cluster.label, K=model.K, used=len(used))
    return FdaStage(clusters=results)


def boxplots(curves: CurveSet, fda: FdaStage, params: BoxplotParams) -> BoxplotStage:
    """Functional boxplot of the raw profiles of every sub-cluster."""
    clusters = []
    for cluster in fda.clusters:
        subs = []
        for sub_label, members in cluster.members().items():
            boxplot = functional_boxplot(
                curves.subset(members), params.central_proportion, params.fence_factor
            )
            subs.append(
                SubClusterBoxplot(
                    sub_label=sub_label, day_ids=members, boxplot=BoxplotBands.from_boxplot(boxplot)
                )
            )
        clusters.append(ClusterBoxplots(label=cluster.label, sub_clusters=subs))
    return BoxplotStage(clusters=clusters)


# ============================================================================
# Artifact formats
# ============================================================================


def features_frame(features: FeatureMatrix) -> pd.DataFrame:
    frame = pd.DataFrame(
        features.samples(), columns=[f"dim_{i}" for i in range(features.dimension)]
    )
    frame.insert(0, "day_id", list(features.day_ids))
    return frame


def curves_frame(curves: CurveSet, prefix: str = "q") -> pd.DataFrame:
    frame = pd.DataFrame(
        np.asarray(curves.values), columns=[f"{prefix}{i}" for i in range(curves.n_points)]
    )
    frame.insert(0, "day_id", list(curves.day_ids))
    return frame


def smoothed_frame(smoothed: SmoothedCurveSet) -> pd.DataFrame:
    frame = pd.DataFrame(
        smoothed.coefficient_matrix(), columns=[f"c{i}" for i in range(smoothed.basis.n_basis)]
    )
    frame.insert(0, "day_id", list(smoothed.day_ids))
    return frame


def load_days(store: ArtifactStore, cfg: PipelineConfig) -> DayCollection:
    with open(store.require(DAYS_CSV), "rb") as f:
        return parse_long_csv(f, cfg.grid, provenance=f"{store.path(DAYS_CSV)}")


def load_features(store: ArtifactStore) -> FeatureMatrix:
    frame = store.read_csv(FEATURES_CSV)
    return FeatureMatrix(
        day_ids=tuple(frame["day_id"]), values=frame.drop(columns="day_id").to_numpy(dtype=float).T
    )


def load_curves(store: ArtifactStore, name: str = DDP_CSV) -> CurveSet:
    frame = store.read_csv(name)
    return CurveSet(day_ids=tuple(frame["day_id"]), values=frame.drop(columns="day_id").to_numpy(dtype=float))


def load_smoothed(store: ArtifactStore, cfg: PipelineConfig) -> SmoothedCurveSet:
    frame = store.read_csv(SMOOTHED_CSV)
    basis = FourierBasis.build(cfg.fda.n_basis, cfg.grid.quarters_per_day)
    coeffs = frame.drop(columns="day_id").to_numpy(dtype=float)
    if coeffs.shape[1] != basis.n_basis:
        raise DataError(f"{SMOOTHED_CSV} has {coeffs.shape[1]} coefficients, config expects {basis.n_basis}")
    return SmoothedCurveSet.from_coefficients(basis, list(frame["day_id"]), coeffs)


def load_day_clusters(store: ArtifactStore) -> DayClusters:
    return DayClusters.model_validate(store.read_json(DAY_CLUSTERS_JSON))


def load_outliers(store: ArtifactStore) -> OutlierStage:
    return OutlierStage.model_validate(store.read_json(OUTLIERS_JSON))


def load_fda(store: ArtifactStore) -> FdaStage:
    return FdaStage.model_validate(store.read_json(FDA_CLUSTERS_JSON))

"""End-to-end pipeline run."""

from pathlib import Path
from typing import Optional

import structlog

from src.clustering.calendar import calendar_table
from src.config.pipeline import PipelineConfig
from src.config.settings import settings
from src.errors import ArgumentError, DataError
from src.fda.curves import FourierBasis
from src.features.hog import build_feature_matrix
from src.ingest.csv_reader import parse_long_csv
from src.ingest.missing import handle_missing
from src.logging import Stage, StageTimer
from src.pipeline import stages
from src.pipeline.plots import stage_plot_data
from src.pipeline.report import (
    BoxplotStage,
    ClusterReport,
    DayClusters,
    ElbowReport,
    FdaStage,
    OutlierStage,
    PipelineReport,
    SubClusterReport,
    score_recovery,
)
from src.state.store import ArtifactStore
from src.synth.generator import generate

logger = structlog.get_logger()


def assemble_clusters(
    outliers: OutlierStage, fda: FdaStage, boxes: BoxplotStage
) -> list[ClusterReport]:
    """Join the per-cluster results of the functional stages by cluster label."""
    fda_by_label = {c.label: c for c in fda.clusters}
    boxes_by_label = {c.label: c for c in boxes.clusters}
    reports = []
    for cluster in outliers.clusters:
        sub_fit = fda_by_label[cluster.label]
        reports.append(
            ClusterReport(
                label=cluster.label,
                member_day_ids=cluster.member_day_ids,
                kept_day_ids=cluster.kept_day_ids,
                outlier_day_ids=cluster.flagged_day_ids,
                outlier_detection_skipped=cluster.skipped,
                outlier_passes=cluster.passes,
                K=sub_fit.K,
                bic_table=sub_fit.bic_table,
                note=sub_fit.note,
                sub_clusters=[
                    SubClusterReport(
                        label=sub.sub_label,
                        day_ids=sub.day_ids,
                        centroid_curve=sub_fit.centroid_curves[sub.sub_label],
                        boxplot=sub.boxplot,
                    )
                    for sub in boxes_by_label[cluster.label].sub_clusters
                ],
            )
        )
    return reports


def run_pipeline(
    cfg: PipelineConfig,
    out_dir: Path,
    input_path: Optional[Path] = None,
    synthetic: bool = False,
    workers: Optional[int] = None,
) -> PipelineReport:
    """Run every stage and write all artifacts to ``out_dir``.

    Nothing is written unless every stage succeeds.

    Args:
        cfg: Validated pipeline config
        out_dir: Output directory
        input_path: Long CSV of grid counts (ignored in synthetic mode)
        synthetic: Generate the synthetic city instead of reading input
        workers: Thread count; defaults to the runtime settings

    Returns:
        The run report (also written as report.json)
    """
    workers = workers or settings.workers
    if not synthetic:
        if input_path is None:
            raise ArgumentError("an input file is required unless running in synthetic mode")
        if not Path(input_path).is_file():
            raise DataError(f"input file {input_path} does not exist", stage=Stage.INGEST.value)

    timings: dict[str, float] = {}
    truth = None
    if synthetic:
        with StageTimer(Stage.SIMULATE, timings):
            raw, truth = generate(cfg.synth_config(), workers)
    else:
        with StageTimer(Stage.INGEST, timings):
            with open(input_path, "rb") as f:
                raw = parse_long_csv(f, cfg.grid, provenance=str(input_path))
    provenance = raw.provenance

    with StageTimer(Stage.MISSING, timings):
        days, ingest_report = handle_missing(raw, cfg.policy, workers)
        del raw
        if len(days) == 0:
            raise DataError("every day was dropped by the missing-data policy")

    with StageTimer(Stage.FEATURES, timings, days=len(days)):
        features = build_feature_matrix(days, cfg.hog, workers)

    with StageTimer(Stage.CLUSTER_DAYS, timings):
        day_clusters = stages.cluster_days(features, cfg, workers)

    with StageTimer(Stage.DDP, timings):
        curves = stages.ddp_curves(days, cfg.roi)

    with StageTimer(Stage.OUTLIERS, timings):
        outliers = stages.trim_outliers(curves, day_clusters, cfg.outliers, cfg.seed, workers)

    with StageTimer(Stage.SMOOTH, timings):
        basis = FourierBasis.build(cfg.fda.n_basis, cfg.grid.quarters_per_day)
        smoothed = stages.smooth_kept(curves, outliers, basis)

    with StageTimer(Stage.FDA_CLUSTER, timings):
        fda = stages.fda_subclusters(smoothed, outliers, cfg.fda, cfg.seed, workers)

    with StageTimer(Stage.FBOXPLOT, timings):
        boxes = stages.boxplots(curves, fda, cfg.boxplot)

    report = PipelineReport(
        config=cfg.model_dump(mode="json"),
        provenance=provenance,
        ingest=ingest_report,
        elbow=_elbow(day_clusters),
        clusters=assemble_clusters(outliers, fda, boxes),
        calendar=calendar_table(days, day_clusters.labels()),
        recovery=score_recovery(truth, day_clusters, outliers, fda) if truth else None,
        timings=timings,
        curves=curves,
    )
    report.check_conservation()

    with StageTimer(Stage.EMIT, timings):
        store = ArtifactStore(out_dir)
        store.put_csv(stages.FEATURES_CSV, stages.features_frame(features))
        store.put_json(stages.DAY_CLUSTERS_JSON, day_clusters)
        store.put_csv(stages.DDP_CSV, stages.curves_frame(curves))
        store.put_json(stages.OUTLIERS_JSON, outliers)
        store.put_csv(stages.SMOOTHED_CSV, stages.smoothed_frame(smoothed))
        store.put_json(stages.FDA_CLUSTERS_JSON, fda)
        store.put_json(stages.FBOXPLOT_JSON, boxes)
        store.put_csv("calendar.csv", report.calendar.to_frame())
        if truth is not None:
            store.put_json("ground_truth.json", truth)
        stage_plot_data(report, store)
        store.put_json("report.json", report)
        store.commit()

    # timings of the emit stage itself land in a second commit
    timing_store = ArtifactStore(out_dir)
    timing_store.put_json("timings.json", {k: round(v, 3) for k, v in timings.items()})
    timing_store.commit()

    logger.info(
        "pipeline complete",
        days=ingest_report.days_read,
        k=day_clusters.k,
        out_dir=str(out_dir),
    )
    return report


def _elbow(day_clusters: DayClusters) -> ElbowReport:
    return ElbowReport(
        ratio_curve=day_clusters.ratio_curve,
        k=day_clusters.k,
        warning=day_clusters.warning,
        forced=day_clusters.forced,
    )

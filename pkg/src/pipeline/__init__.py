"""Pipeline orchestration: stages, report, plot data and the full run."""

from src.pipeline.plots import emit_plot_data, plot_file_name, stage_plot_data
from src.pipeline.report import (
    ClusterReport,
    DayClusters,
    FdaStage,
    OutlierStage,
    PipelineReport,
    RecoveryScores,
    score_recovery,
)
from src.pipeline.runner import assemble_clusters, run_pipeline

__all__ = [
    "ClusterReport",
    "DayClusters",
    "FdaStage",
    "OutlierStage",
    "PipelineReport",
    "RecoveryScores",
    "assemble_clusters",
    "emit_plot_data",
    "plot_file_name",
    "run_pipeline",
    "score_recovery",
    "stage_plot_data",
]

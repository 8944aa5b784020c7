"""Plot-ready CSVs of every sub-cluster."""

from pathlib import Path

import numpy as np
import pandas as pd

from src.errors import ArgumentError
from src.pipeline.report import PipelineReport
from src.state.store import ArtifactStore, Manifest

BAND_COLUMNS = [
    "central_lower",
    "central_upper",
    "fence_lower",
    "fence_upper",
    "whisker_lower",
    "whisker_upper",
]


def plot_file_name(cluster: int, sub_cluster: int) -> str:
    return f"plots/cluster{cluster}_sub{sub_cluster}.csv"


def stage_plot_data(report: PipelineReport, store: ArtifactStore) -> list[str]:
    """Stage one CSV per sub-cluster: quarter, centroid, boxplot bands, member DDPs.

    Returns:
        Staged file names
    """
    if report.curves is None:
        raise ArgumentError("report has no member curves to plot")
    names = []
    for cluster in report.clusters:
        for sub in cluster.sub_clusters:
            members = report.curves.subset(sub.day_ids)
            frame = pd.DataFrame({"quarter": np.arange(members.n_points)})
            frame["centroid"] = sub.centroid_curve
            for column in BAND_COLUMNS:
                frame[column] = getattr(sub.boxplot, column)
            for day_id, values in zip(members.day_ids, members.values):
                frame[day_id] = values
            name = plot_file_name(cluster.label, sub.label)
            store.put_csv(name, frame)
            names.append(name)
    return names


def emit_plot_data(report: PipelineReport, out_dir: Path) -> Manifest:
    """Write the plot CSVs of a report and refresh the manifest.

    Raises:
        ArgumentError: the report carries no member curves
        DataError: out_dir cannot be written
    """
    store = ArtifactStore(out_dir)
    stage_plot_data(report, store)
    return store.commit()

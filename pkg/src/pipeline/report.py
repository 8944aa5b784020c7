"""Stage results and the run report."""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field
from sklearn.metrics import adjusted_rand_score

from src.clustering.calendar import CalendarTable
from src.clustering.dfm import BicRow
from src.errors import HogFdaError
from src.fda.depth import FunctionalBoxplot, OutlierPass
from src.ingest.missing import IngestReport
from src.state.models import CurveSet
from src.synth.generator import GroundTruth

BIC_CONVENTION = "larger is better; BIC = loglik - (n_params / 2) * log(n)"


class DayLabel(BaseModel):
    day_id: str
    label: int


class DayClusters(BaseModel):
    """Result of the day clustering stage (``day_clusters.json``)."""

    k: int
    ratio_curve: list[tuple[int, float]]
    assignments: list[DayLabel]
    warning: bool = Field(default=False, description="No elbow found; k is the largest tried")
    forced: bool = Field(default=False, description="k given on the command line")

    def labels(self) -> dict[str, int]:
        return {a.day_id: a.label for a in self.assignments}

    def members(self) -> dict[int, list[str]]:
        """Cluster label -> day_ids sorted by day_id, for every label in use."""
        groups: dict[int, list[str]] = {}
        for a in sorted(self.assignments, key=lambda a: a.day_id):
            groups.setdefault(a.label, []).append(a.day_id)
        return dict(sorted(groups.items()))


class ClusterOutliers(BaseModel):
    label: int
    member_day_ids: list[str]
    kept_day_ids: list[str]
    flagged_day_ids: list[str]
    passes: list[OutlierPass] = Field(default_factory=list)
    skipped: bool = Field(default=False, description="Too few curves for outlier detection")


class OutlierStage(BaseModel):
    """``outliers.json``."""

    clusters: list[ClusterOutliers]

    def kept(self) -> dict[int, list[str]]:
        return {c.label: c.kept_day_ids for c in self.clusters}


class FdaCluster(BaseModel):
    """Functional sub-clustering of one day cluster."""

    label: int
    K: int
    bic_table: list[BicRow] = Field(default_factory=list)
    assignments: list[DayLabel]
    centroid_curves: dict[int, list[float]] = Field(description="sub label -> curve")
    note: Optional[str] = None

    def members(self) -> dict[int, list[str]]:
        groups: dict[int, list[str]] = {}
        for a in self.assignments:
            groups.setdefault(a.label, []).append(a.day_id)
        return dict(sorted(groups.items()))


class FdaStage(BaseModel):
    """``fda_clusters.json``."""

    bic_convention: str = BIC_CONVENTION
    clusters: list[FdaCluster]


class BoxplotBands(BaseModel):
    median_day_id: str
    central_lower: list[float]
    central_upper: list[float]
    fence_lower: list[float]
    fence_upper: list[float]
    whisker_lower: list[float]
    whisker_upper: list[float]
    outlier_day_ids: list[str]

    @classmethod
    def from_boxplot(cls, boxplot: FunctionalBoxplot) -> "BoxplotBands":
        return cls(
            median_day_id=boxplot.median_day_id,
            outlier_day_ids=boxplot.outlier_day_ids,
            **boxplot.bands(),
        )


class SubClusterBoxplot(BaseModel):
    sub_label: int
    day_ids: list[str]
    boxplot: BoxplotBands


class ClusterBoxplots(BaseModel):
    label: int
    sub_clusters: list[SubClusterBoxplot]


class BoxplotStage(BaseModel):
    """``fboxplot.json``."""

    clusters: list[ClusterBoxplots]


class ElbowReport(BaseModel):
    ratio_curve: list[tuple[int, float]]
    k: int
    warning: bool
    forced: bool


class SubClusterReport(BaseModel):
    label: int
    day_ids: list[str]
    centroid_curve: list[float]
    boxplot: BoxplotBands


class ClusterReport(BaseModel):
    label: int
    member_day_ids: list[str]
    kept_day_ids: list[str]
    outlier_day_ids: list[str]
    outlier_detection_skipped: bool
    outlier_passes: list[OutlierPass]
    K: int
    bic_table: list[BicRow]
    note: Optional[str] = None
    sub_clusters: list[SubClusterReport]


class RecoveryScores(BaseModel):
    """Agreement with the planted structure of a synthetic city."""

    day_cluster_ari: float
    subgroup_ari: Optional[float] = None
    subgroup_cluster: Optional[int] = None
    planted_outliers: int
    outliers_recovered: int
    outlier_recall: Optional[float] = None
    false_positives: int
    false_positive_rate: float


class PipelineReport(BaseModel):
    """Everything a run produced; ``report.json``."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: dict
    provenance: str = ""
    ingest: IngestReport
    elbow: ElbowReport
    clusters: list[ClusterReport]
    calendar: CalendarTable
    recovery: Optional[RecoveryScores] = None
    bic_convention: str = BIC_CONVENTION
    timings: dict[str, float] = Field(default_factory=dict, exclude=True)
    curves: Optional[CurveSet] = Field(default=None, exclude=True)

    def check_conservation(self) -> None:
        """Every input day is exactly one of: dropped, kept member, flagged outlier.

        Raises:
            HogFdaError: a day is missing or counted twice
        """
        seen = list(self.ingest.dropped_day_ids)
        for cluster in self.clusters:
            seen.extend(cluster.kept_day_ids)
            seen.extend(cluster.outlier_day_ids)
        if len(seen) != len(set(seen)):
            raise HogFdaError("day conservation violated: a day is counted twice")
        if len(seen) != self.ingest.days_read:
            raise HogFdaError(
                f"day conservation violated: {len(seen)} days accounted for, "
                f"{self.ingest.days_read} read"
            )


def score_recovery(
    truth: GroundTruth,
    day_clusters: DayClusters,
    outliers: OutlierStage,
    fda: FdaStage,
) -> RecoveryScores:
    """Compare clusters, sub-clusters and flagged days with the planted truth."""
    labels = day_clusters.labels()
    days = sorted(d for d in labels if d in truth.day_types)
    day_ari = float(adjusted_rand_score([truth.day_types[d] for d in days], [labels[d] for d in days]))

    subgroup_ari, subgroup_cluster = None, None
    tiered = [d for d in days if d in truth.subgroups]
    if tiered:
        counts: dict[int, int] = {}
        for d in tiered:
            counts[labels[d]] = counts.get(labels[d], 0) + 1
        subgroup_cluster = max(counts, key=lambda label: (counts[label], -label))
        for cluster in fda.clusters:
            if cluster.label != subgroup_cluster:
                continue
            sub = {a.day_id: a.label for a in cluster.assignments}
            scored = sorted(d for d in tiered if d in sub)
            if len(scored) >= 2:
                subgroup_ari = float(
                    adjusted_rand_score([truth.subgroups[d] for d in scored], [sub[d] for d in scored])
                )

    flagged = {d for c in outliers.clusters for d in c.flagged_day_ids}
    screened = {d for c in outliers.clusters if not c.skipped for d in c.member_day_ids}
    planted = set(truth.outlier_day_ids) & set(labels)
    recovered = planted & flagged
    false_positives = flagged - planted
    regular = screened - planted
    return RecoveryScores(
        day_cluster_ari=day_ari,
        subgroup_ari=subgroup_ari,
        subgroup_cluster=subgroup_cluster,
        planted_outliers=len(planted),
        outliers_recovered=len(recovered),
        outlier_recall=len(recovered) / len(planted) if planted else None,
        false_positives=len(false_positives),
        false_positive_rate=len(false_positives) / len(regular) if regular else 0.0,
    )

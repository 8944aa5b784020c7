"""Day clustering (k-means elbow) and functional sub-clustering (Fisher-EM)."""

from src.clustering.calendar import CalendarTable, calendar_table
from src.clustering.dfm import (
    BicRow,
    DfmConfig,
    DfmModel,
    dfm_fit,
    dfm_select,
    predict_posterior,
)
from src.clustering.kmeans import (
    DevianceCurve,
    KmeansParams,
    KmeansResult,
    deviance_ratio_curve,
    kmeans_fit,
    select_k_elbow,
)

__all__ = [
    "CalendarTable",
    "calendar_table",
    "BicRow",
    "DfmConfig",
    "DfmModel",
    "dfm_fit",
    "dfm_select",
    "predict_posterior",
    "DevianceCurve",
    "KmeansParams",
    "KmeansResult",
    "deviance_ratio_curve",
    "kmeans_fit",
    "select_k_elbow",
]

"""Functional data tools: density profiles, Fourier smoothing, depth."""

from src.fda.curves import (
    FourierBasis,
    SmoothedCurve,
    SmoothedCurveSet,
    extract_ddp,
    extract_ddps,
    smooth_curves,
)
from src.fda.depth import (
    BoxplotParams,
    DepthResult,
    FunctionalBoxplot,
    OutlierParams,
    OutlierResult,
    detect_outliers,
    functional_boxplot,
    modified_band_depth,
)

__all__ = [
    "FourierBasis",
    "SmoothedCurve",
    "SmoothedCurveSet",
    "extract_ddp",
    "extract_ddps",
    "smooth_curves",
    "BoxplotParams",
    "DepthResult",
    "FunctionalBoxplot",
    "OutlierParams",
    "OutlierResult",
    "detect_outliers",
    "functional_boxplot",
    "modified_band_depth",
]

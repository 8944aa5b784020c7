"""HOG descriptors of presence grids."""

from src.features.hog import (
    DayFeatureVector,
    FeatureMatrix,
    HogParams,
    build_day_vector,
    build_feature_matrix,
    compute_snapshot_hog,
    hog_dimension,
)

__all__ = [
    "DayFeatureVector",
    "FeatureMatrix",
    "HogParams",
    "build_day_vector",
    "build_feature_matrix",
    "compute_snapshot_hog",
    "hog_dimension",
]

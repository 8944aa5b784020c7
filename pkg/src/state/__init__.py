"""Domain types, seeds and artifact storage."""

from src.state.models import (
    Curve,
    CurveSet,
    DayCollection,
    DayRecord,
    GridSnapshot,
    GridSpec,
    RegionOfInterest,
    Weekday,
)
from src.state.seeds import derive_seed, file_checksum, make_rng
from src.state.store import ArtifactStore, Manifest, ManifestEntry

__all__ = [
    "Curve",
    "CurveSet",
    "DayCollection",
    "DayRecord",
    "GridSnapshot",
    "GridSpec",
    "RegionOfInterest",
    "Weekday",
    "derive_seed",
    "file_checksum",
    "make_rng",
    "ArtifactStore",
    "Manifest",
    "ManifestEntry",
]

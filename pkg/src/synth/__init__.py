"""Synthetic presence data with planted structure."""

from src.synth.generator import (
    DayTypeSpec,
    GroundTruth,
    SynthConfig,
    SyntheticCity,
    default_day_types,
    generate,
)

__all__ = [
    "DayTypeSpec",
    "GroundTruth",
    "SynthConfig",
    "SyntheticCity",
    "default_day_types",
    "generate",
]

"""Configuration: runtime settings and the pipeline config document."""

from src.config.settings import Settings, settings

__all__ = ["Settings", "settings"]

"""Runtime settings for the HOG-FDA pipeline.

These knobs never influence results (logging, thread count); everything that
does lives in the pipeline config document.
"""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix HOGFDA_)."""

    # Logging
    log_level: str = Field(
        default="INFO",
        description="Log level: DEBUG, INFO, WARNING, ERROR",
    )
    log_format: str = Field(
        default="text",
        description="Console log format: 'text' or 'json'",
    )
    log_to_file: bool = Field(
        default=False,
        description="Also write JSON logs to a rotating file in log_dir",
    )
    log_dir: Path = Field(default=Path("logs"), description="Directory for log files")
    log_file_max_bytes: int = Field(
        default=10 * 1024 * 1024, description="Rotate log file after this many bytes"
    )
    log_file_backup_count: int = Field(default=5, description="Rotated log files to keep")

    # Parallelism
    workers: int = Field(
        default=1,
        ge=1,
        description="Threads used inside a stage (results are independent of this)",
    )

    model_config = SettingsConfigDict(
        env_prefix="HOGFDA_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


settings = Settings()

"""Ingestion of grid counts and missing-data handling."""

from src.ingest.csv_reader import parse_long_csv, write_long_csv
from src.ingest.missing import IngestReport, MissingPolicy, fill_time_gaps, handle_missing

__all__ = [
    "parse_long_csv",
    "write_long_csv",
    "IngestReport",
    "MissingPolicy",
    "fill_time_gaps",
    "handle_missing",
]

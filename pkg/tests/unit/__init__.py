"""Unit tests for the pipeline components."""

"""Artifact storage for pipeline runs.

Artifacts are staged in memory and written together by ``commit``, so a run
that fails leaves its output directory untouched. Every commit refreshes
``manifest.json`` with SHA-256 checksums.
"""

import hashlib
import io
import json
import os
from pathlib import Path
from typing import Any, Iterable, Optional

import pandas as pd
import structlog
from pydantic import BaseModel

from src.errors import DataError

logger = structlog.get_logger()

MANIFEST_NAME = "manifest.json"
UNTRACKED = frozenset({"timings.json", MANIFEST_NAME})
FLOAT_FORMAT = "%.17g"


class ManifestEntry(BaseModel):
    """One written file."""

    path: str
    sha256: str
    bytes: int


class Manifest(BaseModel):
    """Checksums of the artifacts in an output directory, sorted by path."""

    files: list[ManifestEntry]

    def paths(self) -> list[str]:
        return [f.path for f in self.files]

    def checksum(self, path: str) -> Optional[str]:
        for entry in self.files:
            if entry.path == path:
                return entry.sha256
        return None


def to_json_bytes(payload: Any) -> bytes:
    """Stable JSON encoding used for every artifact."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    return (json.dumps(payload, indent=2, allow_nan=False) + "\n").encode("utf-8")


def to_csv_bytes(frame: pd.DataFrame) -> bytes:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue().encode("utf-8")


class ArtifactStore:
    """Stage artifacts for one output directory and write them at once."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self._pending: dict[str, bytes] = {}

    def put_bytes(self, name: str, data: bytes) -> None:
        self._pending[name] = data

    def put_json(self, name: str, payload: Any) -> None:
        self.put_bytes(name, to_json_bytes(payload))

    def put_csv(self, name: str, frame: pd.DataFrame) -> None:
        self.put_bytes(name, to_csv_bytes(frame))

    @property
    def pending(self) -> list[str]:
        return sorted(self._pending)

    def commit(self) -> Manifest:
        """Write staged files, then merge their checksums into the manifest.

        Raises:
            DataError: the output directory cannot be written
        """
        manifest = self.read_manifest()
        entries = {e.path: e for e in manifest.files} if manifest else {}
        try:
            for name in sorted(self._pending):
                data = self._pending[name]
                self._write(name, data)
                if name not in UNTRACKED:
                    entries[name] = ManifestEntry(
                        path=name, sha256=hashlib.sha256(data).hexdigest(), bytes=len(data)
                    )
            manifest = Manifest(files=[entries[k] for k in sorted(entries)])
            self._write(MANIFEST_NAME, to_json_bytes(manifest))
        except OSError as e:
            raise DataError(f"cannot write to {self.out_dir}: {e}")
        logger.info("artifacts written", out_dir=str(self.out_dir), files=len(self._pending))
        self._pending.clear()
        return manifest

    def _write(self, name: str, data: bytes) -> None:
        target = self.out_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, target)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def require(self, name: str) -> Path:
        """Path of an existing artifact from an earlier stage."""
        target = self.path(name)
        if not target.is_file():
            raise DataError(f"missing input artifact {target}; run the stage that produces it first")
        return target

    def read_json(self, name: str) -> Any:
        try:
            return json.loads(self.require(name).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataError(f"{name} is not valid JSON: {e}")

    def read_csv(self, name: str, id_columns: Iterable[str] = ("day_id",)) -> pd.DataFrame:
        """Read a CSV artifact with exact float parsing; id columns stay strings."""
        try:
            return pd.read_csv(
                self.require(name),
                dtype={c: str for c in id_columns},
                float_precision="round_trip",
            )
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataError(f"{name} is not a valid CSV artifact: {e}")

    def read_manifest(self) -> Optional[Manifest]:
        target = self.path(MANIFEST_NAME)
        if not target.is_file():
            return None
        try:
            return Manifest.model_validate_json(target.read_text(encoding="utf-8"))
        except ValueError:
            logger.warning("ignoring unreadable manifest", path=str(target))
            return None

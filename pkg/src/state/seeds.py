"""Stable seed derivation and artifact checksums."""

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

_UINT64_MASK = (1 << 64) - 1


def derive_seed(master_seed: int, *keys: Any) -> int:
    """Derive a 64-bit seed from the master seed and a key path.

    Format hashed: JSON list ``[master_seed, key_1, key_2, ...]``. The same
    (master seed, stage name, item key) always yields the same seed, whatever
    the scheduling order of the items.

    Args:
        master_seed: Master seed from the pipeline config
        *keys: Stage name and item keys (strings, ints, tuples)

    Returns:
        Unsigned 64-bit integer seed
    """
    payload = json.dumps(
        [int(master_seed), *[_serialize_key(k) for k in keys]],
        sort_keys=True,
        default=str,
    )
    digest = hashlib.sha256(payload.encode()).digest()
    return int.from_bytes(digest[:8], "big") & _UINT64_MASK


def make_rng(master_seed: int, *keys: Any) -> np.random.Generator:
    """Build a numpy Generator seeded by ``derive_seed``."""
    return np.random.default_rng(derive_seed(master_seed, *keys))


def file_checksum(path: Path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _serialize_key(key: Any) -> Any:
    """Serialize a key for hashing."""
    if isinstance(key, (str, int, float, bool, type(None))):
        return key
    elif isinstance(key, (list, tuple)):
        return [_serialize_key(k) for k in key]
    elif isinstance(key, dict):
        return {str(k): _serialize_key(v) for k, v in sorted(key.items())}
    elif isinstance(key, np.integer):
        return int(key)
    else:
        return str(key)

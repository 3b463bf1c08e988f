"""On-disk cache of growth profiles.

File layout: 8-byte big-endian payload length, the UTF-8 JSON payload, then
the 32-byte SHA-256 digest of the payload.  A file whose length or digest
does not check out is reported with a warning and treated as a miss.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import warnings
from pathlib import Path
from typing import Optional, Union

from .errors import CacheCorrupt
from .functions import GrowthProfile

ENV_VAR = "BERNSTEIN_LAB_CACHE"
_LEN = struct.Struct(">Q")


def resolve_cache_dir(cli_value: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """The environment variable wins over the command line and config values."""
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(cli_value) if cli_value else None


def encode_record(payload: bytes) -> bytes:
    return _LEN.pack(len(payload)) + payload + hashlib.sha256(payload).digest()


def decode_record(blob: bytes) -> bytes:
    if len(blob) < _LEN.size + 32:
        raise CacheCorrupt("file shorter than header and trailer")
    (n,) = _LEN.unpack_from(blob)
    if len(blob) != _LEN.size + n + 32:
        raise CacheCorrupt(f"length prefix {n} does not match file size {len(blob)}")
    payload = blob[_LEN.size:_LEN.size + n]
    if hashlib.sha256(payload).digest() != blob[_LEN.size + n:]:
        raise CacheCorrupt("SHA-256 trailer mismatch")
    return payload


class ProfileCache:
    """Growth profiles keyed by profile_key(spec, grid, precision)."""

    def __init__(self, directory: Union[str, Path]):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.dir / f"{key}.gp"

    def store(self, key: str, profile: GrowthProfile) -> Path:
        payload = json.dumps({"key": key, "profile": profile.to_dict()}, sort_keys=True).encode()
        target = self.path(key)
        # write-then-rename so an interrupted store never leaves a partial file
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(encode_record(payload))
        os.replace(tmp, target)
        return target

    def lookup(self, key: str, precision_bits: int) -> Optional[GrowthProfile]:
        p = self.path(key)
        if not p.exists():
            return None
        try:
            doc = json.loads(decode_record(p.read_bytes()))
        except (CacheCorrupt, ValueError) as exc:
            warnings.warn(f"ignoring corrupt cache file {p.name}: {exc}", RuntimeWarning, stacklevel=2)
            return None
        if doc.get("key") != key:
            return None
        prof = GrowthProfile.from_dict(doc["profile"])
        if prof.precision_bits != int(precision_bits):
            return None
        return prof

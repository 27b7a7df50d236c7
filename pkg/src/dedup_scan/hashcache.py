"""On-disk cache of per-image augmented hash sets.

Binary, little-endian. Layout: magic ``PHCACHE1`` (8 bytes), format version
u32, mode tag u8 (6 or 8), record count u64, then per record: id length u16,
id bytes (UTF-8), file byte size u64, one 8-byte hash per transform in fixed
Transform order. Version 2 is the strict variant: each record additionally
carries a 32-byte SHA-256 digest of the file contents between the byte size
and the hashes.

A cache whose magic, version, or mode tag does not match what the reader
expects is ignored with a warning rather than treated as an error.
"""

from __future__ import annotations

import hashlib
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

log = logging.getLogger(__name__)

MAGIC = b"PHCACHE1"
VERSION_PLAIN = 1
VERSION_STRICT = 2

_MODE_TAGS = {"paper6": 6, "full8": 8}
_TAG_MODES = {v: k for k, v in _MODE_TAGS.items()}


@dataclass(frozen=True)
class CacheRecord:
    byte_size: int
    hashes: tuple[int, ...]
    digest: bytes | None = None


def file_digest(path: Path | str) -> bytes:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.digest()


def write_cache(
    path: Path | str,
    mode: str,
    records: Mapping[str, CacheRecord],
    strict: bool = False,
) -> None:
    """Write all records, sorted by id; atomic via temp file + rename."""
    if mode not in _MODE_TAGS:
        raise ValueError(f"unknown mode {mode!r}")
    n_hashes = _MODE_TAGS[mode]
    version = VERSION_STRICT if strict else VERSION_PLAIN
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IBQ", version, n_hashes, len(records)))
        for image_id in sorted(records):
            rec = records[image_id]
            if len(rec.hashes) != n_hashes:
                raise ValueError(
                    f"record {image_id!r} has {len(rec.hashes)} hashes, mode needs {n_hashes}"
                )
            raw = image_id.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<Q", rec.byte_size))
            if strict:
                digest = rec.digest if rec.digest is not None else b"\x00" * 32
                f.write(digest)
            f.write(struct.pack(f"<{n_hashes}Q", *rec.hashes))
    os.replace(tmp, path)


def read_cache(path: Path | str, mode: str, strict: bool = False) -> dict[str, CacheRecord]:
    """Load a cache file; returns {} (with a warning) on any mismatch."""
    path = Path(path)
    if not path.exists():
        return {}
    expected_version = VERSION_STRICT if strict else VERSION_PLAIN
    try:
        data = path.read_bytes()
        if data[:8] != MAGIC:
            log.warning("cache %s: bad magic, ignoring", path)
            return {}
        version, n_hashes, count = struct.unpack_from("<IBQ", data, 8)
        if version != expected_version:
            log.warning(
                "cache %s: version %d does not match expected %d, ignoring",
                path,
                version,
                expected_version,
            )
            return {}
        if _TAG_MODES.get(n_hashes) != mode:
            log.warning("cache %s: mode tag %d does not match %r, ignoring", path, n_hashes, mode)
            return {}
        off = 8 + struct.calcsize("<IBQ")
        out: dict[str, CacheRecord] = {}
        for _ in range(count):
            (id_len,) = struct.unpack_from("<H", data, off)
            off += 2
            image_id = data[off : off + id_len].decode("utf-8")
            off += id_len
            (byte_size,) = struct.unpack_from("<Q", data, off)
            off += 8
            digest = None
            if version == VERSION_STRICT:
                digest = bytes(data[off : off + 32])
                off += 32
            hashes = struct.unpack_from(f"<{n_hashes}Q", data, off)
            off += 8 * n_hashes
            out[image_id] = CacheRecord(byte_size=byte_size, hashes=hashes, digest=digest)
        return out
    except (struct.error, UnicodeDecodeError, IndexError) as exc:
        log.warning("cache %s: unreadable (%s), ignoring", path, exc)
        return {}

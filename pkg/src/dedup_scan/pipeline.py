"""End-to-end dataset operations: ingest, hash, leakage, dedup, resplit.

Determinism contract: records are processed in sorted-id order and parallel
hash results are merged by sorting, so every report is byte-identical
regardless of worker count. The merged resplit uses a PCG64 permutation
seeded by the caller, documented in :func:`merge_resplit`.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import AugmentedHashes, augmented_hash_set, transforms_for_mode
from .errors import InvalidInputError, InvalidStateError, InvariantError
from .hashcache import CacheRecord, file_digest, read_cache, write_cache
from .index import DuplicateCluster, build_index, cluster, exact_collisions

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff"}


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: Path
    byte_size: int
    hashes: AugmentedHashes | None = None


@dataclass
class HashRunStats:
    computed: int = 0
    cache_hits: int = 0
    elapsed: float = 0.0


@dataclass
class SplitManifest:
    name: str
    records: list[ImageRecord]
    warnings: list[str] = field(default_factory=list)
    annotations_path: Path | None = None
    hash_stats: HashRunStats | None = None

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [r.image_id for r in self.records]

    def is_hashed(self) -> bool:
        return all(r.hashes is not None for r in self.records)

    def identity_hashes(self) -> dict[str, int]:
        self._require_hashed()
        return {r.image_id: r.hashes.identity_hash for r in self.records}

    def augmented_union(self) -> set[int]:
        self._require_hashed()
        out: set[int] = set()
        for r in self.records:
            out.update(r.hashes.hashes)
        return out

    def _require_hashed(self) -> None:
        if not self.is_hashed():
            raise InvalidStateError(f"manifest {self.name!r} has unhashed records")


def load_rgb(path: Path | str) -> np.ndarray:
    """Decode an image file to an (H, W, 3) uint8 array."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise InvalidInputError(f"cannot decode {path}: {exc}") from exc


def ingest(
    directory: Path | str,
    name: str | None = None,
    annotations_path: Path | str | None = None,
) -> SplitManifest:
    """List the decodable images of a directory, sorted by id (= file name).

    Files that fail a decode check are reported in ``manifest.warnings``
    and skipped; a missing directory is fatal.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidInputError(f"not a directory: {directory}")
    manifest = SplitManifest(
        name=name or directory.name,
        records=[],
        annotations_path=Path(annotations_path) if annotations_path else None,
    )
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        try:
            with Image.open(path) as img:
                img.verify()
        except Exception as exc:
            msg = f"{path.name}: undecodable ({exc})"
            manifest.warnings.append(msg)
            log.warning("%s: %s", directory, msg)
            continue
        manifest.records.append(
            ImageRecord(image_id=path.name, path=path, byte_size=path.stat().st_size)
        )
    seen: set[str] = set()
    for r in manifest.records:
        if r.image_id in seen:
            raise InvalidInputError(f"duplicate image id {r.image_id!r} in {directory}")
        seen.add(r.image_id)
    return manifest


def _hash_one(args: tuple[str, str, str, bool]) -> tuple[str, tuple[int, ...]]:
    image_id, path, mode, fast = args
    img = load_rgb(path)
    aug = augmented_hash_set(img, mode=mode, image_id=image_id, fast=fast)
    return image_id, aug.hashes


def hash_split(
    manifest: SplitManifest,
    mode: str = "paper6",
    cache_path: Path | str | None = None,
    workers: int = 1,
    strict_cache: bool = False,
    fast: bool = False,
) -> SplitManifest:
    """Fill every record's augmented hash set, using the cache where it hits.

    A cache record hits when its id and file byte size match; with
    ``strict_cache`` the file's SHA-256 digest must match as well. Results
    are independent of ``workers``.
    """
    transforms = transforms_for_mode(mode)
    t0 = time.monotonic()
    cached = read_cache(cache_path, mode, strict_cache) if cache_path else {}
    records = sorted(manifest.records, key=lambda r: r.image_id)

    digests: dict[str, bytes] = {}
    if strict_cache:
        digests = {r.image_id: file_digest(r.path) for r in records}

    hits: dict[str, tuple[int, ...]] = {}
    misses: list[ImageRecord] = []
    for r in records:
        hit = cached.get(r.image_id)
        if hit is not None and hit.byte_size == r.byte_size:
            if not strict_cache or hit.digest == digests[r.image_id]:
                hits[r.image_id] = hit.hashes
                continue
        misses.append(r)

    computed: dict[str, tuple[int, ...]] = {}
    tasks = [(r.image_id, str(r.path), mode, fast) for r in misses]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (workers * 4))
            for image_id, hashes in pool.map(_hash_one, tasks, chunksize=chunk):
                computed[image_id] = hashes
    else:
        for task in tasks:
            image_id, hashes = _hash_one(task)
            computed[image_id] = hashes

    out_records = []
    for r in records:
        hashes = hits.get(r.image_id) or computed[r.image_id]
        aug = AugmentedHashes(
            image_id=r.image_id, entries=tuple(zip(transforms, hashes))
        )
        out_records.append(replace(r, hashes=aug))

    if cache_path:
        cache_records = {
            r.image_id: CacheRecord(
                byte_size=r.byte_size,
                hashes=r.hashes.hashes,
                digest=digests.get(r.image_id),
            )
            for r in out_records
        }
        write_cache(cache_path, mode, cache_records, strict=strict_cache)

    stats = HashRunStats(
        computed=len(computed), cache_hits=len(hits), elapsed=time.monotonic() - t0
    )
    return SplitManifest(
        name=manifest.name,
        records=out_records,
        warnings=list(manifest.warnings),
        annotations_path=manifest.annotations_path,
        hash_stats=stats,
    )


@dataclass(frozen=True)
class LeakageReport:
    """One comparison row: how much of the haystack also occurs in the needles.

    ``percent`` is matched haystack images over haystack size; each haystack
    image counts at most once however many needle hashes it matches.
    """

    needles_name: str
    haystack_name: str
    haystack_total: int
    matched: int

    @property
    def percent(self) -> float:
        if self.haystack_total == 0:
            return 0.0
        return self.matched / self.haystack_total * 100.0

    def as_dict(self) -> dict:
        return {
            "needles": self.needles_name,
            "haystack": self.haystack_name,
            "haystack_total": self.haystack_total,
            "matched": self.matched,
            "percent": self.percent,
        }


def detect_leakage(
    needles: SplitManifest, haystack: SplitManifest, match: str = "augmented"
) -> LeakageReport:
    """Count haystack images whose identity hash occurs among the needles.

    ``match="exact"`` compares identity hashes only; ``match="augmented"``
    searches the union of the needles' augmented hash sets.
    """
    if match not in ("exact", "augmented"):
        raise InvalidInputError(f"match must be 'exact' or 'augmented', got {match!r}")
    if match == "exact":
        needle_hashes = set(needles.identity_hashes().values())
    else:
        needle_hashes = needles.augmented_union()
    haystack_ids = haystack.identity_hashes()
    matched = sum(1 for h in haystack_ids.values() if h in needle_hashes)
    return LeakageReport(
        needles_name=needles.name,
        haystack_name=haystack.name,
        haystack_total=len(haystack),
        matched=matched,
    )


def dedup_split(manifest: SplitManifest) -> tuple[SplitManifest, list[DuplicateCluster]]:
    """Collapse duplicate clusters to one retained image each.

    Retention is the lexicographically smallest member id. The returned
    manifest holds singletons plus retained members; ``len(unique) +
    sum(len(c) - 1) == len(manifest)``.
    """
    manifest._require_hashed()
    idx = build_index((r.hashes for r in manifest.records), split=manifest.name)
    edges = exact_collisions(idx)
    clusters = cluster(edges, manifest.ids())
    dropped = {m for c in clusters for m in c.members if m != c.retained}
    unique = SplitManifest(
        name=manifest.name,
        records=[r for r in manifest.records if r.image_id not in dropped],
        warnings=list(manifest.warnings),
        annotations_path=manifest.annotations_path,
    )
    return unique, clusters


def remove_leakage(
    train: SplitManifest, val: SplitManifest
) -> tuple[SplitManifest, list[str]]:
    """Drop train images whose identity hash occurs in any val augmented set.

    Removal is from the train side only; use :func:`mutual_leakage` to audit
    that the val->train direction is clean afterwards too.
    """
    val_hashes = val.augmented_union()
    removed = [
        r.image_id for r in train.records if r.hashes.identity_hash in val_hashes
    ]
    removed_set = set(removed)
    cleaned = SplitManifest(
        name=train.name,
        records=[r for r in train.records if r.image_id not in removed_set],
        warnings=list(train.warnings),
        annotations_path=train.annotations_path,
    )
    return cleaned, removed


def mutual_leakage(a: SplitManifest, b: SplitManifest) -> tuple[int, int]:
    """(images of a found in b's sets, images of b found in a's sets)."""
    in_b = sum(1 for h in a.identity_hashes().values() if h in b.augmented_union())
    in_a = sum(1 for h in b.identity_hashes().values() if h in a.augmented_union())
    return in_b, in_a


@dataclass
class ResplitResult:
    train: SplitManifest
    val: SplitManifest
    ratio: float
    seed: int


def merge_resplit(
    train: SplitManifest,
    val: SplitManifest,
    ratio: float = 0.9,
    seed: int = 0,
) -> ResplitResult:
    """Merge two leak-free manifests and split them ratio/(1-ratio).

    The pool is sorted by id, shuffled by a PCG64 permutation seeded with
    ``seed``, and the first ceil(ratio * n) images become the new train
    split. Identical inputs and seed give byte-identical assignments.
    """
    if not (0.0 < ratio < 1.0):
        raise InvalidInputError(f"ratio must be in (0, 1), got {ratio}")
    overlap = set(train.ids()) & set(val.ids())
    if overlap:
        raise InvalidStateError(f"inputs share image ids: {sorted(overlap)[:5]}")
    ab, ba = mutual_leakage(train, val)
    if ab or ba:
        raise InvalidStateError(
            f"inputs are not leak-free: {ab} train images in val sets, {ba} val images in train sets"
        )
    pool = sorted(train.records + val.records, key=lambda r: r.image_id)
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(pool))
    n_train = math.ceil(ratio * len(pool))
    train_ids = {pool[i].image_id for i in order[:n_train]}
    new_train = SplitManifest(
        name="train", records=[r for r in pool if r.image_id in train_ids]
    )
    new_val = SplitManifest(
        name="val", records=[r for r in pool if r.image_id not in train_ids]
    )
    if abs(len(new_train) - ratio * len(pool)) > 1.0:
        raise InvariantError("resplit sizes drifted from the requested ratio")
    return ResplitResult(train=new_train, val=new_val, ratio=ratio, seed=seed)


# ---------------------------------------------------------------------------
# report files

LEAKAGE_CSV_HEADER = (
    "Needles Set, Haystack Set, Total number of images in haystack, "
    "Number of needles in haystack, Data Leakage %"
)


def write_leakage_csv(reports: Sequence[LeakageReport], path: Path | str) -> None:
    lines = [LEAKAGE_CSV_HEADER]
    for r in reports:
        lines.append(
            f"{r.needles_name},{r.haystack_name},{r.haystack_total},{r.matched},{r.percent:.2f}%"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_leakage_json(reports: Sequence[LeakageReport], path: Path | str) -> None:
    import json

    payload = [r.as_dict() for r in reports]
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_audit_csv(rows: Iterable[tuple[str, str]], path: Path | str) -> None:
    """Disposition log: image id -> retained | duplicate-of:<id> | leaked."""
    lines = ["image id,disposition"]
    for image_id, disposition in sorted(rows):
        lines.append(f"{image_id},{disposition}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def audit_rows(
    manifest: SplitManifest,
    clusters: Sequence[DuplicateCluster],
    leaked: Iterable[str] = (),
) -> list[tuple[str, str]]:
    """Disposition of every input image; exactly one row per image."""
    disposition = {r.image_id: "retained" for r in manifest.records}
    for c in clusters:
        for m in c.members:
            if m != c.retained:
                disposition[m] = f"duplicate-of:{c.retained}"
    for image_id in leaked:
        disposition[image_id] = "leaked"
    if len(disposition) != len(manifest):
        raise InvariantError("audit lost or duplicated an image id")
    return sorted(disposition.items())


def write_manifest_json(manifest: SplitManifest, path: Path | str) -> None:
    import json

    payload = [
        {"image_id": r.image_id, "path": str(r.path), "byte_size": r.byte_size}
        for r in manifest.records
    ]
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

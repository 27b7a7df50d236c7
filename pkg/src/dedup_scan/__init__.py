"""Perceptual-hash dataset hygiene: find duplicates and cross-split leaks.

The pipeline hashes every image with a 64-bit DCT hash, expands each hash
over a fixed set of dihedral transforms, detects collisions, clusters
duplicates, removes cross-split leakage, and can re-split the cleaned pool
deterministically. See the README for the command-line surface.
"""

from .augment import (
    FULL8,
    PAPER6,
    AugmentedHashes,
    Transform,
    apply_transform,
    augmented_hash_set,
    compose,
    inverse,
    transforms_for_mode,
)
from .errors import (
    DedupScanError,
    InvalidInputError,
    InvalidStateError,
    InvariantError,
    UnsupportedInputError,
)
from .hashcache import CacheRecord, read_cache, write_cache
from .index import (
    CollisionEdge,
    DuplicateCluster,
    HashIndex,
    build_index,
    cluster,
    exact_collisions,
    hamming_query,
)
from .phash import compute_phash, dct2d, hamming, hash_hex, to_grayscale
from .pipeline import (
    ImageRecord,
    LeakageReport,
    ResplitResult,
    SplitManifest,
    dedup_split,
    detect_leakage,
    hash_split,
    ingest,
    merge_resplit,
    remove_leakage,
)
from .synth import CorpusSpec, GroundTruth, generate

__version__ = "0.1.0"

__all__ = [
    "AugmentedHashes",
    "CacheRecord",
    "CollisionEdge",
    "CorpusSpec",
    "DedupScanError",
    "DuplicateCluster",
    "FULL8",
    "GroundTruth",
    "HashIndex",
    "ImageRecord",
    "InvalidInputError",
    "InvalidStateError",
    "InvariantError",
    "LeakageReport",
    "PAPER6",
    "ResplitResult",
    "SplitManifest",
    "Transform",
    "UnsupportedInputError",
    "apply_transform",
    "augmented_hash_set",
    "build_index",
    "cluster",
    "compose",
    "compute_phash",
    "dct2d",
    "dedup_split",
    "detect_leakage",
    "exact_collisions",
    "generate",
    "hamming",
    "hamming_query",
    "hash_hex",
    "hash_split",
    "ingest",
    "inverse",
    "merge_resplit",
    "read_cache",
    "remove_leakage",
    "to_grayscale",
    "transforms_for_mode",
    "write_cache",
    "__version__",
]

"""Synthetic image corpora with planted duplicates, leaks, and ground truth.

Every generated file traces back to a textured base image. Bases are kept
orbit-separated: the full set of eight dihedral transform hashes of any
base is disjoint from every other base's set, so the only hash collisions
in a corpus are the planted ones and the ground-truth file is exact.
"""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .augment import PAPER6, Transform, apply_transform, augmented_hash_set
from .errors import InvalidInputError, InvariantError

log = logging.getLogger(__name__)

COARSE_GRID = 12
NOISE_SIGMA = 4.0
MAX_BASE_RETRIES = 64

AUG_DUP_TRANSFORMS = tuple(t for t in PAPER6 if t is not Transform.IDENTITY)
LEAK_TRANSFORMS = PAPER6


@dataclass(frozen=True)
class CorpusSpec:
    """Recipe for one corpus. All randomness flows from ``seed``.

    ``val_bases=None`` resolves to ``leaks + 50`` when leaks are planted
    (so some val images stay clean) and to zero otherwise.
    """

    train_dir: Path
    val_dir: Path
    seed: int = 0
    bases: int = 100
    image_size: int = 300
    exact_dups: int = 0
    aug_dups: int = 0
    leaks: int = 0
    val_bases: int | None = None
    annotations: bool = False

    def __post_init__(self) -> None:
        counts = (self.bases, self.exact_dups, self.aug_dups, self.leaks)
        if any(c < 0 for c in counts):
            raise InvalidInputError("corpus counts must be >= 0")
        if self.bases == 0 and (self.exact_dups or self.aug_dups):
            raise InvalidInputError("duplicates require at least one base")
        if self.image_size < 2:
            raise InvalidInputError("image size must be >= 2")
        if self.resolved_val_bases < self.leaks:
            raise InvalidInputError("each leak needs its own val base")

    @property
    def resolved_val_bases(self) -> int:
        if self.val_bases is not None:
            return self.val_bases
        return self.leaks + 50 if self.leaks else 0


@dataclass(frozen=True)
class ClusterTruth:
    members: tuple[str, ...]
    base: str
    transforms: dict[str, str] = field(compare=False)


@dataclass(frozen=True)
class LeakTruth:
    val_id: str
    train_id: str
    transform: str


@dataclass
class GroundTruth:
    seed: int
    image_size: int
    train_dir: str
    val_dir: str
    counts: dict[str, int]
    clusters: list[ClusterTruth]
    leaks: list[LeakTruth]
    train_ids: list[str]
    val_ids: list[str]

    def cluster_members(self) -> set[frozenset[str]]:
        return {frozenset(c.members) for c in self.clusters}

    def leaked_train_ids(self) -> set[str]:
        return {l.train_id for l in self.leaks}

    def expected_unique_train(self) -> list[str]:
        """Train ids surviving dedup (min-id retention) then leak removal."""
        dropped = {
            m for c in self.clusters for m in c.members if m != min(c.members)
        }
        gone = dropped | self.leaked_train_ids()
        return sorted(i for i in self.train_ids if i not in gone)

    def write(self, path: Path | str) -> None:
        payload = {
            "seed": self.seed,
            "image_size": self.image_size,
            "train_dir": self.train_dir,
            "val_dir": self.val_dir,
            "counts": self.counts,
            "clusters": [
                {
                    "members": list(c.members),
                    "base": c.base,
                    "transforms": c.transforms,
                }
                for c in self.clusters
            ],
            "leaks": [
                {"val": l.val_id, "train": l.train_id, "transform": l.transform}
                for l in self.leaks
            ],
            "train_ids": self.train_ids,
            "val_ids": self.val_ids,
        }
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: Path | str) -> "GroundTruth":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            seed=d["seed"],
            image_size=d["image_size"],
            train_dir=d["train_dir"],
            val_dir=d["val_dir"],
            counts=d["counts"],
            clusters=[
                ClusterTruth(
                    members=tuple(c["members"]),
                    base=c["base"],
                    transforms=c["transforms"],
                )
                for c in d["clusters"]
            ],
            leaks=[
                LeakTruth(val_id=l["val"], train_id=l["train"], transform=l["transform"])
                for l in d["leaks"]
            ],
            train_ids=d["train_ids"],
            val_ids=d["val_ids"],
        )


def _textured_base(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smoothed coarse noise plus fine noise; structured enough that the
    low-frequency block is far from degenerate."""
    coarse = rng.integers(0, 256, size=(COARSE_GRID, COARSE_GRID, 3), dtype=np.uint8)
    up = Image.fromarray(coarse).resize((size, size), Image.Resampling.BILINEAR)
    arr = np.asarray(up).astype(np.float32)
    arr += NOISE_SIGMA * rng.standard_normal(size=arr.shape, dtype=np.float32)
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def _save_png(arr: np.ndarray, path: Path) -> None:
    # low compression effort: the textured fields are incompressible anyway
    Image.fromarray(arr).save(path, format="PNG", compress_level=1)


def _orbit(arr: np.ndarray) -> frozenset[int]:
    # fast=True is safe here: it falls back to the pixel path unless the
    # transform-domain shortcut proved hash-exact in its startup self-test
    return frozenset(augmented_hash_set(arr, mode="full8", fast=True).hashes)


def _separated_base(
    rng: np.random.Generator, size: int, taken: set[int]
) -> tuple[np.ndarray, frozenset[int]]:
    for _ in range(MAX_BASE_RETRIES):
        arr = _textured_base(rng, size)
        orbit = _orbit(arr)
        if not (orbit & taken):
            taken.update(orbit)
            return arr, orbit
    raise InvariantError(
        f"could not draw an orbit-separated base in {MAX_BASE_RETRIES} tries; "
        "image size too small for the requested corpus"
    )


def generate(spec: CorpusSpec, ground_truth_path: Path | str | None = None) -> GroundTruth:
    """Write the corpus and its ground-truth JSON; return the ground truth.

    Deterministic: identical spec gives byte-identical files. Fixed draw
    order (names, train bases, val bases, duplicate placement, transforms,
    leak placement, annotation boxes) keeps the stream stable.
    """
    train_dir = Path(spec.train_dir)
    val_dir = Path(spec.val_dir)
    train_dir.mkdir(parents=True, exist_ok=True)
    val_dir.mkdir(parents=True, exist_ok=True)

    n_val = spec.resolved_val_bases
    n_train_total = spec.bases + spec.exact_dups + spec.aug_dups + spec.leaks
    total = n_train_total + n_val

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    perm = rng.permutation(total)
    names = [f"{int(k):012d}.png" for k in perm]
    cursor = 0

    def next_name() -> str:
        nonlocal cursor
        name = names[cursor]
        cursor += 1
        return name

    taken: set[int] = set()
    base_arrays: list[np.ndarray] = []
    base_names: list[str] = []
    for _ in range(spec.bases):
        arr, _orb = _separated_base(rng, spec.image_size, taken)
        name = next_name()
        _save_png(arr, train_dir / name)
        base_arrays.append(arr)
        base_names.append(name)

    val_arrays: list[np.ndarray] = []
    val_names: list[str] = []
    for _ in range(n_val):
        arr, _orb = _separated_base(rng, spec.image_size, taken)
        name = next_name()
        _save_png(arr, val_dir / name)
        val_arrays.append(arr)
        val_names.append(name)

    # copies: {base index: [(member name, transform name), ...]}
    copies: dict[int, list[tuple[str, str]]] = {}
    if spec.exact_dups:
        owners = rng.integers(0, spec.bases, size=spec.exact_dups)
        for owner in owners:
            name = next_name()
            shutil.copyfile(train_dir / base_names[owner], train_dir / name)
            copies.setdefault(int(owner), []).append((name, Transform.IDENTITY.name))
    if spec.aug_dups:
        owners = rng.integers(0, spec.bases, size=spec.aug_dups)
        choices = rng.integers(0, len(AUG_DUP_TRANSFORMS), size=spec.aug_dups)
        for owner, pick in zip(owners, choices):
            t = AUG_DUP_TRANSFORMS[int(pick)]
            name = next_name()
            _save_png(apply_transform(base_arrays[owner], t), train_dir / name)
            copies.setdefault(int(owner), []).append((name, t.name))

    leaks: list[LeakTruth] = []
    if spec.leaks:
        sources = rng.choice(n_val, size=spec.leaks, replace=False)
        choices = rng.integers(0, len(LEAK_TRANSFORMS), size=spec.leaks)
        for src, pick in zip(sources, choices):
            t = LEAK_TRANSFORMS[int(pick)]
            name = next_name()
            _save_png(apply_transform(val_arrays[src], t), train_dir / name)
            leaks.append(
                LeakTruth(val_id=val_names[int(src)], train_id=name, transform=t.name)
            )

    clusters = []
    for owner in sorted(copies):
        members = [base_names[owner]] + [n for n, _ in copies[owner]]
        transforms = {base_names[owner]: Transform.IDENTITY.name}
        transforms.update({n: t for n, t in copies[owner]})
        clusters.append(
            ClusterTruth(
                members=tuple(sorted(members)),
                base=base_names[owner],
                transforms=transforms,
            )
        )

    train_ids = sorted(
        base_names
        + [n for members in copies.values() for n, _ in members]
        + [l.train_id for l in leaks]
    )
    val_ids = sorted(val_names)
    if len(train_ids) != n_train_total or len(set(train_ids)) != n_train_total:
        raise InvariantError("train id bookkeeping lost an image")

    if spec.annotations:
        _write_annotations(rng, train_dir, train_ids, spec.image_size)
        _write_annotations(rng, val_dir, val_ids, spec.image_size)

    truth = GroundTruth(
        seed=spec.seed,
        image_size=spec.image_size,
        train_dir=str(train_dir),
        val_dir=str(val_dir),
        counts={
            "train_images": n_train_total,
            "val_images": n_val,
            "bases": spec.bases,
            "exact_dups": spec.exact_dups,
            "aug_dups": spec.aug_dups,
            "leaks": spec.leaks,
            "val_bases": n_val,
        },
        clusters=clusters,
        leaks=leaks,
        train_ids=train_ids,
        val_ids=val_ids,
    )
    if ground_truth_path is None:
        ground_truth_path = train_dir.parent / "ground_truth.json"
    truth.write(ground_truth_path)
    return truth


def annotations_path_for(directory: Path | str) -> Path:
    directory = Path(directory)
    return directory.parent / f"{directory.name}_ann.json"


def _write_annotations(
    rng: np.random.Generator, directory: Path, ids: list[str], size: int
) -> None:
    """Boxed-object annotations in detection layout, 0..3 boxes per image."""
    images = []
    annotations = []
    ann_id = 0
    for img_id, name in enumerate(ids):
        images.append({"id": img_id, "file_name": name, "width": size, "height": size})
        for _ in range(int(rng.integers(0, 4))):
            x = int(rng.integers(0, max(1, size - 2)))
            y = int(rng.integers(0, max(1, size - 2)))
            w = int(rng.integers(1, size - x))
            h = int(rng.integers(1, size - y))
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": img_id,
                    "category_id": 1,
                    "bbox": [x, y, w, h],
                    "area": w * h,
                    "segmentation": [[x, y, x + w, y, x + w, y + h, x, y + h]],
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    payload = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "object"}],
    }
    annotations_path_for(directory).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

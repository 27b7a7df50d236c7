"""Minimal COCO object-detection annotation handling.

Only the pieces this package needs: load, validate referential integrity,
filter to a kept set of images, and write back deterministically. The
schema is the standard detection layout (images / annotations /
categories); unknown top-level keys are preserved untouched.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidInputError

log = logging.getLogger(__name__)


@dataclass
class CocoDataset:
    images: list[dict]
    annotations: list[dict]
    categories: list[dict]
    extra: dict = field(default_factory=dict)

    def image_ids(self) -> set[int]:
        return {img["id"] for img in self.images}

    def file_names(self) -> set[str]:
        return {img["file_name"] for img in self.images}

    def annotations_by_image(self) -> dict[int, list[dict]]:
        out: dict[int, list[dict]] = {}
        for ann in self.annotations:
            out.setdefault(ann["image_id"], []).append(ann)
        return out


def read_coco(path: Path | str) -> CocoDataset:
    """Load and sanity-check a COCO annotation file.

    Structural problems (missing keys, wrong types) are fatal; dangling
    annotation references are logged and kept so filtering can account
    for them explicitly.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read annotations {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise InvalidInputError(f"{path}: top level must be an object")
    for key in ("images", "annotations"):
        if not isinstance(payload.get(key), list):
            raise InvalidInputError(f"{path}: missing or non-list {key!r}")
    images = payload["images"]
    annotations = payload["annotations"]
    categories = payload.get("categories", [])
    for img in images:
        if "id" not in img or "file_name" not in img:
            raise InvalidInputError(f"{path}: image entry without id/file_name")
    ids = [img["id"] for img in images]
    if len(ids) != len(set(ids)):
        raise InvalidInputError(f"{path}: duplicate image ids")
    names = [img["file_name"] for img in images]
    if len(names) != len(set(names)):
        raise InvalidInputError(f"{path}: duplicate file names")
    known = set(ids)
    dangling = sum(1 for a in annotations if a.get("image_id") not in known)
    if dangling:
        log.warning(
            "%s: dropping %d annotations that reference unknown images", path, dangling
        )
        annotations = [a for a in annotations if a.get("image_id") in known]
    extra = {
        k: v
        for k, v in payload.items()
        if k not in ("images", "annotations", "categories")
    }
    return CocoDataset(
        images=images, annotations=annotations, categories=categories, extra=extra
    )


def filter_coco(
    dataset: CocoDataset, keep_file_names: set[str], remap_ids: bool = False
) -> CocoDataset:
    """Restrict a dataset to the images named in ``keep_file_names``.

    Annotations referencing a dropped (or unknown) image are dropped with
    it. With ``remap_ids`` the surviving images get dense ids 0..n-1 in
    file-name order and annotations are rewritten to match.
    """
    kept_images = [img for img in dataset.images if img["file_name"] in keep_file_names]
    kept_ids = {img["id"] for img in kept_images}
    kept_annotations = [a for a in dataset.annotations if a.get("image_id") in kept_ids]
    if remap_ids:
        kept_images = sorted(kept_images, key=lambda img: img["file_name"])
        mapping = {img["id"]: i for i, img in enumerate(kept_images)}
        kept_images = [{**img, "id": mapping[img["id"]]} for img in kept_images]
        kept_annotations = [
            {**a, "image_id": mapping[a["image_id"]]} for a in kept_annotations
        ]
    return CocoDataset(
        images=kept_images,
        annotations=kept_annotations,
        categories=list(dataset.categories),
        extra=dict(dataset.extra),
    )


def merge_coco(a: CocoDataset, b: CocoDataset) -> CocoDataset:
    """Concatenate two datasets, renumbering ids to avoid collisions.

    Categories must agree by id; file names must be disjoint. Annotation
    ids are renumbered densely, image ids densely in file-name order.
    """
    cats_a = {c["id"]: c.get("name") for c in a.categories}
    cats_b = {c["id"]: c.get("name") for c in b.categories}
    for cid, name in cats_b.items():
        if cid in cats_a and cats_a[cid] != name:
            raise InvalidInputError(f"category id {cid} means different things")
    if a.file_names() & b.file_names():
        raise InvalidInputError("cannot merge datasets that share file names")

    images: list[dict] = []
    annotations: list[dict] = []
    for ds, tag in ((a, 0), (b, 1)):
        by_image = ds.annotations_by_image()
        for img in ds.images:
            images.append({**img, "_src": (tag, img["id"])})
            for ann in by_image.get(img["id"], []):
                annotations.append({**ann, "_src": (tag, img["id"])})

    images.sort(key=lambda img: img["file_name"])
    mapping = {img["_src"]: i for i, img in enumerate(images)}
    for img in images:
        img["id"] = mapping[img["_src"]]
        del img["_src"]
    for i, ann in enumerate(annotations):
        ann["image_id"] = mapping[ann["_src"]]
        ann["id"] = i
        del ann["_src"]

    categories = {c["id"]: c for c in (*a.categories, *b.categories)}
    return CocoDataset(
        images=images,
        annotations=annotations,
        categories=[categories[k] for k in sorted(categories)],
        extra={**a.extra, **b.extra},
    )


def write_coco(dataset: CocoDataset, path: Path | str) -> None:
    """Serialize deterministically: sorted keys, images by file name."""
    payload = {
        **dataset.extra,
        "images": sorted(dataset.images, key=lambda img: img["file_name"]),
        "annotations": sorted(
            dataset.annotations, key=lambda a: (a.get("image_id", -1), a.get("id", -1))
        ),
        "categories": dataset.categories,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def annotation_counts(dataset: CocoDataset) -> dict[str, int]:
    """Per-file-name annotation counts, zero-filled for unannotated images."""
    by_image = dataset.annotations_by_image()
    return {
        img["file_name"]: len(by_image.get(img["id"], [])) for img in dataset.images
    }

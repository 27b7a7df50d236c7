"""Hash multimap, collision edges, duplicate clustering, Hamming search.

Collision edges by default require an identity-hash endpoint: if two images
collide only through augmented hashes, their identity hashes collide in some
other bucket anyway, so insisting on an identity side avoids double counting
without losing pairs. ``admit_augmented_pairs=True`` lifts that restriction
for audit-style comparisons of augmented sets against augmented sets.

Clustering is equivalence closure (union-find) over the edges. This matters
because the six-transform augmentation set is not closed under composition:
a chain A -rot90- B -fliph- C must land in one cluster even though A and C
differ by a diagonal flip that is outside the set.

Hamming-radius queries use multi-index hashing: each 64-bit code is split
into four disjoint 16-bit bands; two codes within distance 3 agree exactly
on at least one band (pigeonhole), so band-table probes plus verification
give exact results. Larger radii fall back to a linear scan.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .augment import AugmentedHashes, Transform
from .errors import InvalidInputError

_BANDS = 4
_BAND_BITS = 16
_BAND_MASK = 0xFFFF
MIH_MAX_RADIUS = 8


@dataclass(frozen=True)
class CollisionEdge:
    """One colliding image pair.

    ``transform`` comes from ``image_a``'s hash set and produced the shared
    value; ``image_b`` holds it as its identity hash (or, in augmented-pair
    mode, possibly as another augmented hash).
    """

    image_a: str
    image_b: str
    transform: Transform
    hash_value: int

    def pair(self) -> tuple[str, str]:
        return (min(self.image_a, self.image_b), max(self.image_a, self.image_b))


@dataclass
class DuplicateCluster:
    cluster_id: int
    members: tuple[str, ...]
    retained: str


class HashIndex:
    """Multimap from 64-bit hash to (image id, split tag, transform) entries."""

    def __init__(self) -> None:
        self._buckets: dict[int, list[tuple[str, str, Transform]]] = {}
        self._ids: set[str] = set()
        self._mih: _BandTables | None = None

    def add(self, hashes: AugmentedHashes, split: str = "") -> None:
        if hashes.image_id in self._ids:
            raise InvalidInputError(f"duplicate image id {hashes.image_id!r}")
        self._ids.add(hashes.image_id)
        for t, h in hashes.entries:
            self._buckets.setdefault(h, []).append((hashes.image_id, split, t))
        self._mih = None

    def __len__(self) -> int:
        return sum(len(v) for v in self._buckets.values())

    @property
    def image_ids(self) -> frozenset[str]:
        return frozenset(self._ids)

    def bucket(self, h: int) -> tuple[tuple[str, str, Transform], ...]:
        return tuple(self._buckets.get(h, ()))

    def items(self) -> Iterator[tuple[int, tuple[tuple[str, str, Transform], ...]]]:
        """Buckets sorted by hash, entries by (image id, transform)."""
        for h in sorted(self._buckets):
            entries = sorted(self._buckets[h], key=lambda e: (e[0], int(e[2])))
            yield h, tuple(entries)

    def identity_entries(self) -> list[tuple[str, int]]:
        out = [
            (image_id, h)
            for h, entries in self._buckets.items()
            for image_id, _, t in entries
            if t is Transform.IDENTITY
        ]
        out.sort()
        return out

    def _band_tables(self) -> "_BandTables":
        if self._mih is None:
            self._mih = _BandTables(self.identity_entries())
        return self._mih


def build_index(sets: Iterable[AugmentedHashes], split: str = "") -> HashIndex:
    index = HashIndex()
    for s in sets:
        index.add(s, split=split)
    return index


def exact_collisions(
    index: HashIndex, admit_augmented_pairs: bool = False
) -> list[CollisionEdge]:
    """One deterministic edge per unordered image pair sharing a bucket."""
    best: dict[tuple[str, str], tuple[int, int, CollisionEdge]] = {}
    for h, entries in index.items():
        if len(entries) < 2:
            continue
        by_image: dict[str, list[Transform]] = {}
        for image_id, _, t in entries:
            by_image.setdefault(image_id, []).append(t)
        images = sorted(by_image)
        if len(images) < 2:
            continue
        for i, x in enumerate(images):
            for y in images[i + 1 :]:
                tx, ty = by_image[x], by_image[y]
                x_id = Transform.IDENTITY in tx
                y_id = Transform.IDENTITY in ty
                if not (x_id or y_id or admit_augmented_pairs):
                    continue
                if x_id and y_id:
                    edge = CollisionEdge(x, y, Transform.IDENTITY, h)
                elif y_id:
                    edge = CollisionEdge(x, y, min(tx), h)
                elif x_id:
                    edge = CollisionEdge(y, x, min(ty), h)
                else:
                    edge = CollisionEdge(x, y, min(tx), h)
                key = (x, y)
                rank = (int(edge.transform), h)
                if key not in best or rank < best[key][:2]:
                    best[key] = (*rank, edge)
    return [best[k][2] for k in sorted(best)]


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, ids: Iterable[str]) -> None:
        self._parent = {i: i for i in ids}
        self._size = {i: 1 for i in self._parent}

    def find(self, x: str) -> str:
        root = x
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[x] != root:
            self._parent[x], x = root, self._parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] += self._size[rb]

    def components(self) -> list[list[str]]:
        groups: dict[str, list[str]] = {}
        for x in self._parent:
            groups.setdefault(self.find(x), []).append(x)
        return [sorted(g) for g in sorted(groups.values())]


def cluster(edges: Iterable[CollisionEdge], all_ids: Iterable[str]) -> list[DuplicateCluster]:
    """Connected components of the collision graph, singletons excluded.

    The retained member is the lexicographically smallest id, a fixed
    deterministic choice. Cluster ids run 0..k-1 in retained-id order.
    """
    ids = sorted(set(all_ids))
    known = set(ids)
    uf = UnionFind(ids)
    for e in edges:
        if e.image_a not in known or e.image_b not in known:
            raise InvalidInputError(
                f"edge references unknown id: {e.image_a!r} / {e.image_b!r}"
            )
        uf.union(e.image_a, e.image_b)
    out = []
    for members in uf.components():
        if len(members) < 2:
            continue
        out.append(
            DuplicateCluster(
                cluster_id=len(out), members=tuple(members), retained=members[0]
            )
        )
    return out


class _BandTables:
    """Identity hashes split into four 16-bit band tables, plus flat arrays."""

    def __init__(self, identity_entries: list[tuple[str, int]]) -> None:
        self.ids = [e[0] for e in identity_entries]
        self.hashes = np.array([e[1] for e in identity_entries], dtype=np.uint64)
        self.tables: list[dict[int, list[int]]] = [{} for _ in range(_BANDS)]
        for idx, (_, h) in enumerate(identity_entries):
            for b in range(_BANDS):
                band = (h >> (b * _BAND_BITS)) & _BAND_MASK
                self.tables[b].setdefault(band, []).append(idx)


def hamming_query(
    index: HashIndex, probe: int, radius: int
) -> list[tuple[str, int]]:
    """All indexed identity hashes within Hamming distance <= radius.

    Exact (no false negatives): band probing covers radius <= 3, larger
    radii up to 8 use a linear scan. Results sorted by (distance, id).
    """
    if not isinstance(radius, int) or isinstance(radius, bool):
        raise InvalidInputError(f"radius must be an int, got {radius!r}")
    if radius < 0 or radius > MIH_MAX_RADIUS:
        raise InvalidInputError(f"radius must be in [0, {MIH_MAX_RADIUS}], got {radius}")
    mih = index._band_tables()
    if len(mih.ids) == 0:
        return []
    out: list[tuple[str, int]] = []
    if radius <= 3:
        candidates: set[int] = set()
        for b in range(_BANDS):
            band = (probe >> (b * _BAND_BITS)) & _BAND_MASK
            candidates.update(mih.tables[b].get(band, ()))
        for idx in candidates:
            d = ((int(mih.hashes[idx]) ^ probe) & 0xFFFFFFFFFFFFFFFF).bit_count()
            if d <= radius:
                out.append((mih.ids[idx], d))
    else:
        dists = _kernels.hamming_distances(probe, mih.hashes)
        for idx in np.flatnonzero(dists <= radius):
            out.append((mih.ids[int(idx)], int(dists[int(idx)])))
    out.sort(key=lambda r: (r[1], r[0]))
    return out

"""Command-line surface: hash, dedup, leakage, resplit, synth.

Exit codes: 0 success, 1 bad input, 2 internal invariant violation.
Reports go to files under --out; progress lines to stdout; warnings to
stderr. Report files carry no timestamps, so identical inputs and flags
give byte-identical outputs at any worker count.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import synth as synth_mod
from .coco import filter_coco, merge_coco, read_coco, write_coco
from .errors import DedupScanError, InvariantError
from .pipeline import (
    SplitManifest,
    audit_rows,
    dedup_split,
    detect_leakage,
    hash_split,
    ingest,
    merge_resplit,
    remove_leakage,
    write_audit_csv,
    write_leakage_csv,
    write_leakage_json,
    write_manifest_json,
)

log = logging.getLogger(__name__)

CACHE_ENV = "DEDUP_SCAN_CACHE"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, not argparse's 2
        raise DedupScanError(message)


def _add_common(p: argparse.ArgumentParser, *, cache: bool = True) -> None:
    p.add_argument("--mode", choices=("paper6", "full8"), default="paper6")
    if cache:
        p.add_argument(
            "--cache",
            default=os.environ.get(CACHE_ENV) or None,
            help=f"cache directory (default: ${CACHE_ENV})",
        )
        p.add_argument("--strict-cache", action="store_true")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dedup-scan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hash", parents=[], help="hash splits into the cache")
    p.add_argument("--train-dir")
    p.add_argument("--val-dir")
    _add_common(p)
    p.set_defaults(func=cmd_hash)

    p = sub.add_parser("dedup", help="deduplicate splits, write clusters and audit")
    p.add_argument("--train-dir")
    p.add_argument("--val-dir")
    p.add_argument("--train-ann")
    p.add_argument("--val-ann")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("leakage", help="cross-split leakage report")
    p.add_argument("--train-dir", required=True)
    p.add_argument("--val-dir", required=True)
    p.add_argument("--match", choices=("exact", "augmented"), default="augmented")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_leakage)

    p = sub.add_parser("resplit", help="dedup, remove leaks, merge, resplit")
    p.add_argument("--train-dir", required=True)
    p.add_argument("--val-dir", required=True)
    p.add_argument("--train-ann")
    p.add_argument("--val-ann")
    p.add_argument("--ratio", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_resplit)

    p = sub.add_parser("synth", help="generate a planted-ground-truth corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bases", type=int, default=100)
    p.add_argument("--image-size", type=int, default=300)
    p.add_argument("--exact-dups", type=int, default=0)
    p.add_argument("--aug-dups", type=int, default=0)
    p.add_argument("--leaks", type=int, default=0)
    p.add_argument("--val-bases", type=int, default=None)
    p.add_argument("--annotations", action="store_true")
    p.set_defaults(func=cmd_synth)

    return parser


def _cache_file(args, role: str) -> Path | None:
    if not getattr(args, "cache", None):
        return None
    cache_dir = Path(args.cache)
    cache_dir.mkdir(parents=True, exist_ok=True)
    return cache_dir / f"{role}.phcache"


def _load_split(args, role: str) -> SplitManifest | None:
    directory = getattr(args, f"{role}_dir", None)
    if not directory:
        return None
    ann = getattr(args, f"{role}_ann", None)
    manifest = ingest(directory, name=role, annotations_path=ann)
    return hash_split(
        manifest,
        mode=args.mode,
        cache_path=_cache_file(args, role),
        workers=args.workers,
        strict_cache=getattr(args, "strict_cache", False),
    )


def _report_hash(manifest: SplitManifest) -> None:
    s = manifest.hash_stats
    total = len(manifest)
    pct = 100.0 * s.cache_hits / total if total else 0.0
    print(
        f"{manifest.name}: {total} images, {s.cache_hits} cache hits ({pct:.0f}%), "
        f"{s.computed} computed, {s.elapsed:.2f}s"
    )


def cmd_hash(args) -> int:
    if not (args.train_dir or args.val_dir):
        raise DedupScanError("hash needs --train-dir and/or --val-dir")
    if not getattr(args, "cache", None):
        raise DedupScanError(f"hash needs --cache (or ${CACHE_ENV})")
    for role in ("train", "val"):
        manifest = _load_split(args, role)
        if manifest is not None:
            _report_hash(manifest)
    return 0


def _write_clusters(path: Path, entries: list[dict]) -> None:
    path.write_text(
        json.dumps(entries, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_dedup(args) -> int:
    if not (args.train_dir or args.val_dir):
        raise DedupScanError("dedup needs --train-dir and/or --val-dir")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cluster_entries: list[dict] = []
    for role in ("train", "val"):
        manifest = _load_split(args, role)
        if manifest is None:
            continue
        unique, clusters = dedup_split(manifest)
        cluster_entries.extend(
            {
                "split": role,
                "cluster_id": c.cluster_id,
                "members": list(c.members),
                "retained": c.retained,
            }
            for c in clusters
        )
        write_audit_csv(audit_rows(manifest, clusters), out / f"audit_{role}.csv")
        write_manifest_json(unique, out / f"{role}_unique.json")
        ann = getattr(args, f"{role}_ann", None)
        if ann:
            ds = filter_coco(read_coco(ann), set(unique.ids()))
            write_coco(ds, out / f"{role}_ann_unique.json")
        print(f"{role}: {len(manifest)} images, {len(unique)} unique, {len(clusters)} clusters")
    _write_clusters(out / "clusters.json", cluster_entries)
    return 0


def cmd_leakage(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = _load_split(args, "train")
    val = _load_split(args, "val")
    reports = [
        detect_leakage(train, val, match=args.match),
        detect_leakage(val, train, match=args.match),
    ]
    if args.format == "csv":
        write_leakage_csv(reports, out / "leakage.csv")
    else:
        write_leakage_json(reports, out / "leakage.json")
    for r in reports:
        print(
            f"{r.needles_name} vs {r.haystack_name}: {r.matched}/{r.haystack_total} "
            f"({r.percent:.2f}%)"
        )
    return 0


def cmd_resplit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = _load_split(args, "train")
    val = _load_split(args, "val")

    train_unique, train_clusters = dedup_split(train)
    val_unique, val_clusters = dedup_split(val)

    leak_reports = [
        detect_leakage(val_unique, train_unique, match="augmented"),
        detect_leakage(train_unique, val_unique, match="augmented"),
    ]
    write_leakage_csv(leak_reports, out / "leakage.csv")
    write_leakage_json(leak_reports, out / "leakage.json")

    train_clean, leaked = remove_leakage(train_unique, val_unique)
    result = merge_resplit(train_clean, val_unique, ratio=args.ratio, seed=args.seed)

    cluster_entries = [
        {
            "split": role,
            "cluster_id": c.cluster_id,
            "members": list(c.members),
            "retained": c.retained,
        }
        for role, clusters in (("train", train_clusters), ("val", val_clusters))
        for c in clusters
    ]
    _write_clusters(out / "clusters.json", cluster_entries)
    write_audit_csv(
        audit_rows(train, train_clusters, leaked), out / "audit_train.csv"
    )
    write_audit_csv(audit_rows(val, val_clusters), out / "audit_val.csv")
    write_manifest_json(result.train, out / "train_manifest.json")
    write_manifest_json(result.val, out / "val_manifest.json")

    if args.train_ann and args.val_ann:
        train_ds = filter_coco(read_coco(args.train_ann), set(train_clean.ids()))
        val_ds = filter_coco(read_coco(args.val_ann), set(val_unique.ids()))
        merged = merge_coco(train_ds, val_ds)
        write_coco(
            filter_coco(merged, set(result.train.ids()), remap_ids=True),
            out / "train_ann.json",
        )
        write_coco(
            filter_coco(merged, set(result.val.ids()), remap_ids=True),
            out / "val_ann.json",
        )

    summary = {
        "mode": args.mode,
        "ratio": args.ratio,
        "seed": args.seed,
        "train_input": len(train),
        "val_input": len(val),
        "train_unique": len(train_unique),
        "val_unique": len(val_unique),
        "train_clusters": len(train_clusters),
        "val_clusters": len(val_clusters),
        "leaks_removed": len(leaked),
        "merged_pool": len(train_clean) + len(val_unique),
        "final_train": len(result.train),
        "final_val": len(result.val),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"train {len(train)} -> unique {len(train_unique)} -> clean {len(train_clean)}; "
        f"val {len(val)} -> unique {len(val_unique)}; "
        f"resplit {len(result.train)}/{len(result.val)} at {args.ratio}"
    )
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    spec = synth_mod.CorpusSpec(
        train_dir=out / "train",
        val_dir=out / "val",
        seed=args.seed,
        bases=args.bases,
        image_size=args.image_size,
        exact_dups=args.exact_dups,
        aug_dups=args.aug_dups,
        leaks=args.leaks,
        val_bases=args.val_bases,
        annotations=args.annotations,
    )
    truth = synth_mod.generate(spec, ground_truth_path=out / "ground_truth.json")
    print(
        f"corpus: {truth.counts['train_images']} train, {truth.counts['val_images']} val, "
        f"{len(truth.clusters)} planted clusters, {len(truth.leaks)} planted leaks"
    )
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except DedupScanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except DedupScanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything unplanned is an internal failure
        log.exception("unhandled failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

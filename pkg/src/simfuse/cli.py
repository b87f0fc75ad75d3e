"""Command-line surface: ingest, synth, search, analyze, bapps.

Exit codes are a stable contract: 0 success, 1 validation or data error,
2 usage error. All outputs are deterministic: identical inputs and
configuration produce byte-identical files regardless of worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from math import comb
from pathlib import Path

from . import analysis as ana
from . import patch as pm
from .search import (
    SearchResults,
    best_entry,
    search_all,
    write_best_per_size_csv,
    write_results_csv,
)
from .similarity import (
    NormStats,
    SimilarityMatrix,
    combine_normalized,
    combine_raw,
    cosine_similarity_matrix,
    matrix_stats,
    recall_at_k,
)
from .store import (
    PairedGallery,
    ValidationError,
    load_gallery,
    read_feature_set,
    validate_feature_set,
    write_feature_set,
)
from .subsets import MAX_REPRESENTATIONS, SubsetMask
from .synth import SynthSpec, write_synth_gallery
from .tensorfile import (
    FormatError,
    checksum64,
    from_f32_bytes,
    read_manifest,
    read_payload,
    to_f32_bytes,
    write_manifest,
    write_payload,
)

SCHEMA_VERSION = ana.SCHEMA_VERSION
CACHE_ENV = "SIMFUSE_CACHE_DIR"


# -- similarity-matrix cache ---------------------------------------------------


def _cache_path(cache_dir: Path, left_fs, right_fs) -> Path:
    key = checksum64(
        to_f32_bytes(left_fs.rows) + b"|" + to_f32_bytes(right_fs.rows)
    )
    return cache_dir / f"sim_{left_fs.repr_name}_{key}.json"


def _load_cached_matrix(path: Path, repr_name: str, n: int) -> SimilarityMatrix | None:
    if not path.is_file():
        return None
    manifest = read_manifest(path)
    if manifest.get("n_items") != n or manifest.get("dim") != n:
        return None
    data = read_payload(path, manifest)
    return SimilarityMatrix(repr_name=repr_name, values=from_f32_bytes(data, (n, n)))


def _store_cached_matrix(path: Path, mat: SimilarityMatrix) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload_file = path.stem + ".bin"
    checksum = write_payload(path, payload_file, to_f32_bytes(mat.values))
    write_manifest(
        path,
        {
            "repr_name": mat.repr_name,
            "n_items": mat.n,
            "dim": mat.n,
            "item_ids": [],
            "checksum": checksum,
            "payload_file": payload_file,
        },
    )


def _similarity_stack(
    gallery: PairedGallery, cache_dir: Path | None
) -> list[SimilarityMatrix]:
    stack = []
    for left_fs, right_fs in zip(gallery.left, gallery.right):
        mat = None
        cache_file = None
        if cache_dir is not None:
            cache_file = _cache_path(cache_dir, left_fs, right_fs)
            mat = _load_cached_matrix(cache_file, left_fs.repr_name, gallery.n_pairs)
        if mat is None:
            mat = cosine_similarity_matrix(left_fs, right_fs)
            if cache_file is not None:
                _store_cached_matrix(cache_file, mat)
        stack.append(mat)
    return stack


def _validated_gallery(path: str) -> PairedGallery:
    gallery = load_gallery(path)
    for fs in (*gallery.left, *gallery.right):
        report = validate_feature_set(fs)
        if not report.ok:
            raise ValidationError(
                f"{fs.repr_name}: {len(report.violating_rows)} rows violate the "
                f"unit-norm tolerance (first at index {report.violating_rows[0]}); "
                "run `simfuse ingest --renormalize` first"
            )
    return gallery


def _resolve_cache_dir(args) -> Path | None:
    if getattr(args, "no_cache", False):
        return None
    explicit = getattr(args, "cache_dir", None)
    if explicit:
        return Path(explicit)
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else None


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- subcommands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    failures = 0
    for manifest_path in args.manifests:
        fs = read_feature_set(manifest_path)
        try:
            report = validate_feature_set(fs, renormalize=args.renormalize)
        except ValidationError as exc:
            print(f"{manifest_path}: ERROR {exc}")
            failures += 1
            continue
        if report.ok:
            print(
                f"{manifest_path}: ok ({fs.n_items} rows, dim {fs.dim}, "
                f"repr {fs.repr_name})"
            )
            continue
        if args.renormalize:
            out_path = (
                Path(args.out_dir) / Path(manifest_path).name
                if args.out_dir
                else Path(manifest_path)
            )
            if args.out_dir:
                Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            write_feature_set(
                report.corrected.rows, fs.repr_name, fs.item_ids, out_path
            )
            print(
                f"{manifest_path}: renormalized {len(report.violating_rows)} rows "
                f"-> {out_path}"
            )
        else:
            print(
                f"{manifest_path}: FAIL {len(report.violating_rows)} rows deviate "
                f"from unit norm (first at index {report.violating_rows[0]})"
            )
            failures += 1
    return 1 if failures else 0


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    try:
        spec = SynthSpec.from_json(spec_path.read_text())
    except json.JSONDecodeError as exc:
        print(f"{spec_path}: JSON parse error at line {exc.lineno}, column {exc.colno}: "
              f"{exc.msg}", file=sys.stderr)
        return 1
    manifest = write_synth_gallery(spec, args.out_dir)
    print(f"wrote gallery manifest {manifest}")
    for entry in sorted(Path(args.out_dir).glob("*_*.json")):
        info = read_manifest(entry)
        if "checksum" in info:
            print(f"  {entry.name}: checksum {info['checksum']}")
    return 0


def _search_one_mode(stack, mode, k, workers):
    stats = [matrix_stats(m) for m in stack] if mode == "normalized" else None
    return search_all(stack, mode, stats=stats, k=k, workers=workers)


def cmd_search(args) -> int:
    gallery = _validated_gallery(args.gallery)
    if gallery.n_representations > MAX_REPRESENTATIONS:
        raise ValidationError(
            f"{gallery.n_representations} representations exceed the "
            f"{MAX_REPRESENTATIONS}-representation search limit"
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stack = _similarity_stack(gallery, _resolve_cache_dir(args))

    singles_path = out_dir / "singles.csv"
    lines = ["repr,recall\n"]
    for mat in stack:
        lines.append(f"{mat.repr_name},{recall_at_k(mat, args.k).count}\n")
    singles_path.write_text("".join(lines))

    modes = ["raw", "normalized"] if args.mode == "both" else [args.mode]
    summary: dict = {
        "schema_version": SCHEMA_VERSION,
        "n_pairs": gallery.n_pairs,
        "representations": list(gallery.representations),
        "k": args.k,
        "modes": {},
    }
    for mode in modes:
        results = _search_one_mode(stack, mode, args.k, args.workers)
        suffix = ".csv.gz" if args.gzip else ".csv"
        write_results_csv(results, out_dir / f"results_{mode}{suffix}", args.gzip)
        write_best_per_size_csv(results, out_dir / f"best_per_size_{mode}.csv")
        mask, recall = best_entry(results)
        summary["modes"][mode] = {
            "best_mask": mask.bits,
            "best_subset": list(mask.names(results.repr_names)),
            "best_recall": recall,
        }
    _write_json(out_dir / "summary.json", summary)
    print(f"search complete: {out_dir}")
    for mode, info in summary["modes"].items():
        print(f"  {mode}: best {'+'.join(info['best_subset'])} recall {info['best_recall']}")
    return 0


def _read_results_csv(path: Path, repr_names, mode, k) -> SearchResults:
    import csv as _csv
    import gzip as _gzip

    opener = _gzip.open if path.suffix == ".gz" else open
    entries = []
    with opener(path, "rt", newline="") as fh:
        for row in _csv.DictReader(fh):
            entries.append(
                (SubsetMask(bits=int(row["mask"]), m=len(repr_names)), int(row["recall"]))
            )
    expected = (1 << len(repr_names)) - 1
    if len(entries) != expected:
        raise FormatError(f"{path}: {len(entries)} rows, expected {expected}")
    return SearchResults(
        mode=mode, m=len(repr_names), k=k, repr_names=tuple(repr_names),
        entries=tuple(entries),
    )


def cmd_analyze(args) -> int:
    gallery = _validated_gallery(args.gallery)
    search_dir = Path(args.search_dir)
    summary_path = search_dir / "summary.json"
    if not summary_path.is_file():
        raise FormatError(
            f"search output not found: {summary_path} (run `simfuse search` first)"
        )
    summary = json.loads(summary_path.read_text())
    if args.mode not in summary["modes"]:
        raise FormatError(f"search summary has no {args.mode!r} results")
    results_path = search_dir / f"results_{args.mode}.csv"
    if not results_path.is_file():
        results_path = search_dir / f"results_{args.mode}.csv.gz"
    if not results_path.is_file():
        raise FormatError(f"search output not found: results_{args.mode}.csv[.gz]")
    results = _read_results_csv(
        results_path, gallery.representations, args.mode, int(summary.get("k", 1))
    )

    stack = _similarity_stack(gallery, _resolve_cache_dir(args))
    hits = ana.hit_sets(stack)

    m = gallery.n_representations
    size_filter = args.size_filter if args.size_filter else min(ana.DEFAULT_SIZE_FILTER, m)
    available = comb(m, size_filter)
    q_max = args.q_max if args.q_max else min(ana.DEFAULT_Q_MAX, available)
    participation = ana.participation_ratio(results, size_filter, q_max)

    if args.ablation_base:
        base = SubsetMask.from_names(
            args.ablation_base.split("+"), gallery.representations
        )
    else:
        base = best_entry(results)[0]
    ablation = ana.ablate(results, base, same_size_only=args.same_size_ablation)

    stats = [matrix_stats(mat) for mat in stack] if args.mode == "normalized" else None
    best_mask = best_entry(results)[0]
    if args.mode == "normalized":
        fused = combine_normalized(stack, stats, best_mask)
    else:
        fused = combine_raw(stack, best_mask)
    failures = ana.failure_cases(fused, args.top_n)

    bundle = ana.report_bundle(results, hits, participation, ablation, failures)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "analysis.json", bundle)

    # Plot-ready tables: participation counts per cutoff, exclusive hits.
    with open(out_dir / "participation.csv", "w") as fh:
        fh.write("q," + ",".join(participation.repr_names) + "\n")
        for q in range(1, participation.q_max + 1):
            fh.write(
                f"{q}," + ",".join(str(c) for c in participation.counts[q - 1]) + "\n"
            )
    exclusive = ana.exclusive_contributions(hits)
    with open(out_dir / "exclusive.csv", "w") as fh:
        fh.write("repr,exclusive\n")
        for name, count in zip(exclusive.repr_names, exclusive.exclusive_counts):
            fh.write(f"{name},{count}\n")

    print(f"analysis complete: {out_dir}")
    print(f"  oracle {bundle['oracle']}, exclusive total "
          f"{bundle['exclusive']['total_exclusive']}, failures {len(failures)}")
    return 0


def _load_triples(manifest_path: Path):
    manifest = read_manifest(manifest_path)
    items_spec = manifest.get("items")
    if not items_spec:
        raise FormatError(f"{manifest_path}: triples manifest lists no items")
    base = manifest_path.parent
    items = []
    for entry in items_spec:
        items.append(
            pm.Triple2AFC(
                ref=pm.read_activation_stack(base / entry["ref"]),
                p0=pm.read_activation_stack(base / entry["p0"]),
                p1=pm.read_activation_stack(base / entry["p1"]),
                human_pref=float(entry["human_pref"]),
            )
        )
    return items


def cmd_bapps(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report: dict = {"schema_version": SCHEMA_VERSION}

    if args.distances:
        tables = {}
        for csv_path in args.distances:
            table = pm.read_distance_table(csv_path)
            singletons = {}
            combos = {}
            for normalized in (False, True):
                combo = pm.search_metric_combinations(table, normalized=normalized)
                key = "normalized" if normalized else "raw"
                combos[key] = {
                    "best_subset": list(combo.names_of(combo.best.bits)),
                    "best_score": combo.best.score,
                }
                if not normalized:
                    for i, name in enumerate(combo.metric_names):
                        entry = next(e for e in combo.entries if e.bits == 1 << i)
                        singletons[name] = entry.score
            tables[Path(csv_path).stem] = {
                "n_items": len(table.item_ids),
                "singletons": singletons,
                "combinations": combos,
            }
        report["distance_tables"] = tables

    if args.triples:
        items = _load_triples(Path(args.triples))
        weights = (
            pm.read_layer_weights(args.weights)
            if args.weights
            else pm.LayerWeights.for_stack(items[0].ref)
        )
        full = pm.score_2afc(items, weights, distortion_name=args.distortion)
        n_layers = items[0].ref.n_layers
        best_layer, best_score, per_layer = pm.best_single_layer(items, n_layers)
        single = {
            "distortion": args.distortion,
            "n_items": full.n_items,
            "full_weights_score": full.score,
            "best_layer": best_layer,
            "best_layer_score": best_score,
            "per_layer_scores": per_layer,
        }
        if args.baseline is not None:
            # Positive delta: the calibrated baseline beats the single layer.
            single["baseline_score"] = args.baseline
            single["delta"] = args.baseline - best_score
        report["single_layer"] = single
        with open(out_dir / "single_layer.csv", "w") as fh:
            fh.write("layer,score\n")
            for layer, score in enumerate(per_layer):
                fh.write(f"{layer},{score!r}\n")

    if "distance_tables" not in report and "single_layer" not in report:
        raise ValidationError("bapps needs --distances and/or --triples input")
    _write_json(out_dir / "bapps_scores.json", report)
    print(f"bapps scoring complete: {out_dir}")
    return 0


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simfuse",
        description="Similarity fusion engine: retrieval evaluation, subset "
        "search, analyses, and 2AFC scoring",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate feature files, optionally renormalize")
    p.add_argument("manifests", nargs="+", help="feature-set manifest paths")
    p.add_argument("--renormalize", action="store_true")
    p.add_argument("--out-dir", default=None, help="write corrected files here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic gallery from a spec")
    p.add_argument("spec", help="synthetic-spec JSON path")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("search", help="exhaustively search representation subsets")
    p.add_argument("gallery", help="gallery manifest path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mode", choices=["raw", "normalized", "both"], default="both")
    p.add_argument("--k", type=int, default=1, help="recall cutoff (default 1)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--gzip", action="store_true", help="gzip the results CSVs")
    p.add_argument("--cache-dir", default=None,
                   help=f"similarity-matrix cache (or ${CACHE_ENV})")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("analyze", help="participation/ablation/oracle/exclusive reports")
    p.add_argument("gallery", help="gallery manifest path")
    p.add_argument("--search-dir", required=True, help="directory written by search")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mode", choices=["raw", "normalized"], default="normalized")
    p.add_argument("--size-filter", type=int, default=None,
                   help="subset size for participation (default min(4, M))")
    p.add_argument("--q-max", type=int, default=None,
                   help="deepest leading-combination cutoff (default min(15, available))")
    p.add_argument("--ablation-base", default=None,
                   help="subset as name+name+...; default: best subset")
    p.add_argument("--same-size-ablation", action="store_true",
                   help="restrict ablation complements to the base subset's size")
    p.add_argument("--top-n", type=int, default=5,
                   help="retrieved indices listed per failure case")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bapps", help="2AFC scoring from distance tables or stacks")
    p.add_argument("--distances", nargs="*", default=[],
                   help="distance-table CSVs (item_id, metric, d0, d1, human_pref)")
    p.add_argument("--triples", default=None,
                   help="triples manifest JSON with activation-stack paths")
    p.add_argument("--weights", default=None, help="layer-weights JSON file")
    p.add_argument("--baseline", type=float, default=None,
                   help="calibrated baseline score for the delta column")
    p.add_argument("--distortion", default="", help="label for the triples set")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bapps)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError, ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points for the resolution pipeline.

Subcommands cover each stage on its own (generate, vectorize, block, match,
sweep, evaluate) plus a config-driven ``run`` that chains them. Exit codes:
0 success, 1 usage or configuration problems, 2 bad input data, 3 unexpected
internal failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

from .blocking import (
    CandidateSet,
    block_clean_clean,
    block_dirty,
    blocking_precision,
    blocking_recall,
    load_candidates,
    write_candidates,
)
from .config import ALGORITHMS, EMBEDDER_KINDS, INDEX_KINDS, PipelineConfig, load_config
from .datagen import GenParams, generate_dirty_dataset
from .embedding import (
    CharNGramEmbedder,
    EmbeddedCollection,
    PrecomputedEmbedder,
    WordAverageEmbedder,
    embed_collection,
    load_precomputed,
    load_word_table,
)
from .embv import read_embv, write_embv
from .errors import ConfigError, DataError
from .evaluation import (
    BLOCKING_REPORT_FIELDS,
    MATCHING_REPORT_FIELDS,
    emit_report,
    match_metrics,
)
from .matching import (
    MatchSet,
    cross_product,
    mutual_best_clustering,
    proposal_clustering,
    score_pairs,
    threshold_sweep,
    unique_mapping_clustering,
    write_curve,
    write_matches,
)
from .model import (
    CLEAN_CLEAN,
    DIRTY,
    ERTask,
    GroundTruth,
    load_csv,
    load_groundtruth,
    validate_task,
    write_csv,
    write_groundtruth,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1, not 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_embedder(kind: str, options: Mapping[str, object]):
    """Construct an embedder from a kind name and its option mapping."""
    if kind == "char-ngram":
        return CharNGramEmbedder(
            n_min=int(options.get("n_min", 3)),
            n_max=int(options.get("n_max", 5)),
            buckets=int(options.get("buckets", 2_000_000)),
            dim=int(options.get("dim", 300)),
            seed=int(options.get("seed", 42)),
        )
    vectors = options.get("vectors")
    if vectors is None:
        raise ConfigError(f"{kind} embedder needs a vector file (--vectors)")
    if kind == "word-avg":
        return WordAverageEmbedder(load_word_table(Path(str(vectors))))
    if kind == "precomputed":
        return PrecomputedEmbedder(load_precomputed(Path(str(vectors))))
    raise ConfigError(f"unknown embedder kind {kind!r}")


def _load_embedded(path: str | Path) -> EmbeddedCollection:
    """Read an EMBV file back into an embedded collection."""
    ids, vectors = read_embv(path)
    return EmbeddedCollection(tuple(ids), vectors, f"file({Path(path).name})")


def _run_algorithm(name: str, scored, delta: float, smaller_size: int) -> MatchSet:
    if name == "unique-mapping":
        return unique_mapping_clustering(scored, delta, smaller_size)
    if name == "mutual-best":
        return mutual_best_clustering(scored, delta)
    if name == "proposal":
        return proposal_clustering(scored, delta)
    raise ConfigError(f"unknown matching algorithm {name!r}")


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_generate(args: argparse.Namespace) -> int:
    params = GenParams(
        n_total=args.n,
        dup_fraction=args.dup_fraction,
        max_dups_per_record=args.max_dups,
        max_mods_per_attribute=args.max_mods_attribute,
        max_mods_per_record=args.max_mods_record,
        n_attributes=args.attributes,
        seed=args.seed,
    )
    dataset = generate_dirty_dataset(params, source_name=args.name)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(dataset.collection, outdir / "entities.csv")
    write_groundtruth(dataset.groundtruth, outdir / "groundtruth.csv")
    audit = dataset.audit
    print(f"entities {len(dataset.collection)}")
    print(f"duplicate members {audit['duplicate_count']} ({audit['member_fraction']:.4f})")
    print(f"groups {audit['group_count']} (largest {audit['max_group_size']})")
    print(f"truth pairs {audit['truth_pairs']}")
    print(f"wrote {outdir / 'entities.csv'} and {outdir / 'groundtruth.csv'}")
    return EXIT_OK


def _cmd_vectorize(args: argparse.Namespace) -> int:
    collection = load_csv(args.input, args.id_column)
    embedder = build_embedder(
        args.embedder,
        {
            "dim": args.dim,
            "buckets": args.buckets,
            "n_min": args.ngram_min,
            "n_max": args.ngram_max,
            "seed": args.seed,
            "vectors": args.vectors,
        },
    )
    embedded = embed_collection(collection, embedder, threads=args.threads)
    write_embv(args.output, embedded.ids, embedded.vectors)
    print(f"wrote {len(embedded.ids)} vectors of dim {embedded.dim} to {args.output}")
    return EXIT_OK


def _hnsw_options(args: argparse.Namespace) -> dict[str, object]:
    if args.index != "hnsw":
        return {}
    return {
        "m": args.m,
        "ef_construction": args.ef_construction,
        "ef_search": args.ef_search,
        "seed": args.seed,
    }


def _cmd_block(args: argparse.Namespace) -> int:
    if args.input is not None:
        if args.left is not None or args.right is not None:
            raise ConfigError("--input replaces --left/--right for single-collection blocking")
        candidates = block_dirty(
            _load_embedded(args.input),
            args.k,
            index_kind=args.index,
            index_options=_hnsw_options(args),
            threads=args.threads,
        )
    else:
        if args.left is None or args.right is None:
            raise ConfigError("blocking needs --left and --right, or --input")
        candidates = block_clean_clean(
            _load_embedded(args.left),
            _load_embedded(args.right),
            args.k,
            index_kind=args.index,
            index_options=_hnsw_options(args),
            threads=args.threads,
        )
    write_candidates(candidates, args.output)
    print(f"wrote {len(candidates)} candidate pairs to {args.output}")
    return EXIT_OK


def _cmd_match(args: argparse.Namespace) -> int:
    left = _load_embedded(args.left)
    right = _load_embedded(args.right) if args.right is not None else None
    candidates = load_candidates(args.candidates)
    scored = score_pairs(candidates, left, right if right is not None else left)
    smaller = min(len(left.ids), len(right.ids)) if right is not None else len(left.ids)
    matches = _run_algorithm(args.algorithm, scored, args.delta, smaller)
    write_matches(matches, args.output)
    print(f"wrote {len(matches)} matches at delta {args.delta} to {args.output}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    left = _load_embedded(args.left)
    right = _load_embedded(args.right)
    groundtruth = load_groundtruth(args.groundtruth)
    if args.candidates is not None:
        pairs: object = load_candidates(args.candidates)
    else:
        if len(left.ids) * len(right.ids) > args.budget:
            raise ConfigError(
                "cross product "
                f"{len(left.ids)}x{len(right.ids)} exceeds the budget {args.budget}; "
                "supply --candidates"
            )
        pairs = cross_product(left, right)
    scored = score_pairs(pairs, left, right)
    result = threshold_sweep(scored, groundtruth, min(len(left.ids), len(right.ids)))
    write_curve(result, args.output)
    best = result.best
    print(
        f"best delta {best.delta} precision {best.precision:.4f} "
        f"recall {best.recall:.4f} f1 {best.f1:.4f}"
    )
    print(f"wrote {len(result.curve)} curve points to {args.output}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    from .matching import load_matches

    scored = load_matches(args.matches)
    groundtruth = load_groundtruth(args.groundtruth)
    pairs = {(pair.left_id, pair.right_id) for pair in scored}
    metrics = match_metrics(pairs, groundtruth)
    rows: list[dict[str, object]] = []
    print(f"matching precision {metrics.precision:.6f}")
    print(f"matching recall {metrics.recall:.6f}")
    print(f"matching f1 {metrics.f1:.6f}")
    rows.append(
        {
            "stage": "matching",
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
        }
    )
    if args.candidates is not None:
        candidates = load_candidates(args.candidates)
        recall = blocking_recall(candidates, groundtruth)
        precision = blocking_precision(candidates, groundtruth)
        print(f"blocking recall {recall:.6f}")
        print(f"blocking precision {precision:.6f}")
        rows.append(
            {"stage": "blocking", "precision": precision, "recall": recall, "f1": None}
        )
    if args.output is not None:
        emit_report(rows, args.output, format=args.format)
        print(f"wrote report to {args.output}")
    return EXIT_OK


_RUN_OVERRIDES = (
    ("threads", "threads"),
    ("seed", "seed"),
    ("output", "output.dir"),
    ("k", "blocking.k"),
    ("delta", "matching.delta"),
    ("index", "blocking.index"),
    ("embedder", "embedder.kind"),
    ("vectors", "embedder.vectors"),
)


def _cmd_run(args: argparse.Namespace) -> int:
    overrides: dict[str, str] = {}
    for attr, key in _RUN_OVERRIDES:
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = str(value)
    config = load_config(args.config, overrides)
    summary = run_pipeline(config)
    for key, value in summary.items():
        print(f"{key} {value}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# config-driven pipeline


@contextmanager
def _stage(name: str, timings: list[tuple[str, float]]) -> Iterator[None]:
    """Time a pipeline stage and tag any error it raises with the stage name."""
    start = time.perf_counter()
    try:
        yield
    except (ConfigError, DataError) as err:
        raise type(err)(f"stage {name}: {err}") from err
    except OSError as err:
        raise DataError(f"stage {name}: {err}") from err
    except Exception as err:  # pragma: no cover - defensive
        raise RuntimeError(f"stage {name}: {err}") from err
    timings.append((name, time.perf_counter() - start))


def _stage_seconds(timings: Sequence[tuple[str, float]], name: str) -> float:
    return round(sum(secs for stage, secs in timings if stage == name), 3)


def run_pipeline(config: PipelineConfig, log: Callable[[str], None] = print) -> dict[str, object]:
    """Run ingest, embed, block, match, and evaluate per one config.

    Writes vectors, candidates, matches, and reports under config.output_dir
    and returns a summary mapping. Partially written outputs are removed when
    a later stage fails, so an output directory never holds a torn run.
    Matching and the threshold sweep only apply to two-collection tasks; a
    single dirty collection stops after blocking and its report.
    """
    if config.groundtruth_path is None:
        raise ConfigError("run needs task.groundtruth for evaluation")
    timings: list[tuple[str, float]] = []
    created: list[Path] = []
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    summary: dict[str, object] = {}

    def _track(path: Path) -> Path:
        created.append(path)
        return path

    try:
        with _stage("ingest", timings):
            left = load_csv(config.left_path, config.left_id_column)
            if config.kind == CLEAN_CLEAN:
                right = load_csv(config.right_path, config.right_id_column)
            else:
                right = None
            groundtruth = load_groundtruth(config.groundtruth_path)
            if right is not None:
                task = ERTask.clean_clean(left, right, groundtruth)
            else:
                task = ERTask.dirty(left, groundtruth)
            report = validate_task(task)
            if not report.ok:
                shown = ", ".join(report.absent_ids[:5])
                raise DataError(
                    f"ground truth references {len(report.absent_ids)} unknown ids "
                    f"(first: {shown})"
                )
            for collection, count in zip(task.collections, report.empty_entity_counts):
                if count:
                    log(f"warning: {collection.source_name} has {count} empty entities")

        with _stage("embed", timings):
            embedder = build_embedder(config.embedder_kind, config.embedder_options)
            embedded_left = embed_collection(left, embedder, threads=config.threads)
            if right is not None:
                embedded_right = embed_collection(right, embedder, threads=config.threads)
                write_embv(
                    _track(outdir / "vectors_left.embv"),
                    embedded_left.ids,
                    embedded_left.vectors,
                )
                write_embv(
                    _track(outdir / "vectors_right.embv"),
                    embedded_right.ids,
                    embedded_right.vectors,
                )
            else:
                embedded_right = None
                write_embv(
                    _track(outdir / "vectors.embv"), embedded_left.ids, embedded_left.vectors
                )

        with _stage("block", timings):
            if embedded_right is not None:
                candidates = block_clean_clean(
                    embedded_left,
                    embedded_right,
                    config.k,
                    index_kind=config.index_kind,
                    index_options=config.index_options,
                    threads=config.threads,
                )
            else:
                candidates = block_dirty(
                    embedded_left,
                    config.k,
                    index_kind=config.index_kind,
                    index_options=config.index_options,
                    threads=config.threads,
                )
            candidates_path = _track(outdir / "candidates.csv")
            write_candidates(candidates, candidates_path)
            created.append(candidates_path.with_suffix(candidates_path.suffix + ".meta.json"))

        block_recall = blocking_recall(candidates, groundtruth)
        block_precision = blocking_precision(candidates, groundtruth)
        if right is not None:
            dataset_tag = f"{left.source_name}+{right.source_name}"
        else:
            dataset_tag = left.source_name
        summary["blocking_pairs"] = len(candidates)
        summary["blocking_recall"] = round(block_recall, 6)
        summary["blocking_precision"] = round(block_precision, 6)

        matching_rows: list[dict[str, object]] = []
        if right is not None:
            with _stage("match", timings):
                scored = score_pairs(candidates, embedded_left, embedded_right)
                smaller = min(len(left), len(right))
                if config.sweep:
                    result = threshold_sweep(scored, groundtruth, smaller)
                    write_curve(result, _track(outdir / "curve.csv"))
                    matches = unique_mapping_clustering(scored, result.best.delta, smaller)
                    delta_used: float = result.best.delta
                    algorithm_used = "unique-mapping"
                    for point in result.curve:
                        matching_rows.append(
                            {
                                "model": embedder.tag,
                                "dataset": dataset_tag,
                                "algorithm": algorithm_used,
                                "delta": point.delta,
                                "precision": point.precision,
                                "recall": point.recall,
                                "f1": point.f1,
                            }
                        )
                else:
                    if config.delta is None:
                        raise ConfigError("matching needs matching.delta or matching.sweep")
                    matches = _run_algorithm(config.algorithm, scored, config.delta, smaller)
                    delta_used = config.delta
                    algorithm_used = config.algorithm
                write_matches(matches, _track(outdir / "matches.csv"))

            metrics = match_metrics(matches, groundtruth)
            match_secs = _stage_seconds(timings, "match")
            matching_rows.append(
                {
                    "model": embedder.tag,
                    "dataset": dataset_tag,
                    "algorithm": algorithm_used,
                    "delta": delta_used,
                    "precision": metrics.precision,
                    "recall": metrics.recall,
                    "f1": metrics.f1,
                    "secs": match_secs,
                }
            )
            summary["matches"] = len(matches)
            summary["delta"] = delta_used
            summary["precision"] = round(metrics.precision, 6)
            summary["recall"] = round(metrics.recall, 6)
            summary["f1"] = round(metrics.f1, 6)

        with _stage("evaluate", timings):
            blocking_row = {
                "model": embedder.tag,
                "dataset": dataset_tag,
                "k": config.k,
                "index": config.index_kind,
                "recall": block_recall,
                "precision": block_precision,
                "secs": _stage_seconds(timings, "block"),
            }
            emit_report(
                [blocking_row],
                _track(outdir / "blocking_report.csv"),
                fields=BLOCKING_REPORT_FIELDS,
            )
            if matching_rows:
                emit_report(
                    matching_rows,
                    _track(outdir / "matching_report.csv"),
                    fields=MATCHING_REPORT_FIELDS,
                )
            summary_path = _track(outdir / "summary.json")
            summary_path.write_text(
                json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
    except BaseException:
        for path in created:
            path.unlink(missing_ok=True)
        raise

    for name, secs in timings:
        log(f"stage {name}: {secs:.3f} s")
    return summary


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="nearmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    gen = sub.add_parser("generate", help="create a synthetic entity collection with duplicates")
    gen.add_argument("--output", required=True, help="directory for entities.csv and groundtruth.csv")
    gen.add_argument("--n", type=int, default=1000, help="total records including duplicates")
    gen.add_argument("--dup-fraction", type=float, default=0.40)
    gen.add_argument("--max-dups", type=int, default=9)
    gen.add_argument("--max-mods-record", type=int, default=10, dest="max_mods_record")
    gen.add_argument("--max-mods-attribute", type=int, default=3, dest="max_mods_attribute")
    gen.add_argument("--attributes", type=int, default=12)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--name", default="synthetic")
    gen.set_defaults(handler=_cmd_generate)

    vec = sub.add_parser("vectorize", help="embed a CSV of entities into an EMBV vector file")
    vec.add_argument("--input", required=True)
    vec.add_argument("--id-column", default="id", dest="id_column")
    vec.add_argument("--output", required=True)
    vec.add_argument("--embedder", choices=EMBEDDER_KINDS, default="char-ngram")
    vec.add_argument("--vectors", help="token table or EMBV file for word-avg/precomputed")
    vec.add_argument("--dim", type=int, default=300)
    vec.add_argument("--buckets", type=int, default=2_000_000)
    vec.add_argument("--ngram-min", type=int, default=3, dest="ngram_min")
    vec.add_argument("--ngram-max", type=int, default=5, dest="ngram_max")
    vec.add_argument("--seed", type=int, default=42)
    vec.add_argument("--threads", type=int, default=1)
    vec.set_defaults(handler=_cmd_vectorize)

    blk = sub.add_parser("block", help="find nearest-neighbour candidate pairs")
    blk.add_argument("--left", help="EMBV file for the first collection")
    blk.add_argument("--right", help="EMBV file for the second collection")
    blk.add_argument("--input", help="EMBV file for a single collection with duplicates")
    blk.add_argument("--k", type=int, default=10)
    blk.add_argument("--index", choices=INDEX_KINDS, default="exact")
    blk.add_argument("--m", type=int, default=16)
    blk.add_argument("--ef-construction", type=int, default=200, dest="ef_construction")
    blk.add_argument("--ef-search", type=int, default=128, dest="ef_search")
    blk.add_argument("--seed", type=int, default=0)
    blk.add_argument("--threads", type=int, default=1)
    blk.add_argument("--output", required=True)
    blk.set_defaults(handler=_cmd_block)

    mat = sub.add_parser("match", help="pick one-to-one matches from candidate pairs")
    mat.add_argument("--left", required=True)
    mat.add_argument("--right", help="omit to score candidates within --left alone")
    mat.add_argument("--candidates", required=True)
    mat.add_argument("--algorithm", choices=ALGORITHMS, default="unique-mapping")
    mat.add_argument("--delta", type=float, required=True)
    mat.add_argument("--output", required=True)
    mat.set_defaults(handler=_cmd_match)

    swp = sub.add_parser("sweep", help="scan similarity thresholds against ground truth")
    swp.add_argument("--left", required=True)
    swp.add_argument("--right", required=True)
    swp.add_argument("--candidates", help="optional candidate pairs; defaults to all pairs")
    swp.add_argument("--groundtruth", required=True)
    swp.add_argument("--budget", type=int, default=10**8)
    swp.add_argument("--output", required=True)
    swp.set_defaults(handler=_cmd_sweep)

    evl = sub.add_parser("evaluate", help="score matches (and candidates) against ground truth")
    evl.add_argument("--matches", required=True)
    evl.add_argument("--groundtruth", required=True)
    evl.add_argument("--candidates")
    evl.add_argument("--output")
    evl.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    evl.set_defaults(handler=_cmd_evaluate)

    run = sub.add_parser("run", help="run the full pipeline from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--threads", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--output", help="overrides output.dir")
    run.add_argument("--k", type=int)
    run.add_argument("--delta", type=float)
    run.add_argument("--index", choices=INDEX_KINDS)
    run.add_argument("--embedder", choices=EMBEDDER_KINDS)
    run.add_argument("--vectors")
    run.set_defaults(handler=_cmd_run)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        code = err.code
        if code is None:
            return EXIT_OK
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except Exception as err:  # noqa: BLE001 - last-resort report
        print(f"internal error: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())

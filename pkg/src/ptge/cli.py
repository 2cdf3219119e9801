"""Command-line entry points for the pipeline stages.

    ptge pseudo-gen --images corpus/ --out work/ --seed 7
    ptge score      --pairs pairs.jsonl --images imgs.ptge --backend toy ...
    ptge select     --scores scores.jsonl --strategy top-range-random ...
    ptge evaluate   --queries q.jsonl --gallery g.ptge --k 10,50 ...
    ptge serve      --log events.jsonl --media images/ --ui frontend/dist
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ptge import PtgeError


def _mask_config(args) -> "MaskConfig":
    from ptge.masking import MaskConfig, MaskingError

    try:
        rows, cols = (int(p) for p in args.grid.lower().split("x"))
    except ValueError:
        raise MaskingError(f"--grid must look like 8x8, got {args.grid!r}") from None
    return MaskConfig(
        grid_rows=rows, grid_cols=cols, mask_ratio=args.mask_ratio, fill=args.fill
    )


def _captioner_config(endpoint: str, cache: str | None) -> "CaptionerConfig":
    from ptge.captioning import CaptionerConfig

    return CaptionerConfig(endpoint=endpoint, cache_path=cache)


def cmd_pseudo_gen(args) -> int:
    from ptge.triplets import build_pseudo_triplets, save_manifest

    manifest = build_pseudo_triplets(
        image_dir=args.images,
        out_dir=args.out,
        mask_config=_mask_config(args),
        captioner_config=_captioner_config(args.captioner, args.cache),
        seed=args.seed,
        variants=args.variants,
    )
    manifest_path = Path(args.out) / "manifest.jsonl"
    save_manifest(manifest, manifest_path)
    print(f"wrote {len(manifest.triplets)} triplets to {manifest_path}")
    return 0


def cmd_score(args) -> int:
    from ptge.captioning import Captioner
    from ptge.composer import ComposerBackend, synthesize_text_table
    from ptge.embeddings import load_table
    from ptge.scoring import load_pairs, save_score_table, score_all

    pairs = load_pairs(args.pairs)
    images = load_table(args.images)
    captioner = Captioner(_captioner_config(args.captions, None))
    if captioner.config.mode != "file":
        raise PtgeError("--captions must point at a caption JSONL file (id -> caption)")
    captions = {
        pair.target_image_id: captioner.caption(None, pair.target_image_id).text
        for pair in pairs
    }
    if args.backend == "precomputed":
        if not args.composites:
            raise PtgeError("--composites is required with --backend precomputed")
        backend = ComposerBackend(mode="precomputed", composites=load_table(args.composites))
    else:
        if args.texts:
            texts = load_table(args.texts)
        else:
            texts = synthesize_text_table(
                sorted(set(captions.values())), dim=images.dim, seed=args.seed
            )
        backend = ComposerBackend(
            mode="toy", images=images, texts=texts, alpha=args.alpha
        )
    table = score_all(
        pairs, captions, backend, images, strict=not args.lenient, workers=args.workers
    )
    save_score_table(table, args.out)
    with open(Path(args.out).with_suffix(".provenance.json"), "w", encoding="utf-8") as fh:
        json.dump(table.provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"scored {len(table)} pairs -> {args.out}")
    return 0


def cmd_select(args) -> int:
    from ptge.embeddings import load_table
    from ptge.scoring import ScoredPair, ScoreTable, load_score_table
    from ptge.selection import (
        SelectionConfig,
        assign_pair_categories,
        kmeans_categorize,
        save_round,
        select,
        summarize,
    )

    table = load_score_table(args.scores)
    if args.kmeans_embeddings:
        assignment = kmeans_categorize(
            load_table(args.kmeans_embeddings), k=args.kmeans_k, seed=args.seed
        )
        pairs = assign_pair_categories(
            [e.pair for e in table.entries], assignment, basis=args.kmeans_basis
        )
        score_of = {e.pair.pair_id: e.score for e in table.entries}
        table = ScoreTable(
            [ScoredPair(p, score_of[p.pair_id]) for p in pairs], table.provenance
        )
    config = SelectionConfig(
        strategy=args.strategy.replace("-", "_"),
        pool_fraction=args.pool_fraction,
        shots_per_category=args.shots,
        seed=args.seed,
        per_category=not args.global_pool,
    )
    round_ = select(table, config)
    save_round(round_, args.out)
    summary = summarize(table)
    print(
        f"round {round_.round_id}: {len(round_.chosen_ids)} pairs chosen "
        f"across {len(round_.per_category)} categories -> {args.out}"
    )
    print(
        f"score distribution: mean {summary.mean:.4f}, std {summary.std:.4f}, "
        f"skewness {summary.skewness:.3f}, q95.45 {summary.quantiles[0.9545]:.4f}"
    )
    for warning in round_.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    from ptge.embeddings import load_table
    from ptge.evaluation import (
        aggregate_trials,
        load_queries,
        load_report,
        recall_at_k,
        save_report,
    )

    ks = [int(k) for k in args.k.split(",")]
    if args.trials_dir:
        reports = [
            load_report(p) for p in sorted(Path(args.trials_dir).glob("*.json"))
        ]
        aggregate = aggregate_trials(reports)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(aggregate.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        for k in sorted(aggregate.overall):
            stat = aggregate.overall[k]
            print(f"R@{k}: {stat.mean:.4f} +- {stat.stderr:.4f} (n={aggregate.n_trials})")
        return 0
    gallery = load_table(args.gallery)
    report = recall_at_k(load_queries(args.queries, gallery), ks)
    save_report(report, args.out)
    for k in sorted(report.per_k):
        print(f"R@{k}: {report.per_k[k]:.4f} ({report.query_count} queries)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from ptge.annotation import AnnotationStore
    from ptge.service import create_app

    app = create_app(
        AnnotationStore(args.log), media_dir=args.media, ui_dir=args.ui
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pseudo-gen", help="build pseudo triplets from an image directory")
    p.add_argument("--images", required=True, help="directory of source images")
    p.add_argument("--out", required=True, help="output directory (masked/, manifest.jsonl)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-ratio", type=float, default=0.75)
    p.add_argument("--grid", default="8x8")
    p.add_argument("--fill", default="black", choices=("black", "mean_color"))
    p.add_argument("--captioner", default="stub", help="'stub', caption-service URL, or caption JSONL path")
    p.add_argument("--cache", default=None, help="caption cache JSONL path")
    p.add_argument("--variants", type=int, default=1, help="maskings per source image")
    p.set_defaults(func=cmd_pseudo_gen)

    p = sub.add_parser("score", help="challenge-score candidate pairs")
    p.add_argument("--pairs", required=True, help="candidate pairs JSONL")
    p.add_argument("--images", required=True, help="image embedding table (.jsonl or .ptge)")
    p.add_argument("--backend", default="toy", choices=("toy", "precomputed"))
    p.add_argument("--composites", default=None, help="precomputed composite table")
    p.add_argument("--texts", default=None, help="text embedding table for the toy backend")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--captions", required=True, help="target-caption JSONL (id -> caption)")
    p.add_argument("--out", required=True)
    p.add_argument("--lenient", action="store_true", help="skip failing pairs instead of aborting")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("select", help="draw the K-shot annotation set")
    p.add_argument("--scores", required=True, help="score table JSONL")
    p.add_argument(
        "--strategy",
        default="top-range-random",
        choices=("top-range-random", "random", "easy-bottom", "top-k"),
    )
    p.add_argument("--pool-fraction", type=float, default=0.0455)
    p.add_argument("--shots", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--global-pool", action="store_true", help="one pool over all categories")
    p.add_argument("--kmeans-embeddings", default=None, help="embedding table to cluster for categories")
    p.add_argument("--kmeans-k", type=int, default=4)
    p.add_argument(
        "--kmeans-basis",
        default="reference_image",
        choices=("reference_image", "target_image"),
    )
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="Recall@k over a gallery, or aggregate trials")
    p.add_argument("--queries", default=None, help="query JSONL")
    p.add_argument("--gallery", default=None, help="gallery embedding table")
    p.add_argument("--k", default="10,50")
    p.add_argument("--trials-dir", default=None, help="directory of per-trial report JSONs to aggregate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--log", required=True, help="event log JSONL path")
    p.add_argument("--media", default=None, help="directory served under /media")
    p.add_argument("--ui", default=None, help="built frontend assets served under /ui")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PtgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

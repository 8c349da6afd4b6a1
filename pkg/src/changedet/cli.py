"""Command-line entry points for every pipeline stage.

Subcommands: generate | train | score | evaluate | ablate | localize | serve.
Each writes its stage's artifacts (manifest JSON, checkpoints, score CSVs,
report JSON, label JSONL) and exits 0 on success, 1 with a one-line
diagnostic on failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluation, imagery, localization, scoring
from .model import TrainConfig, load_classifier, save_checkpoint, train
from .sampler import min_series_length

log = logging.getLogger("changedet")


def _prepare_series(
    series_list: list[imagery.TimeSeries], max_cloud: float, min_length: int
) -> list[imagery.TimeSeries]:
    """Cloud-filter each series, dropping those that end up too short."""
    prepared = []
    for series in series_list:
        if series.cloud_masks is None:
            log.warning("series %s has no cloud masks; skipping cloud filter", series.id)
            prepared.append(series)
            continue
        try:
            prepared.append(
                imagery.filter_series(series, max_cloud=max_cloud, min_length=min_length)
            )
        except ValueError as err:
            log.warning("dropping series: %s", err)
    if not prepared:
        raise ValueError("no series left after cloud filtering")
    return prepared


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        weight_decay=args.weight_decay,
        split=args.split,
        context=args.context,
        seed=args.seed,
        triplets_per_series=args.triplets_per_series,
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--batch-size", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--context", type=int, default=3)
    p.add_argument("--triplets-per-series", type=int, default=32)
    p.add_argument("--max-cloud", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)


def cmd_generate(args: argparse.Namespace) -> int:
    specs = imagery.benchmark_specs(
        num_series=args.num_series,
        changed_fraction=args.changed_fraction,
        seed=args.seed,
        height=args.height,
        width=args.width,
        n_images=args.n_images,
        span_months=args.span_months,
        noise_sigma=args.noise_sigma,
        cloud_probability=args.cloud_probability,
    )
    series_list, manifest = imagery.generate_dataset(specs, id_prefix=args.id_prefix)
    imagery.save_dataset(series_list, manifest, Path(args.out))
    n_changed = sum(1 for e in manifest.entries if e.changed)
    print(f"wrote {len(series_list)} series ({n_changed} changed) to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    series_list, _ = imagery.load_dataset(Path(args.data))
    config = _train_config(args)
    prepared = _prepare_series(series_list, args.max_cloud, min_series_length(config.context))
    params, report = train(prepared, config)
    save_checkpoint(Path(args.out), params, config)
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report.to_json(), f, indent=1)
    final_acc = report.val_accuracy[-1]
    print(
        f"trained {config.epochs} epochs on {report.n_train_series} series; "
        f"final val accuracy "
        + ("n/a" if final_acc is None else f"{final_acc:.3f}")
        + f"; checkpoint {args.out}"
    )
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    clf, _ = load_classifier(Path(args.model))
    series_list, _ = imagery.load_dataset(Path(args.data))
    min_len = 2 * clf.context + 2
    prepared = _prepare_series(series_list, args.max_cloud, min_len)
    per_query = []
    results = []
    for series in prepared:
        s = scoring.score_series(clf, series, single_image_anchors=args.single_image_anchors)
        per_query.append(s)
        results.append(
            scoring.pivot_score(s) if args.measure == "pivot" else scoring.spearman(s)
        )
    scoring.write_change_results_csv(results, Path(args.out))
    if args.per_query_out:
        scoring.write_score_series_csv(per_query, Path(args.per_query_out))
    print(f"scored {len(results)} series ({args.measure}) -> {args.out}")
    return 0


def _labels_from_jsonl(path: Path) -> dict[str, int]:
    # replay order decides: the last record for a target wins
    labels: dict[str, int] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                record = json.loads(line)
                labels[record["target_id"]] = int(record["label"])
    return labels


def _load_labels(path: Path) -> dict[str, int]:
    path = Path(path)
    if path.suffix == ".jsonl":
        return _labels_from_jsonl(path)
    with open(path) as f:
        manifest = imagery.DatasetManifest.from_json(json.load(f))
    labels = imagery.manifest_labels(manifest)
    if not labels:
        raise ValueError(f"{path}: manifest has no ground-truth change flags")
    return labels


def cmd_evaluate(args: argparse.Namespace) -> int:
    results = scoring.read_change_results_csv(Path(args.scores))
    labels = _load_labels(Path(args.labels))
    known = [r for r in results if r.series_id in labels]
    if len(known) < len(results):
        log.warning("%d scored series lack labels; skipped", len(results) - len(known))
    report = evaluation.evaluate(evaluation.labeled_scores(known, labels))
    payload = json.dumps(report.to_json(), indent=1)
    print(payload)
    if args.out:
        Path(args.out).write_text(payload)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    train_list, _ = imagery.load_dataset(Path(args.data))
    eval_list, eval_manifest = imagery.load_dataset(Path(args.eval_data))
    contexts = tuple(int(c) for c in args.contexts.split(","))
    measures = tuple(m.strip() for m in args.measures.split(","))
    config = _train_config(args)
    min_len = min_series_length(max(contexts))
    train_prepared = _prepare_series(train_list, args.max_cloud, min_len)
    eval_prepared = _prepare_series(eval_list, args.max_cloud, min_len)
    labels = imagery.manifest_labels(eval_manifest)
    rows = evaluation.run_ablation(
        train_prepared, eval_prepared, labels, config, contexts, measures
    )
    evaluation.write_ablation_csv(rows, Path(args.out))
    print(f"ablation table ({len(rows)} rows) -> {args.out}")
    return 0


def cmd_localize(args: argparse.Namespace) -> int:
    series_list, manifest = imagery.load_dataset(Path(args.data))
    config = _train_config(args)
    prepared = _prepare_series(series_list, args.max_cloud, min_series_length(config.context))
    result = localization.iterative_train(prepared, config, args.patch_edge)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / "full_model.npz", result.full_params, config)
    save_checkpoint(out_dir / "patch_model.npz", result.patch_params, result.patch_config)
    with open(out_dir / "reports.json", "w") as f:
        json.dump(
            {
                "full": result.full_report.to_json(),
                "patch": result.patch_report.to_json(),
                "kept_ids": result.kept_ids,
            },
            f,
            indent=1,
        )
    patch_clf = result.patch_classifier()
    maps_dir = out_dir / "maps"
    for series in prepared:
        label_map = localization.patch_change_map(
            patch_clf, series, args.patch_edge, args.threshold
        )
        localization.export_change_map(label_map, series, maps_dir / series.id)
    print(f"iterative localization artifacts -> {out_dir}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServeState, create_app

    changes = scoring.read_change_results_csv(Path(args.changes)) if args.changes else []
    score_map = (
        scoring.read_score_series_csv(Path(args.query_scores)) if args.query_scores else {}
    )
    label_path = Path(args.labels) if args.labels else Path(args.data) / "labels.jsonl"
    state = ServeState.load(
        dataset_dir=Path(args.data),
        changes=changes,
        score_series=score_map,
        label_path=label_path,
    )
    app = create_app(state, ui_dir=Path(args.ui) if args.ui else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changedet",
        description="Persistent-change detection for image time series via temporal ordering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a synthetic benchmark dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--num-series", type=int, default=200)
    p.add_argument("--changed-fraction", type=float, default=0.33)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--n-images", type=int, default=32)
    p.add_argument("--span-months", type=int, default=96)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.add_argument("--cloud-probability", type=float, default=0.15)
    p.add_argument("--id-prefix", default="series")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the temporal-ordering classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="compute change scores for every series")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--measure", choices=scoring.MEASURES, default="pivot")
    p.add_argument("--out", required=True)
    p.add_argument("--per-query-out")
    p.add_argument("--max-cloud", type=float, default=0.2)
    p.add_argument("--single-image-anchors", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="AUROC and max-F1 of scores against labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True, help="manifest.json or labels.jsonl")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="retrain over context sizes, evaluate both measures")
    p.add_argument("--data", required=True)
    p.add_argument("--eval-data", required=True)
    p.add_argument("--contexts", default="1,3,5")
    p.add_argument("--measures", default="pivot,spearman")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("localize", help="iterative patch retraining and change maps")
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--patch-edge", type=int, default=16)
    p.add_argument("--threshold", type=float, default=0.5)
    _add_train_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("serve", help="run the triage HTTP service")
    p.add_argument("--data", required=True)
    p.add_argument("--changes", help="change-results CSV from `score`")
    p.add_argument("--query-scores", help="per-query score CSV from `score`")
    p.add_argument("--labels", help="label JSONL path (default <data>/labels.jsonl)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui", help="directory of static UI files to mount at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:  # noqa: BLE001 - single diagnostic line, nonzero exit
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

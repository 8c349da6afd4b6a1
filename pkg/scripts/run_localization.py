#!/usr/bin/env python3
"""Iterative localization versus direct patch training, patch-level AUROC over seeds.

Trains the two-stage pipeline (full images, filter top half, retrain on
patches) and a direct patch model on the unfiltered patch set, then compares
patch-level AUROC against geometry-derived ground truth.
"""

from __future__ import annotations

import argparse
import json
import statistics
import time
from pathlib import Path

from changedet.cli import _prepare_series
from changedet.evaluation import evaluate
from changedet.imagery import (
    benchmark_specs,
    generate_dataset,
    manifest_events,
    manifest_labels,
    split_patches,
)
from changedet.localization import _default_patch_config, iterative_train, patch_level_items
from changedet.model import Classifier, TrainConfig, train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train-series", type=int, default=120)
    parser.add_argument("--eval-series", type=int, default=60)
    parser.add_argument("--patch-edge", type=int, default=16)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--data-seed", type=int, default=300)
    parser.add_argument("--out-dir", default="results/localization")
    args = parser.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    train_series, _ = generate_dataset(
        benchmark_specs(args.train_series, 1 / 3, seed=args.data_seed), "ltrain"
    )
    eval_series, eval_man = generate_dataset(
        benchmark_specs(args.eval_series, 1 / 3, seed=args.data_seed + 100), "leval"
    )
    train_prep = _prepare_series(train_series, 0.2, 8)
    eval_prep = _prepare_series(eval_series, 0.2, 8)
    labels = manifest_labels(eval_man)
    events = manifest_events(eval_man)

    runs = []
    for seed in seeds:
        config = TrainConfig(seed=seed)
        t1 = time.perf_counter()
        result = iterative_train(train_prep, config, args.patch_edge)
        iterative_items = patch_level_items(
            result.patch_classifier(), eval_prep, labels, events, args.patch_edge
        )

        # direct comparator: same step budget, trained on the unfiltered patch set
        all_patches = [p for s in train_prep for p in split_patches(s, args.patch_edge)]
        direct_config = _default_patch_config(config, result.full_report.steps_per_epoch)
        direct_params, _ = train(all_patches, direct_config)
        direct_clf = Classifier(
            direct_params, direct_config.encoder_config(), direct_config.context
        )
        direct_items = patch_level_items(
            direct_clf, eval_prep, labels, events, args.patch_edge
        )

        runs.append(
            {
                "seed": seed,
                "iterative_patch_auroc": evaluate(iterative_items).auroc,
                "direct_patch_auroc": evaluate(direct_items).auroc,
                "kept": len(result.kept_ids),
                "seconds": round(time.perf_counter() - t1, 1),
            }
        )
        r = runs[-1]
        print(
            f"seed {seed}: iterative {r['iterative_patch_auroc']:.4f} vs "
            f"direct {r['direct_patch_auroc']:.4f} ({r['seconds']}s)"
        )

    summary = {
        "runs": runs,
        "median_iterative_auroc": statistics.median(r["iterative_patch_auroc"] for r in runs),
        "median_direct_auroc": statistics.median(r["direct_patch_auroc"] for r in runs),
        "total_seconds": round(time.perf_counter() - t0, 1),
    }
    with open(out_dir / "summary.json", "w") as f:
        json.dump(summary, f, indent=1)
    print(
        f"median iterative {summary['median_iterative_auroc']:.4f} vs "
        f"direct {summary['median_direct_auroc']:.4f} -> {out_dir / 'summary.json'}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

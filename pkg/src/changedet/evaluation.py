"""Threshold-free and thresholded evaluation of change scores, plus the ablation grid.

AUROC uses the rank (Mann-Whitney) statistic with average-rank tie handling;
max-F1 sweeps thresholds over the distinct observed scores (F1 is piecewise
constant between them).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from .imagery import TimeSeries
from .model import Classifier, TrainConfig, train
from .scoring import ChangeResult, change_score, fractional_ranks

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledScore:
    id: str
    score: float
    label: int  # 1 = persistent change

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass
class EvalReport:
    auroc: float
    max_f1: float
    best_threshold: float
    n_pos: int
    n_neg: int
    curve: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def _split_arrays(items: list[LabeledScore]) -> tuple[np.ndarray, np.ndarray]:
    scores = np.array([it.score for it in items], dtype=np.float64)
    labels = np.array([it.label for it in items], dtype=np.int64)
    return scores, labels


def auroc_from_arrays(scores: np.ndarray, labels: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one positive and one negative")
    ranks = fractional_ranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auroc(items: list[LabeledScore]) -> float:
    """Probability a random positive outranks a random negative; ties count half."""
    scores, labels = _split_arrays(items)
    return auroc_from_arrays(scores, labels)


def _f1_curve(scores: np.ndarray, labels: np.ndarray):
    """F1 at every distinct threshold (predict positive when score >= threshold)."""
    n_pos = int(labels.sum())
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    cum_tp = np.cumsum(labels[order])
    # last occurrence of each distinct value in descending order includes all ties
    is_last = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    idx = np.flatnonzero(is_last)
    thresholds = sorted_scores[idx]
    tp = cum_tp[idx].astype(np.float64)
    n_pred = (idx + 1).astype(np.float64)
    f1 = np.where(n_pred + n_pos > 0, 2.0 * tp / (n_pred + n_pos), 0.0)
    return thresholds, tp, n_pred, f1


def max_f1_from_arrays(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.sum() == 0:
        raise ValueError("max F1 needs at least one positive")
    thresholds, _, _, f1 = _f1_curve(scores, labels)
    best = int(np.argmax(f1))  # thresholds descend, so first max is the largest tau
    return float(f1[best]), float(thresholds[best])


def max_f1(items: list[LabeledScore]) -> tuple[float, float]:
    """Best F1 over all thresholds and the threshold attaining it (largest on ties)."""
    scores, labels = _split_arrays(items)
    return max_f1_from_arrays(scores, labels)


def evaluate(items: list[LabeledScore]) -> EvalReport:
    scores, labels = _split_arrays(items)
    roc = auroc_from_arrays(scores, labels)
    thresholds, tp, n_pred, f1 = _f1_curve(scores, labels)
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    best = int(np.argmax(f1))
    curve = [
        {
            "threshold": float(t),
            "tp": int(tp_k),
            "fp": int(np_k - tp_k),
            "fn": int(n_pos - tp_k),
            "tpr": float(tp_k / n_pos),
            "fpr": float((np_k - tp_k) / n_neg),
            "f1": float(f1_k),
        }
        for t, tp_k, np_k, f1_k in zip(thresholds, tp, n_pred, f1)
    ]
    return EvalReport(
        auroc=roc,
        max_f1=float(f1[best]),
        best_threshold=float(thresholds[best]),
        n_pos=n_pos,
        n_neg=n_neg,
        curve=curve,
    )


# --- benchmark and ablation --------------------------------------------------------


def score_dataset(
    clf: Classifier, series_list: list[TimeSeries], measure: str = "pivot"
) -> list[ChangeResult]:
    return [change_score(clf, s, measure) for s in series_list]


def labeled_scores(
    results: list[ChangeResult], labels: dict[str, int]
) -> list[LabeledScore]:
    missing = [r.series_id for r in results if r.series_id not in labels]
    if missing:
        raise ValueError(f"no labels for series: {missing[:5]}")
    return [LabeledScore(id=r.series_id, score=r.score, label=labels[r.series_id]) for r in results]


def run_benchmark(
    clf: Classifier,
    series_list: list[TimeSeries],
    labels: dict[str, int],
    measure: str = "pivot",
) -> EvalReport:
    """Change score per series, then AUROC and max-F1 against binary labels."""
    results = score_dataset(clf, series_list, measure)
    return evaluate(labeled_scores(results, labels))


@dataclass
class AblationRow:
    context: int
    measure: str
    auroc: float
    max_f1: float


def run_ablation(
    train_series: list[TimeSeries],
    eval_series: list[TimeSeries],
    eval_labels: dict[str, int],
    base_config: TrainConfig,
    contexts: tuple[int, ...] = (1, 2, 3, 4, 5),
    measures: tuple[str, ...] = ("pivot", "spearman"),
) -> list[AblationRow]:
    """Retrain per context size (input width changes with c), evaluate both measures.

    Per-cell seeds derive deterministically from the base seed, so one master
    seed reproduces the whole table.
    """
    rows = []
    for c in contexts:
        config = replace(base_config, context=c, seed=base_config.seed + 101 * c)
        params, _ = train(train_series, config)
        clf = Classifier(params=params, encoder=config.encoder_config(), context=c)
        for measure in measures:
            report = run_benchmark(clf, eval_series, eval_labels, measure)
            rows.append(
                AblationRow(context=c, measure=measure, auroc=report.auroc, max_f1=report.max_f1)
            )
            log.info(
                "ablation c=%d measure=%s: auroc %.4f, max_f1 %.4f",
                c, measure, report.auroc, report.max_f1,
            )
    return rows


def write_ablation_csv(rows: list[AblationRow], path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["context", "measure", "auroc", "max_f1"])
        for r in rows:
            writer.writerow([r.context, r.measure, repr(r.auroc), repr(r.max_f1)])


def write_report_json(report: EvalReport, path: Path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_json(), f, indent=1)

"""Spatial localization: filter the top-scoring half, retrain on patches, map cells.

Stage 1 trains on full images; the trained model then ranks all series by
change score, the top fraction survives, survivors are split into small
patches, and a fresh model is trained on the denser patch dataset. Per-cell
scores from the patch model form binary change maps.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .evaluation import LabeledScore
from .imagery import ChangeEvent, Rect, TimeSeries, patch_id, split_patches, write_ppm
from .model import Classifier, TrainConfig, TrainReport, train
from .scoring import change_score

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchGrid:
    parent_id: str
    rows: int
    cols: int
    patch_edge: int

    @staticmethod
    def for_series(series: TimeSeries, patch_edge: int) -> "PatchGrid":
        if series.height % patch_edge or series.width % patch_edge:
            raise ValueError(
                f"{series.height}x{series.width} not divisible by patch edge {patch_edge}"
            )
        return PatchGrid(
            parent_id=series.id,
            rows=series.height // patch_edge,
            cols=series.width // patch_edge,
            patch_edge=patch_edge,
        )

    def cell_rect(self, row: int, col: int) -> Rect:
        e = self.patch_edge
        return Rect(top=row * e, left=col * e, height=e, width=e)


@dataclass
class PatchLabelMap:
    grid: PatchGrid
    scores: np.ndarray  # (rows, cols) float
    labels: np.ndarray  # (rows, cols) 0/1
    threshold: float

    def __post_init__(self):
        shape = (self.grid.rows, self.grid.cols)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.shape != shape or self.labels.shape != shape:
            raise ValueError(f"map arrays must have shape {shape}")


def filter_top_fraction(
    scored: list[tuple[TimeSeries, float]], fraction: float = 0.5
) -> list[TimeSeries]:
    """ceil(fraction * N) highest-scoring series; ties broken by id for determinism."""
    if not scored:
        raise ValueError("nothing to filter")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    keep = math.ceil(fraction * len(scored))
    ranked = sorted(scored, key=lambda pair: (-pair[1], pair[0].id))
    return [series for series, _ in ranked[:keep]]


@dataclass
class IterativeTrainResult:
    full_params: dict
    full_report: TrainReport
    kept_ids: list[str]
    patch_params: dict
    patch_report: TrainReport
    patch_config: TrainConfig

    def patch_classifier(self) -> Classifier:
        return Classifier(
            params=self.patch_params,
            encoder=self.patch_config.encoder_config(),
            context=self.patch_config.context,
        )


def _default_patch_config(config: TrainConfig, stage1_steps_per_epoch: int) -> TrainConfig:
    # splitting multiplies the series count; pin the step budget to stage 1's
    # so retraining keeps the same optimization schedule
    return replace(
        config, seed=config.seed + 1, steps_per_epoch=stage1_steps_per_epoch
    )


def iterative_train(
    dataset: list[TimeSeries],
    config: TrainConfig,
    patch_edge: int,
    fraction: float = 0.5,
    measure: str = "pivot",
    patch_config: TrainConfig | None = None,
) -> IterativeTrainResult:
    """Train on full images, keep the top-scoring fraction, retrain fresh on patches."""
    full_params, full_report = train(dataset, config)
    clf = Classifier(params=full_params, encoder=config.encoder_config(), context=config.context)
    scored = [(s, change_score(clf, s, measure).score) for s in dataset]
    kept = filter_top_fraction(scored, fraction)
    log.info("stage 2 keeps %d of %d series", len(kept), len(dataset))
    patches = [p for s in kept for p in split_patches(s, patch_edge)]
    if patch_config is None:
        patch_config = _default_patch_config(config, full_report.steps_per_epoch)
    patch_params, patch_report = train(patches, patch_config)
    return IterativeTrainResult(
        full_params=full_params,
        full_report=full_report,
        kept_ids=[s.id for s in kept],
        patch_params=patch_params,
        patch_report=patch_report,
        patch_config=patch_config,
    )


def patch_change_map(
    patch_clf: Classifier,
    series: TimeSeries,
    patch_edge: int,
    threshold: float,
    measure: str = "pivot",
) -> PatchLabelMap:
    """Per-cell change scores and their thresholded binary labels."""
    grid = PatchGrid.for_series(series, patch_edge)
    scores = np.empty((grid.rows, grid.cols))
    for idx, patch in enumerate(split_patches(series, patch_edge)):
        r, c = divmod(idx, grid.cols)
        scores[r, c] = change_score(patch_clf, patch, measure).score
    return PatchLabelMap(
        grid=grid,
        scores=scores,
        labels=(scores >= threshold).astype(np.int64),
        threshold=threshold,
    )


def propagate_parent_labels(
    parent_label: int, grid: PatchGrid, event: ChangeEvent | None
) -> np.ndarray:
    """Ground-truth cell labels from the parent label and event geometry.

    Unchanged parents propagate 0 to every cell; changed parents mark exactly
    the cells whose rectangle intersects the event region.
    """
    if parent_label not in (0, 1):
        raise ValueError(f"parent label must be 0 or 1, got {parent_label}")
    labels = np.zeros((grid.rows, grid.cols), dtype=np.int64)
    if parent_label == 0:
        return labels
    if event is None:
        raise ValueError(
            f"series {grid.parent_id!r} labeled changed but carries no event metadata"
        )
    for r in range(grid.rows):
        for c in range(grid.cols):
            if grid.cell_rect(r, c).intersects(event.region):
                labels[r, c] = 1
    return labels


def patch_level_items(
    patch_clf: Classifier,
    series_list: list[TimeSeries],
    parent_labels: dict[str, int],
    events: dict[str, ChangeEvent | None],
    patch_edge: int,
    measure: str = "pivot",
) -> list[LabeledScore]:
    """Per-cell scores paired with geometry-derived ground truth, for patch AUROC."""
    items = []
    for series in series_list:
        grid = PatchGrid.for_series(series, patch_edge)
        label_map = patch_change_map(patch_clf, series, patch_edge, threshold=0.5, measure=measure)
        truth = propagate_parent_labels(
            parent_labels[series.id], grid, events.get(series.id)
        )
        for r in range(grid.rows):
            for c in range(grid.cols):
                items.append(
                    LabeledScore(
                        id=patch_id(series.id, r, c),
                        score=float(label_map.scores[r, c]),
                        label=int(truth[r, c]),
                    )
                )
    return items


# --- exports -----------------------------------------------------------------------


def write_map_csv(values: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for row in np.asarray(values):
            writer.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


def overlay_image(series: TimeSeries, label_map: PatchLabelMap) -> np.ndarray:
    """Last frame with red (changed) / green (unchanged) cells at 50% opacity."""
    frame = series.images[-1].copy()
    e = label_map.grid.patch_edge
    red = np.array([1.0, 0.0, 0.0])
    green = np.array([0.0, 1.0, 0.0])
    for r in range(label_map.grid.rows):
        for c in range(label_map.grid.cols):
            tint = red if label_map.labels[r, c] else green
            cell = frame[r * e : (r + 1) * e, c * e : (c + 1) * e]
            cell[:] = 0.5 * cell + 0.5 * tint
    return frame


def export_change_map(
    label_map: PatchLabelMap, series: TimeSeries, out_prefix: Path
) -> None:
    """Write `<prefix>_scores.csv`, `<prefix>_labels.csv`, `<prefix>_overlay.ppm`."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    write_map_csv(label_map.scores, out_prefix.with_name(out_prefix.name + "_scores.csv"))
    with open(out_prefix.with_name(out_prefix.name + "_labels.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        for row in label_map.labels:
            writer.writerow([int(v) for v in row])
    write_ppm(out_prefix.with_name(out_prefix.name + "_overlay.ppm"), overlay_image(series, label_map))

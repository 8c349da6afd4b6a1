"""Confidence score series and their reduction to change scores.

Every interior image of a series is classified against anchor windows taken
from the series' two ends, producing a score series S. Two measures reduce S
to a single change score: the pivot score (largest gap between prefix and
suffix means over all splits) and the Spearman rank correlation against
temporal position. A distance-ratio protocol over raw embeddings serves as
the comparison baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagery import TimeSeries
from .model import Classifier, classify_batch, embed_batch
from .sampler import assemble_pair_tensor

MEASURES = ("pivot", "spearman")


@dataclass
class ScoreSeries:
    """Per-query classifier confidences in temporal order."""

    parent_id: str
    values: np.ndarray  # (m,) floats in (0, 1)
    query_indices: np.ndarray  # positions within the parent series
    query_months: np.ndarray  # timestamps of those positions

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.query_indices = np.asarray(self.query_indices, dtype=np.int64)
        self.query_months = np.asarray(self.query_months, dtype=np.int64)
        m = self.values.shape[0]
        if m < 2:
            raise ValueError(f"score series for {self.parent_id!r} needs >= 2 values, got {m}")
        if self.query_indices.shape != (m,) or self.query_months.shape != (m,):
            raise ValueError("query indices/months must match score count")
        if np.any(self.values <= 0.0) or np.any(self.values >= 1.0):
            raise ValueError("scores must lie strictly in (0, 1)")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class ChangeResult:
    series_id: str
    measure: str
    score: float
    pivot_index: int | None = None  # split position in [1, m-1], pivot measure only
    pivot_month: int | None = None  # month of the first post-split query

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")


def score_series(
    clf: Classifier, series: TimeSeries, single_image_anchors: bool = False
) -> ScoreSeries:
    """Classify every interior image against the first/last anchor windows.

    Anchors span c images at each end by default; single_image_anchors tiles
    the first/last image instead, matching the width the encoder expects.
    """
    c = clf.context
    n = len(series)
    if n < 2 * c + 2:
        raise ValueError(
            f"series {series.id!r} has {n} images, need >= {2 * c + 2} to score "
            f"at context {c}"
        )
    if single_image_anchors:
        first = np.repeat(series.images[0][None], c, axis=0)
        last = np.repeat(series.images[n - 1][None], c, axis=0)
    else:
        first = series.images[:c]
        last = series.images[n - c :]
    queries = np.arange(c, n - c)
    x1 = np.stack([assemble_pair_tensor(first, series.images[j]) for j in queries])
    x2 = np.stack([assemble_pair_tensor(last, series.images[j]) for j in queries])
    omega = classify_batch(x1, x2, clf.params, clf.encoder)
    return ScoreSeries(
        parent_id=series.id,
        values=omega.astype(np.float64),
        query_indices=queries,
        query_months=series.timestamps[queries],
    )


# --- measures (accept arbitrary real vectors) -------------------------------------


def pivot_statistic(values: np.ndarray) -> tuple[float, int]:
    """Max |prefix mean - suffix mean| over splits 1..m-1; earliest split on ties."""
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[0]
    if m < 2:
        raise ValueError("pivot needs at least 2 scores")
    cums = np.cumsum(values)
    i = np.arange(1, m)
    gaps = np.abs(cums[:-1] / i - (cums[-1] - cums[:-1]) / (m - i))
    best = int(np.argmax(gaps))
    return float(gaps[best]), best + 1


def fractional_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    values = np.asarray(values)
    order = np.argsort(values, kind="stable")
    sv = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    bounds = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1], True])
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        ranks[order[lo:hi]] = (lo + hi + 1) / 2.0  # mean of 1-based positions lo+1..hi
    return ranks


def spearman_statistic(values: np.ndarray) -> float:
    """1 - 6 * sum (rank - position)^2 / (m (m^2 - 1)), fractional ranks on ties."""
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[0]
    if m < 2:
        raise ValueError("spearman needs at least 2 scores")
    d = fractional_ranks(values) - np.arange(1, m + 1)
    return float(1.0 - 6.0 * np.sum(d * d) / (m * (m * m - 1)))


def pivot_score(s: ScoreSeries) -> ChangeResult:
    score, index = pivot_statistic(s.values)
    return ChangeResult(
        series_id=s.parent_id,
        measure="pivot",
        score=score,
        pivot_index=index,
        pivot_month=int(s.query_months[index]),
    )


def spearman(s: ScoreSeries) -> ChangeResult:
    return ChangeResult(
        series_id=s.parent_id, measure="spearman", score=spearman_statistic(s.values)
    )


def change_score(
    clf: Classifier,
    series: TimeSeries,
    measure: str = "pivot",
    single_image_anchors: bool = False,
) -> ChangeResult:
    s = score_series(clf, series, single_image_anchors=single_image_anchors)
    if measure == "pivot":
        return pivot_score(s)
    if measure == "spearman":
        return spearman(s)
    raise ValueError(f"unknown measure {measure!r}")


# --- distance-ratio baseline -------------------------------------------------------


def _tile_single(image: np.ndarray, c: int) -> np.ndarray:
    return assemble_pair_tensor(np.repeat(image[None], c, axis=0), image)


def distance_ratio_baseline(
    clf: Classifier,
    series: TimeSeries,
    rng: np.random.Generator,
    n_pairs: int = 3,
) -> float | None:
    """Ratio of long-term to short-term mean embedding distance; larger = more change.

    Long-term distances come from random (first-year, last-year) image pairs,
    short-term from random same-year adjacent pairs. Returns None when the
    short-term distance is degenerate (below 1e-12) or no same-year adjacent
    pair exists.
    """
    ts = series.timestamps
    if ts[-1] - ts[0] < 24:
        raise ValueError(
            f"series {series.id!r} spans {ts[-1] - ts[0]} months, baseline needs >= 24"
        )
    first_year = np.flatnonzero(ts - ts[0] < 12)
    last_year = np.flatnonzero(ts[-1] - ts < 12)
    same_year = np.flatnonzero(ts[:-1] // 12 == ts[1:] // 12)
    if len(same_year) == 0:
        return None

    c = clf.context
    tensors = np.stack([_tile_single(img, c) for img in series.images])
    emb = embed_batch(tensors, clf.params, clf.encoder).astype(np.float64)

    long_pairs = [
        (first_year[int(rng.integers(0, len(first_year)))],
         last_year[int(rng.integers(0, len(last_year)))])
        for _ in range(n_pairs)
    ]
    short_starts = [same_year[int(rng.integers(0, len(same_year)))] for _ in range(n_pairs)]
    long_dist = float(np.mean([np.linalg.norm(emb[a] - emb[b]) for a, b in long_pairs]))
    short_dist = float(np.mean([np.linalg.norm(emb[k] - emb[k + 1]) for k in short_starts]))
    if short_dist < 1e-12:
        return None
    return long_dist / short_dist


# --- CSV output --------------------------------------------------------------------


def write_score_series_csv(series_scores: list[ScoreSeries], path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["series_id", "query_index", "timestamp_month", "score"])
        for s in series_scores:
            for idx, month, value in zip(s.query_indices, s.query_months, s.values):
                writer.writerow([s.parent_id, int(idx), int(month), repr(float(value))])


def read_score_series_csv(path: Path) -> dict[str, ScoreSeries]:
    rows: dict[str, list[tuple[int, int, float]]] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            rows.setdefault(row["series_id"], []).append(
                (int(row["query_index"]), int(row["timestamp_month"]), float(row["score"]))
            )
    out = {}
    for sid, entries in rows.items():
        entries.sort()
        out[sid] = ScoreSeries(
            parent_id=sid,
            values=np.array([e[2] for e in entries]),
            query_indices=np.array([e[0] for e in entries]),
            query_months=np.array([e[1] for e in entries]),
        )
    return out


def write_change_results_csv(results: list[ChangeResult], path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["series_id", "measure", "score", "pivot_index", "pivot_month"])
        for r in results:
            writer.writerow(
                [
                    r.series_id,
                    r.measure,
                    repr(float(r.score)),
                    "" if r.pivot_index is None else int(r.pivot_index),
                    "" if r.pivot_month is None else int(r.pivot_month),
                ]
            )


def read_change_results_csv(path: Path) -> list[ChangeResult]:
    results = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            results.append(
                ChangeResult(
                    series_id=row["series_id"],
                    measure=row["measure"],
                    score=float(row["score"]),
                    pivot_index=int(row["pivot_index"]) if row["pivot_index"] else None,
                    pivot_month=int(row["pivot_month"]) if row["pivot_month"] else None,
                )
            )
    return results

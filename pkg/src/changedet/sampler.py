"""Training triplet construction and channel-stacked pair tensors.

A triplet places two anchor windows of c consecutive images inside a series
and a query image strictly outside them: before the first anchor (label 0)
or after the second (label 1). The query is therefore always temporally
closer to the anchor named by its label. Layouts are sampled uniformly over
all valid (a1_start, a2_start, q_pos) placements conditioned on the label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagery import TimeSeries


@dataclass
class Triplet:
    a1: np.ndarray  # (c, H, W, 3)
    a2: np.ndarray  # (c, H, W, 3)
    q: np.ndarray  # (H, W, 3)
    y: int
    source_id: str
    a1_start: int
    a2_start: int
    q_pos: int


def min_series_length(c: int) -> int:
    # both anchors plus at least one outside query slot on each side
    return 2 * c + 2


def _weighted_pick(rng: np.random.Generator, weights: np.ndarray) -> int:
    """Index drawn with probability proportional to non-negative integer weights."""
    cum = np.cumsum(weights)
    total = int(cum[-1])
    if total <= 0:
        raise ValueError("no valid layouts to sample from")
    return int(np.searchsorted(cum, rng.integers(0, total), side="right"))


def sample_triplet(series: TimeSeries, c: int, rng: np.random.Generator) -> Triplet:
    """Draw one (A1, A2, Q, y) uniformly over valid layouts given a fair label."""
    if c < 1:
        raise ValueError("context size c must be >= 1")
    n = len(series)
    if n < min_series_length(c):
        raise ValueError(
            f"series {series.id!r} has {n} images, need at least {min_series_length(c)} "
            f"for context size {c}"
        )
    y = int(rng.integers(0, 2))
    if y == 0:
        # q in [0, a1), a2 in [a1 + c, n - c]; weight = (#q slots) * (#a2 slots)
        a1_candidates = np.arange(1, n - 2 * c + 1)
        weights = a1_candidates * (n - 2 * c + 1 - a1_candidates)
        a1 = int(a1_candidates[_weighted_pick(rng, weights)])
        a2 = int(rng.integers(a1 + c, n - c + 1))
        q = int(rng.integers(0, a1))
    else:
        # q in [a2 + c, n), a1 in [0, a2 - c]; mirror of the y = 0 case
        a2_candidates = np.arange(c, n - c)
        weights = (a2_candidates - c + 1) * (n - c - a2_candidates)
        a2 = int(a2_candidates[_weighted_pick(rng, weights)])
        a1 = int(rng.integers(0, a2 - c + 1))
        q = int(rng.integers(a2 + c, n))
    return Triplet(
        a1=series.images[a1 : a1 + c],
        a2=series.images[a2 : a2 + c],
        q=series.images[q],
        y=y,
        source_id=series.id,
        a1_start=a1,
        a2_start=a2,
        q_pos=q,
    )


def assemble_pair_tensor(anchor: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Channel-stack query with anchor images: (c+1)*3 x H x W.

    Channels 0..2 are Q; channels 3k..3k+2 (k >= 1) are anchor image k-1.
    """
    anchor = np.asarray(anchor)
    q = np.asarray(q)
    if anchor.ndim != 4 or anchor.shape[1:] != q.shape:
        raise ValueError(
            f"anchor images {anchor.shape} incompatible with query image {q.shape}"
        )
    parts = [np.moveaxis(q, -1, 0)]
    for img in anchor:
        parts.append(np.moveaxis(img, -1, 0))
    return np.concatenate(parts, axis=0)


def eligible_series(dataset: list[TimeSeries], c: int) -> list[int]:
    need = min_series_length(c)
    return [i for i, s in enumerate(dataset) if len(s) >= need]


def make_training_batch(
    dataset: list[TimeSeries], batch_size: int, c: int, rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray, int]]:
    """batch_size independent (tensor(A1,Q), tensor(A2,Q), y) draws, series with replacement."""
    if not dataset:
        raise ValueError("dataset is empty")
    pool = eligible_series(dataset, c)
    if not pool:
        raise ValueError(
            f"no series long enough for context size {c} "
            f"(need {min_series_length(c)} images)"
        )
    batch = []
    for _ in range(batch_size):
        series = dataset[pool[int(rng.integers(0, len(pool)))]]
        t = sample_triplet(series, c, rng)
        batch.append((assemble_pair_tensor(t.a1, t.q), assemble_pair_tensor(t.a2, t.q), t.y))
    return batch

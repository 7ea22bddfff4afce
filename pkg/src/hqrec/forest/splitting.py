"""Split-search primitives: bootstrap rounds, SSE cuts and twoing scores.

Numeric features split on value thresholds at midpoints between adjacent
distinct values.  Categorical features are ordered by per-category mean
target and split at a position in that ordering, so a categorical
"threshold" is the count of categories routed left.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from hqrec.records import FeatureSchema

KIND_CATEGORICAL = "categorical"


def bootstrap_split(
    n_rows: int, k: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Draw k bootstrap rounds over n_rows rows.

    Each round yields (train, oob): train has exactly n_rows indices drawn
    with replacement, oob is the sorted set of indices never drawn.  Rounds
    are generated independently from (seed, round) so parallel training
    reproduces serial results.
    """
    if n_rows < 1:
        raise ValueError("bootstrap needs at least one row")
    return [round_indices(n_rows, seed, i) for i in range(k)]


def round_indices(n_rows: int, seed: int, round_index: int) -> tuple[np.ndarray, np.ndarray]:
    """One bootstrap round; RNG stream depends only on (seed, round_index)."""
    rng = np.random.default_rng([seed, round_index])
    train = rng.integers(0, n_rows, size=n_rows)
    oob = np.setdiff1d(np.arange(n_rows), train)
    return train, oob


@dataclass(frozen=True)
class SplitCandidate:
    """A two-fork cut of one node on one feature.

    For numeric features rows with value <= threshold go left.  For
    categorical features threshold is the number of mean-ordered categories
    routed left and left_categories lists their ids.
    """

    feature_index: int
    kind: str
    threshold: float
    loss: float
    left_mean: float
    right_mean: float
    left_categories: tuple[int, ...] | None = None


def node_sse(y: np.ndarray) -> float:
    """Sum of squared deviations from the mean, clamped at zero."""
    if y.size == 0:
        return 0.0
    total = float(np.sum(y))
    return max(0.0, float(np.sum(y * y)) - total * total / y.size)


def _interval_losses(
    n1: np.ndarray, s1: np.ndarray, q1: np.ndarray, n: int, s: float, q: float
) -> np.ndarray:
    """SSE of (left, right) prefix partitions; cancellation clamped at 0."""
    n2 = n - n1
    sse_left = np.maximum(q1 - s1 * s1 / n1, 0.0)
    sse_right = np.maximum((q - q1) - (s - s1) ** 2 / n2, 0.0)
    return sse_left + sse_right


def _numeric_cut(x: np.ndarray, y: np.ndarray, feature_index: int, kind: str) -> SplitCandidate | None:
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    boundary = np.nonzero(xs[1:] > xs[:-1])[0]
    if boundary.size == 0:
        return None
    cum_s = np.cumsum(ys)
    cum_q = np.cumsum(ys * ys)
    n1 = (boundary + 1).astype(np.float64)
    losses = _interval_losses(
        n1, cum_s[boundary], cum_q[boundary], ys.size, cum_s[-1], cum_q[-1]
    )
    best = int(np.argmin(losses))  # first minimum = lowest threshold
    pos = boundary[best]
    threshold = float((xs[pos] + xs[pos + 1]) / 2.0)
    left_n = pos + 1
    return SplitCandidate(
        feature_index=feature_index,
        kind=kind,
        threshold=threshold,
        loss=float(losses[best]),
        left_mean=float(cum_s[pos] / left_n),
        right_mean=float((cum_s[-1] - cum_s[pos]) / (ys.size - left_n)),
    )


def _category_stats(x: np.ndarray, y: np.ndarray):
    """Per-category (ids, counts, sums, sums of squares), ids ascending."""
    ids = x.astype(np.int64)
    cats = np.unique(ids)
    pos = np.searchsorted(cats, ids)
    counts = np.bincount(pos, minlength=cats.size).astype(np.float64)
    sums = np.bincount(pos, weights=y, minlength=cats.size)
    sq = np.bincount(pos, weights=y * y, minlength=cats.size)
    return cats, counts, sums, sq


def _mean_order(cats: np.ndarray, counts: np.ndarray, sums: np.ndarray) -> np.ndarray:
    # Ties on mean fall back to ascending category id for determinism.
    return np.lexsort((cats, sums / counts))


def _categorical_cut(x: np.ndarray, y: np.ndarray, feature_index: int) -> SplitCandidate | None:
    cats, counts, sums, sq = _category_stats(x, y)
    if cats.size < 2:
        return None
    order = _mean_order(cats, counts, sums)
    c = np.cumsum(counts[order])[:-1]
    s = np.cumsum(sums[order])[:-1]
    q = np.cumsum(sq[order])[:-1]
    losses = _interval_losses(c, s, q, y.size, float(np.sum(sums)), float(np.sum(sq)))
    best = int(np.argmin(losses))
    split_at = best + 1  # categories routed left
    left = tuple(int(cat) for cat in cats[order][:split_at])
    return SplitCandidate(
        feature_index=feature_index,
        kind=KIND_CATEGORICAL,
        threshold=float(split_at),
        loss=float(losses[best]),
        left_mean=float(s[best] / c[best]),
        right_mean=float((np.sum(sums) - s[best]) / (y.size - c[best])),
        left_categories=left,
    )


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    allowed_features: Iterable[int],
    schema: FeatureSchema,
) -> SplitCandidate | None:
    """Minimum-SSE two-fork cut over the allowed features.

    Ties break toward the lower feature index, then the lower threshold.
    Returns None when no cut strictly reduces the node SSE (in particular
    when all targets or all feature values are constant).
    """
    best: SplitCandidate | None = None
    for feature_index in sorted(allowed_features):
        kind = schema.features[feature_index][1]
        column = X[:, feature_index]
        if kind == KIND_CATEGORICAL:
            candidate = _categorical_cut(column, y, feature_index)
        else:
            candidate = _numeric_cut(column, y, feature_index, kind)
        if candidate is not None and (best is None or candidate.loss < best.loss):
            best = candidate
    if best is None or not best.loss < node_sse(y):
        return None
    return best


def left_selector(X: np.ndarray, candidate: SplitCandidate) -> np.ndarray:
    """Boolean mask of rows the candidate routes left."""
    column = X[:, candidate.feature_index]
    if candidate.kind == KIND_CATEGORICAL:
        return np.isin(column.astype(np.int64), np.array(candidate.left_categories))
    return column <= candidate.threshold


def split_partition(
    X: np.ndarray, candidate: SplitCandidate
) -> tuple[np.ndarray, np.ndarray]:
    """Row indices (left, right) under the candidate; disjoint and total."""
    mask = left_selector(X, candidate)
    indices = np.arange(X.shape[0])
    return indices[mask], indices[~mask]


def quantile_edges(y: np.ndarray, bins: int) -> np.ndarray:
    """Interior equal-frequency edges turning targets into bins classes."""
    if bins < 2:
        raise ValueError("need at least two bins")
    return np.quantile(y, np.arange(1, bins) / bins)


def class_histogram(y: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Counts per class; values equal to an edge fall in the upper class."""
    classes = np.searchsorted(edges, y, side="right")
    return np.bincount(classes, minlength=edges.size + 1).astype(np.float64)


@dataclass(frozen=True)
class TwoingScore:
    value: float
    p_left: float
    p_right: float


def twoing_score(
    left_y: np.ndarray, right_y: np.ndarray, edges: np.ndarray
) -> TwoingScore:
    """Separation score of a two-fork partition over target classes.

    value = 2 * pL * pR * sum_j |p(class j | left) - p(class j | right)|,
    which is 0 when either side is empty and at most 1 overall.
    """
    n_left = int(left_y.size)
    n_right = int(right_y.size)
    n = n_left + n_right
    if n == 0:
        return TwoingScore(0.0, 0.0, 0.0)
    p_left = n_left / n
    p_right = n_right / n
    if n_left == 0 or n_right == 0:
        return TwoingScore(0.0, p_left, p_right)
    spread = np.abs(
        class_histogram(left_y, edges) / n_left
        - class_histogram(right_y, edges) / n_right
    ).sum()
    return TwoingScore(2.0 * p_left * p_right * float(spread), p_left, p_right)


@dataclass(frozen=True)
class TwoingCut:
    """Best same-feature refinement cut inside one branch."""

    value: float
    threshold: float
    left_categories: tuple[int, ...] | None = None


def best_twoing_cut(
    x: np.ndarray, y: np.ndarray, kind: str, edges: np.ndarray
) -> TwoingCut | None:
    """Maximum-twoing cut of the rows (x, y) on their own feature.

    Classes come from the father's edges so every refinement is judged
    against the same binning.  Ties break toward the lower threshold.
    """
    classes = np.searchsorted(edges, y, side="right")
    n_classes = edges.size + 1
    n = y.size
    if n < 2:
        return None
    total = np.bincount(classes, minlength=n_classes).astype(np.float64)
    if kind == KIND_CATEGORICAL:
        cats, counts, sums, _ = _category_stats(x, y)
        if cats.size < 2:
            return None
        hist = np.zeros((cats.size, n_classes))
        np.add.at(hist, (np.searchsorted(cats, x.astype(np.int64)), classes), 1.0)
        order = _mean_order(cats, counts, sums)
        left_counts = np.cumsum(hist[order], axis=0)[:-1]
        n1 = np.cumsum(counts[order])[:-1]
        values = _twoing_values(left_counts, total, n1, n)
        best = int(np.argmax(values))
        left = tuple(int(cat) for cat in cats[order][: best + 1])
        return TwoingCut(float(values[best]), float(best + 1), left)

    order = np.argsort(x, kind="stable")
    xs = x[order]
    boundary = np.nonzero(xs[1:] > xs[:-1])[0]
    if boundary.size == 0:
        return None
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), classes[order]] = 1.0
    left_counts = np.cumsum(onehot, axis=0)[boundary]
    n1 = (boundary + 1).astype(np.float64)
    values = _twoing_values(left_counts, total, n1, n)
    best = int(np.argmax(values))
    pos = boundary[best]
    return TwoingCut(float(values[best]), float((xs[pos] + xs[pos + 1]) / 2.0))


def _twoing_values(
    left_counts: np.ndarray, total: np.ndarray, n1: np.ndarray, n: int
) -> np.ndarray:
    """Twoing score per cut from cumulative class counts (one row per cut)."""
    n2 = n - n1
    p_left = left_counts / n1[:, None]
    p_right = (total[None, :] - left_counts) / n2[:, None]
    share = n1 / n
    return 2.0 * share * (1.0 - share) * np.abs(p_left - p_right).sum(axis=1)

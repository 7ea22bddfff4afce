"""Multi-branch regression trees with box-plot leaf denoising.

A node first takes the classic minimum-SSE two-fork cut, then tries to
promote it to a multi-branch split: each branch is re-cut on the same
feature while the refinement separates the father's target classes at
least as well as the father's own cut did.  Leaves drop values outside
the Tukey fences before averaging, so a handful of abnormal stays does
not poison the prediction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

import numpy as np

from hqrec.forest.splitting import (
    KIND_CATEGORICAL,
    SplitCandidate,
    best_split,
    best_twoing_cut,
    left_selector,
    quantile_edges,
    twoing_score,
)
from hqrec.records import FeatureSchema

if TYPE_CHECKING:
    from hqrec.forest.model import TrainConfig


@dataclass
class Leaf:
    """Terminal node: denoised mean plus the fence bookkeeping."""

    mean_s: float
    kept_count: int
    removed_count: int
    il: float
    ol: float


@dataclass
class Internal:
    """Split node with 2..max_branches ordered branches.

    Numeric: cuts are ascending upper bounds, branch i serves values
    <= cuts[i], the last branch serves the rest.  Categorical: branch i
    serves the ids in branch_categories[i]; ids seen at prediction time
    but not at training time route to default_branch.
    """

    feature_index: int
    kind: str
    cuts: tuple[float, ...]
    branch_categories: tuple[tuple[int, ...], ...] | None
    default_branch: int
    children: list["TreeNode"] = field(default_factory=list)


TreeNode = Union[Leaf, Internal]


def _median_sorted(values: np.ndarray) -> float:
    k = values.size
    mid = k // 2
    if k % 2:
        return float(values[mid])
    return float((values[mid - 1] + values[mid]) / 2.0)


def denoise_leaf(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Drop values outside the Tukey fences; order of kept rows preserved.

    Hinges are medians of the lower/upper halves, each half including the
    middle element when the count is odd.  Fences sit 1.5 IQR beyond the
    hinges.  Returns (kept_values, lower_fence, upper_fence).
    """
    if values.size == 0:
        raise ValueError("denoise_leaf needs at least one value")
    ordered = np.sort(values)
    half = (values.size + 1) // 2
    q1 = _median_sorted(ordered[:half])
    q3 = _median_sorted(ordered[values.size - half :])
    spread = 1.5 * (q3 - q1)
    il = q1 - spread
    ol = q3 + spread
    kept = values[(values >= il) & (values <= ol)]
    return kept, float(il), float(ol)


def leaf_value(kept: np.ndarray, all_values: np.ndarray) -> float:
    """Mean of the kept values; raw median if denoising kept nothing."""
    if kept.size == 0:
        return float(np.median(all_values))
    return float(np.mean(kept))


def _make_leaf(y: np.ndarray, denoise: bool) -> Leaf:
    if denoise:
        kept, il, ol = denoise_leaf(y)
    else:
        kept, il, ol = y, float(np.min(y)), float(np.max(y))
    return Leaf(
        mean_s=leaf_value(kept, y),
        kept_count=int(kept.size),
        removed_count=int(y.size - kept.size),
        il=il,
        ol=ol,
    )


@dataclass
class _Branch:
    """Mutable branch descriptor used only while extending a split."""

    selector: np.ndarray  # boolean mask over the node's rows
    upper: float | None  # numeric: inclusive upper cut; None for last branch
    categories: tuple[int, ...] | None


def extend_multibranch(
    X: np.ndarray,
    y: np.ndarray,
    candidate: SplitCandidate,
    edges: np.ndarray,
    max_branches: int,
) -> list[_Branch]:
    """Refine a two-fork cut into up to max_branches ordered branches.

    The father's twoing score is fixed by its own cut and class edges; a
    branch is re-cut on the same feature whenever its best refinement
    scores at least as high.  New sub-branches replace their parent in
    place and are examined again, left to right, until no branch improves
    or the cap is reached.
    """
    column = X[:, candidate.feature_index]
    left = left_selector(X, candidate)
    father = twoing_score(y[left], y[~left], edges).value
    if candidate.kind == KIND_CATEGORICAL:
        all_cats = tuple(
            int(c) for c in np.unique(column.astype(np.int64))
        )
        right_cats = tuple(c for c in all_cats if c not in set(candidate.left_categories))
        branches = [
            _Branch(left, None, candidate.left_categories),
            _Branch(~left, None, right_cats),
        ]
    else:
        branches = [
            _Branch(left, candidate.threshold, None),
            _Branch(~left, None, None),
        ]

    i = 0
    while i < len(branches) and len(branches) < max_branches:
        branch = branches[i]
        cut = best_twoing_cut(
            column[branch.selector], y[branch.selector], candidate.kind, edges
        )
        if cut is None or cut.value < father:
            i += 1
            continue
        if candidate.kind == KIND_CATEGORICAL:
            left_set = set(cut.left_categories)
            inner_left = branch.selector & np.isin(
                column.astype(np.int64), np.array(cut.left_categories)
            )
            first = _Branch(inner_left, None, cut.left_categories)
            second = _Branch(
                branch.selector & ~inner_left,
                None,
                tuple(c for c in branch.categories if c not in left_set),
            )
        else:
            inner_left = branch.selector & (column <= cut.threshold)
            first = _Branch(inner_left, cut.threshold, None)
            second = _Branch(branch.selector & ~inner_left, branch.upper, None)
        branches[i : i + 1] = [first, second]
    return branches


def train_tree(
    X: np.ndarray, y: np.ndarray, schema: FeatureSchema, config: "TrainConfig"
) -> TreeNode:
    """Grow one tree; a feature is consumed once split along a path."""
    allowed = tuple(range(len(schema.features)))
    return _grow(X, y, schema, config, allowed, depth=0)


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    schema: FeatureSchema,
    config: "TrainConfig",
    allowed: tuple[int, ...],
    depth: int,
) -> TreeNode:
    if (
        y.size < 2 * config.min_leaf
        or depth >= config.max_depth
        or not allowed
    ):
        return _make_leaf(y, config.denoise)
    candidate = best_split(X, y, allowed, schema)
    if candidate is None:
        return _make_leaf(y, config.denoise)
    edges = quantile_edges(y, config.bins)
    branches = extend_multibranch(X, y, candidate, edges, config.max_branches)
    remaining = tuple(f for f in allowed if f != candidate.feature_index)
    children = [
        _grow(X[b.selector], y[b.selector], schema, config, remaining, depth + 1)
        for b in branches
    ]
    sizes = [int(np.count_nonzero(b.selector)) for b in branches]
    default_branch = int(np.argmax(sizes))
    if candidate.kind == KIND_CATEGORICAL:
        return Internal(
            feature_index=candidate.feature_index,
            kind=KIND_CATEGORICAL,
            cuts=(),
            branch_categories=tuple(b.categories for b in branches),
            default_branch=default_branch,
            children=children,
        )
    return Internal(
        feature_index=candidate.feature_index,
        kind="numeric",
        cuts=tuple(b.upper for b in branches[:-1]),
        branch_categories=None,
        default_branch=default_branch,
        children=children,
    )


def _branch_of_values(node: Internal, values: np.ndarray) -> np.ndarray:
    """Branch index for each value of the node's split feature."""
    if node.kind == KIND_CATEGORICAL:
        ids = values.astype(np.int64)
        out = np.full(ids.shape, node.default_branch, dtype=np.int64)
        for b, cats in enumerate(node.branch_categories):
            out[np.isin(ids, np.array(cats, dtype=np.int64))] = b
        return out
    return np.searchsorted(np.asarray(node.cuts), values, side="left")


def predict_row(node: TreeNode, row: np.ndarray) -> float:
    """Route one feature vector to its leaf mean."""
    while isinstance(node, Internal):
        branch = int(_branch_of_values(node, row[node.feature_index : node.feature_index + 1])[0])
        node = node.children[branch]
    return node.mean_s


def predict_rows(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Route a feature matrix through the tree; one prediction per row."""
    out = np.empty(X.shape[0], dtype=np.float64)
    _route(node, X, np.arange(X.shape[0]), out)
    return out


def _route(node: TreeNode, X: np.ndarray, indices: np.ndarray, out: np.ndarray) -> None:
    if indices.size == 0:
        return
    if isinstance(node, Leaf):
        out[indices] = node.mean_s
        return
    branch = _branch_of_values(node, X[indices, node.feature_index])
    for b, child in enumerate(node.children):
        _route(child, X, indices[branch == b], out)


def tree_accuracy(
    node: TreeNode, X_oob: np.ndarray, y_oob: np.ndarray, epsilon: float
) -> float:
    """Share of out-of-bag rows predicted within the relative error band.

    A prediction counts as correct when |pred - y| <= epsilon * max(y, 1s);
    the floor keeps near-zero targets from demanding impossible precision.
    An empty out-of-bag set yields the neutral weight 0.5.
    """
    if y_oob.size == 0:
        return 0.5
    predictions = predict_rows(node, X_oob)
    band = epsilon * np.maximum(y_oob, 1.0)
    return float(np.mean(np.abs(predictions - y_oob) <= band))

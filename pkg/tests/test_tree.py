"""Leaf denoising, multi-branch extension and tree growth/routing."""
from __future__ import annotations

import statistics

import numpy as np
import pytest

from hqrec.forest.model import TrainConfig
from hqrec.forest.splitting import best_split, quantile_edges
from hqrec.forest.tree import (
    Internal,
    Leaf,
    denoise_leaf,
    extend_multibranch,
    leaf_value,
    predict_row,
    predict_rows,
    train_tree,
    tree_accuracy,
)
from tests.conftest import make_schema


def hinge_oracle(values: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Independent fences: quartiles as medians of halves via statistics."""
    ordered = sorted(values.tolist())
    n = len(ordered)
    half = (n + 1) // 2
    q1 = statistics.median(ordered[:half])
    q3 = statistics.median(ordered[n - half:])
    iqr = q3 - q1
    il = q1 - 1.5 * iqr
    ol = q3 + 1.5 * iqr
    kept = np.array([v for v in values if il <= v <= ol])
    return il, ol, kept


class TestDenoiseLeaf:
    def test_obvious_outlier_dropped(self):
        values = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
        kept, il, ol = denoise_leaf(values)
        # Halves include the middle element: q1=2, q3=4, iqr=2.
        assert il == pytest.approx(-1.0)
        assert ol == pytest.approx(7.0)
        np.testing.assert_array_equal(kept, [1.0, 2.0, 3.0, 4.0])

    def test_matches_independent_oracle(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 80))
            values = np.round(rng.normal(300, 120, size=n), 2)
            if rng.random() < 0.5:
                values[rng.integers(0, n)] *= 10.0
            kept, il, ol = denoise_leaf(values)
            oil, ool, okept = hinge_oracle(values)
            assert il == pytest.approx(oil)
            assert ol == pytest.approx(ool)
            np.testing.assert_array_equal(kept, okept)

    def test_kept_preserves_input_order(self):
        values = np.array([5.0, 1.0, 400.0, 3.0, 2.0])
        kept, _, _ = denoise_leaf(values)
        np.testing.assert_array_equal(kept, [5.0, 1.0, 3.0, 2.0])

    def test_single_value_keeps_itself(self):
        kept, il, ol = denoise_leaf(np.array([7.0]))
        np.testing.assert_array_equal(kept, [7.0])
        assert il == ol == 7.0

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            denoise_leaf(np.array([]))

    def test_large_leaf_with_heavy_contamination(self, rng):
        clean = rng.normal(400, 30, size=2582)
        junk = rng.uniform(4000, 8000, size=418)
        values = np.concatenate([clean, junk])
        rng.shuffle(values)
        kept, _, ol = denoise_leaf(values)
        assert junk.min() > ol  # every junk value lies beyond the fence
        assert kept.size >= 2500


class TestLeafValue:
    def test_mean_of_kept(self, rng):
        values = rng.normal(100, 10, size=50)
        kept, _, _ = denoise_leaf(values)
        import math

        assert leaf_value(kept, values) == pytest.approx(
            math.fsum(kept.tolist()) / kept.size
        )

    def test_empty_kept_falls_back_to_median(self):
        values = np.array([1.0, 2.0, 1000.0])
        assert leaf_value(np.array([]), values) == 2.0


class TestExtendMultibranch:
    def test_three_regimes_make_three_branches(self):
        # Hours 0-7 slow, 8-15 fast, 16-23 slow: the two-fork SSE cut
        # lands between regimes and the twoing pass re-cuts one side.
        hours = np.repeat(np.arange(24.0), 4)
        y = np.where((hours >= 8) & (hours < 16), 100.0, 900.0)
        y = y + np.tile([0.0, 1.0, -1.0, 0.5], 24)
        X = hours.reshape(-1, 1)
        schema = make_schema(("numeric",))
        candidate = best_split(X, y, (0,), schema)
        edges = quantile_edges(y, 8)
        branches = extend_multibranch(X, y, candidate, edges, max_branches=8)
        uppers = [b.upper for b in branches]
        assert uppers == [7.5, 15.5, None]

    def test_branch_cap_respected(self, rng):
        x = rng.integers(0, 50, size=400).astype(float)
        y = x * 137.0 + rng.normal(0, 1, size=400)  # many distinct steps
        X = x.reshape(-1, 1)
        schema = make_schema(("numeric",))
        candidate = best_split(X, y, (0,), schema)
        edges = quantile_edges(y, 8)
        for cap in (2, 3, 8):
            branches = extend_multibranch(X, y, candidate, edges, max_branches=cap)
            assert 2 <= len(branches) <= cap

    def test_branches_tile_the_rows(self, rng):
        for _ in range(50):
            n = int(rng.integers(4, 60))
            X = rng.integers(0, 6, size=(n, 1)).astype(float)
            y = rng.normal(0, 100, size=n)
            kind = "categorical" if rng.random() < 0.5 else "numeric"
            schema = make_schema((kind,))
            candidate = best_split(X, y, (0,), schema)
            if candidate is None:
                continue
            branches = extend_multibranch(
                X, y, candidate, quantile_edges(y, 4), max_branches=8
            )
            cover = np.zeros(n, dtype=int)
            for b in branches:
                cover += b.selector.astype(int)
            np.testing.assert_array_equal(cover, np.ones(n, dtype=int))

    def test_numeric_uppers_ascend(self, rng):
        x = rng.choice([1.0, 2.0, 5.0, 6.0, 9.0, 12.0], size=200)
        y = x * 50 + rng.normal(0, 5, size=200)
        X = x.reshape(-1, 1)
        candidate = best_split(X, y, (0,), make_schema(("numeric",)))
        branches = extend_multibranch(X, y, candidate, quantile_edges(y, 8), 8)
        uppers = [b.upper for b in branches[:-1]]
        assert uppers == sorted(uppers)
        assert branches[-1].upper is None


def grow_config(**kwargs) -> TrainConfig:
    defaults = dict(k=1, min_leaf=2, max_depth=6, bins=4)
    defaults.update(kwargs)
    return TrainConfig(**defaults)


def walk(node, path=()):
    if isinstance(node, Leaf):
        yield node, path
    else:
        for child in node.children:
            yield from walk(child, path + (node.feature_index,))


class TestTrainTree:
    def test_small_node_becomes_leaf(self):
        X = np.arange(6.0).reshape(-1, 1)
        y = np.array([1.0, 2.0, 3.0, 100.0, 101.0, 102.0])
        root = train_tree(X, y, make_schema(("numeric",)), grow_config(min_leaf=4))
        assert isinstance(root, Leaf)

    def test_depth_limit(self, rng):
        X = rng.normal(0, 1, size=(300, 2))
        y = X[:, 0] * 100 + X[:, 1] * 50 + rng.normal(0, 1, 300)
        root = train_tree(X, y, make_schema(("numeric", "numeric")), grow_config(max_depth=1))
        assert isinstance(root, Internal)
        for child in root.children:
            assert isinstance(child, Leaf)

    def test_feature_used_once_per_path(self, rng):
        X = np.column_stack(
            [rng.integers(0, 4, 500), rng.normal(0, 1, 500), rng.integers(0, 9, 500)]
        ).astype(float)
        y = X[:, 0] * 200 + X[:, 1] * 100 + X[:, 2] * 40 + rng.normal(0, 1, 500)
        schema = make_schema(("categorical", "numeric", "numeric"))
        root = train_tree(X, y, schema, grow_config())
        for _, path in walk(root):
            assert len(path) == len(set(path))

    def test_batch_equals_single_row_routing(self, rng):
        X = np.column_stack([rng.integers(0, 5, 400), rng.normal(50, 10, 400)]).astype(float)
        y = X[:, 0] * 300 + X[:, 1] + rng.normal(0, 2, 400)
        schema = make_schema(("categorical", "numeric"))
        root = train_tree(X, y, schema, grow_config())
        Q = np.column_stack([rng.integers(-1, 7, 100), rng.normal(50, 20, 100)]).astype(float)
        batch = predict_rows(root, Q)
        singles = np.array([predict_row(root, q) for q in Q])
        np.testing.assert_array_equal(batch, singles)

    def test_unseen_category_routes_to_default_branch(self):
        X = np.repeat([[0.0], [1.0]], 5, axis=0)
        y = np.array([10.0] * 5 + [99.0] * 5)
        root = train_tree(X, y, make_schema(("categorical",)), grow_config(min_leaf=1))
        assert isinstance(root, Internal)
        expected = predict_row(root, np.array([float(root.default_branch and 1)]))
        # An id never seen in training routes to the default branch.
        got = predict_row(root, np.array([42.0]))
        default_leaf = root.children[root.default_branch]
        assert got == default_leaf.mean_s
        assert expected in (10.0, 99.0)

    def test_constant_target_is_single_leaf(self):
        X = np.arange(40.0).reshape(-1, 1)
        y = np.full(40, 7.0)
        root = train_tree(X, y, make_schema(("numeric",)), grow_config())
        assert isinstance(root, Leaf)
        assert root.mean_s == 7.0

    def test_denoise_false_records_min_max_and_keeps_all(self):
        X = np.ones((8, 1))
        y = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 1000.0])
        root = train_tree(X, y, make_schema(("numeric",)), grow_config(denoise=False))
        assert isinstance(root, Leaf)
        assert root.kept_count == 8
        assert root.removed_count == 0
        assert (root.il, root.ol) == (1.0, 1000.0)
        assert root.mean_s == pytest.approx(float(np.mean(y)))

    def test_denoised_leaf_ignores_the_outlier(self):
        X = np.ones((8, 1))
        y = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 1000.0])
        root = train_tree(X, y, make_schema(("numeric",)), grow_config())
        assert root.removed_count == 1
        assert root.mean_s == pytest.approx(4.0)


class TestTreeAccuracy:
    def test_counting_oracle(self, rng):
        X = rng.normal(0, 1, size=(200, 1))
        y = np.abs(X[:, 0]) * 100 + 50
        root = train_tree(X, y, make_schema(("numeric",)), grow_config())
        eps = 0.3
        predictions = predict_rows(root, X)
        expected = np.mean(
            np.abs(predictions - y) <= eps * np.maximum(y, 1.0)
        )
        assert tree_accuracy(root, X, y, eps) == pytest.approx(float(expected))

    def test_empty_oob_is_neutral(self):
        root = Leaf(mean_s=1.0, kept_count=1, removed_count=0, il=0.0, ol=1.0)
        assert tree_accuracy(root, np.empty((0, 1)), np.array([]), 0.2) == 0.5

    def test_near_zero_targets_use_one_second_floor(self):
        root = Leaf(mean_s=0.5, kept_count=1, removed_count=0, il=0.0, ol=1.0)
        X = np.zeros((1, 1))
        # |0.5 - 0.4| = 0.1 <= 0.2 * max(0.4, 1) = 0.2 -> correct.
        assert tree_accuracy(root, X, np.array([0.4]), 0.2) == 1.0
        # Without the floor the band would be 0.08 and this would fail.
        assert tree_accuracy(root, X, np.array([0.2]), 0.2) == 0.0

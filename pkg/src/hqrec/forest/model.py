"""Forest training, weighted voting and canonical model files.

Every tree trains on its own bootstrap draw and is weighted by its
accuracy on the rows that draw missed.  Model files are canonical JSON
(sorted keys, fixed separators) with an embedded SHA-256 checksum, so
identical inputs produce byte-identical files and corruption is caught
before a model serves predictions.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from hqrec.forest.splitting import KIND_CATEGORICAL, round_indices
from hqrec.forest.tree import (
    Internal,
    Leaf,
    TreeNode,
    predict_row,
    predict_rows,
    train_tree,
    tree_accuracy,
)
from hqrec.records import Dataset, FeatureSchema

FORMAT_VERSION = 1
WEIGHTING_MODES = ("normalized", "literal")


class ConfigError(ValueError):
    """Raised for unusable training configuration."""


class SchemaError(ValueError):
    """Raised when a feature vector does not match the model schema."""


class ModelFormatError(ValueError):
    """Raised for unreadable or corrupted model files."""


@dataclass(frozen=True)
class TrainConfig:
    """Training knobs; denoise/weighting exist so ablations stay honest.

    weighting_mode picks how tree weights enter the vote: "normalized"
    divides by the weight total, "literal" divides by the tree count and
    therefore shrinks predictions when weights sit below 1.
    """

    k: int = 100
    min_leaf: int = 50
    max_depth: int = 16
    bins: int = 8
    accuracy_epsilon: float = 0.20
    weighting_mode: str = "normalized"
    max_branches: int = 8
    seed: int = 0
    denoise: bool = True
    weighting: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be at least 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be at least 1")
        if self.bins < 2:
            raise ConfigError("bins must be at least 2")
        if not 0.0 < self.accuracy_epsilon:
            raise ConfigError("accuracy_epsilon must be positive")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ConfigError(f"weighting_mode must be one of {WEIGHTING_MODES}")
        if self.max_branches < 2:
            raise ConfigError("max_branches must be at least 2")


@dataclass
class ForestModel:
    config: TrainConfig
    schema: FeatureSchema
    trees: list[tuple[TreeNode, float]]
    target: str = "duration_s"
    task: str = ""


def train_forest(data: Dataset, config: TrainConfig, workers: int = 1) -> ForestModel:
    """Train config.k trees; results are identical for any worker count."""
    if data.n < 1:
        raise ConfigError("training data is empty")

    def one_round(round_index: int) -> tuple[TreeNode, float]:
        train_idx, oob_idx = round_indices(data.n, config.seed, round_index)
        root = train_tree(data.X[train_idx], data.y[train_idx], data.schema, config)
        if not config.weighting:
            return root, 1.0
        weight = tree_accuracy(
            root, data.X[oob_idx], data.y[oob_idx], config.accuracy_epsilon
        )
        return root, weight

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(one_round, range(config.k)))
    else:
        trees = [one_round(i) for i in range(config.k)]
    return ForestModel(config=config, schema=data.schema, trees=trees)


def _check_vector(model: ForestModel, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(model.schema.features),):
        raise SchemaError(
            f"expected {len(model.schema.features)} features, got shape {values.shape}"
        )
    return values


def _vote(model: ForestModel, per_tree: np.ndarray) -> np.ndarray:
    """Combine per-tree predictions (trees on axis 0) into final values."""
    weights = np.array([w for _, w in model.trees])
    weighted = weights[:, None] * per_tree
    if model.config.weighting_mode == "literal":
        return weighted.sum(axis=0) / len(model.trees)
    total = float(weights.sum())
    if total == 0.0:
        return per_tree.mean(axis=0)
    return weighted.sum(axis=0) / total


def predict(model: ForestModel, values: np.ndarray) -> float:
    """Weighted-vote prediction for one feature vector."""
    values = _check_vector(model, values)
    per_tree = np.array([[predict_row(root, values)] for root, _ in model.trees])
    return float(_vote(model, per_tree)[0])


def predict_batch(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Weighted-vote predictions for a feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.schema.features):
        raise SchemaError(
            f"expected (n, {len(model.schema.features)}) matrix, got shape {X.shape}"
        )
    per_tree = np.stack([predict_rows(root, X) for root, _ in model.trees])
    return _vote(model, per_tree)


def _node_to_json(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {
            "leaf": {
                "mean_s": node.mean_s,
                "kept": node.kept_count,
                "removed": node.removed_count,
                "il": node.il,
                "ol": node.ol,
            }
        }
    payload: dict = {
        "feature": node.feature_index,
        "kind": node.kind,
        "default": node.default_branch,
        "children": [_node_to_json(child) for child in node.children],
    }
    if node.kind == KIND_CATEGORICAL:
        payload["groups"] = [list(group) for group in node.branch_categories]
    else:
        payload["cuts"] = list(node.cuts)
    return {"split": payload}


def _node_from_json(payload: dict) -> TreeNode:
    if "leaf" in payload:
        leaf = payload["leaf"]
        return Leaf(
            mean_s=float(leaf["mean_s"]),
            kept_count=int(leaf["kept"]),
            removed_count=int(leaf["removed"]),
            il=float(leaf["il"]),
            ol=float(leaf["ol"]),
        )
    split = payload["split"]
    kind = split["kind"]
    return Internal(
        feature_index=int(split["feature"]),
        kind=kind,
        cuts=tuple(float(c) for c in split.get("cuts", ())),
        branch_categories=(
            tuple(tuple(int(c) for c in group) for group in split["groups"])
            if kind == KIND_CATEGORICAL
            else None
        ),
        default_branch=int(split["default"]),
        children=[_node_from_json(child) for child in split["children"]],
    )


def _payload(model: ForestModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "target": model.target,
        "task": model.task,
        "config": asdict(model.config),
        "schema": model.schema.to_json(),
        "trees": [
            {"weight": weight, "root": _node_to_json(root)}
            for root, weight in model.trees
        ],
    }


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def model_bytes(model: ForestModel) -> bytes:
    """Canonical file bytes: payload plus checksum over that payload."""
    payload = _payload(model)
    digest = hashlib.sha256(_canonical(payload)).hexdigest()
    payload["checksum"] = f"sha256:{digest}"
    return _canonical(payload) + b"\n"


def save_model(model: ForestModel, path: str | Path) -> None:
    Path(path).write_bytes(model_bytes(model))


def load_model(path: str | Path, verify: bool = True) -> ForestModel:
    """Load a model file, verifying its checksum unless told not to."""
    try:
        payload = json.loads(Path(path).read_bytes())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from None
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported model format")
    stored = payload.pop("checksum", None)
    if verify:
        digest = f"sha256:{hashlib.sha256(_canonical(payload)).hexdigest()}"
        if stored != digest:
            raise ModelFormatError(f"{path}: checksum mismatch, file corrupted")
    config = TrainConfig(**payload["config"])
    schema = FeatureSchema.from_json(payload["schema"])
    trees = [
        (_node_from_json(entry["root"]), float(entry["weight"]))
        for entry in payload["trees"]
    ]
    return ForestModel(
        config=config,
        schema=schema,
        trees=trees,
        target=payload["target"],
        task=payload.get("task", ""),
    )

"""Regression forest with multi-branch trees, leaf denoising and
out-of-bag accuracy weighting."""
from hqrec.forest.splitting import (
    SplitCandidate,
    TwoingScore,
    best_split,
    best_twoing_cut,
    bootstrap_split,
    class_histogram,
    quantile_edges,
    split_partition,
    twoing_score,
)
from hqrec.forest.tree import (
    Internal,
    Leaf,
    TreeNode,
    denoise_leaf,
    extend_multibranch,
    leaf_value,
    predict_row,
    predict_rows,
    train_tree,
    tree_accuracy,
)
from hqrec.forest.model import (
    ConfigError,
    ForestModel,
    SchemaError,
    TrainConfig,
    load_model,
    model_bytes,
    predict,
    predict_batch,
    save_model,
    train_forest,
)

__all__ = [
    "SplitCandidate",
    "TwoingScore",
    "best_split",
    "best_twoing_cut",
    "bootstrap_split",
    "class_histogram",
    "quantile_edges",
    "split_partition",
    "twoing_score",
    "Internal",
    "Leaf",
    "TreeNode",
    "denoise_leaf",
    "extend_multibranch",
    "leaf_value",
    "predict_row",
    "predict_rows",
    "train_tree",
    "tree_accuracy",
    "ConfigError",
    "ForestModel",
    "SchemaError",
    "TrainConfig",
    "load_model",
    "model_bytes",
    "predict",
    "predict_batch",
    "save_model",
    "train_forest",
]

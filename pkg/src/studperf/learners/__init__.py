from .forest import Forest, train_forest
from .metrics import METRICS, Metrics, MetricsReport, compute_metrics, confusion_matrix
from .models import (DEFAULT_GRIDS, MajorityModel, ModelSpec, feature_importance, load_model,
                     save_model)
from .svm import LinearMarginModel, NotStandardizedError, svm_objective, train_svm
from .tree import ColumnMismatchError, DecisionTree, gini, predict_tree, train_tree
from .validation import (CVSpec, FoldError, GridResult, cross_validate, derive_seed, expand_grid,
                         fit_and_score, grid_search, stratified_kfold, stratified_split)

__all__ = [
    "CVSpec", "ColumnMismatchError", "DEFAULT_GRIDS", "DecisionTree", "FoldError", "Forest", "GridResult",
    "LinearMarginModel", "METRICS", "MajorityModel", "Metrics", "MetricsReport", "ModelSpec",
    "NotStandardizedError", "compute_metrics", "confusion_matrix", "cross_validate",
    "derive_seed", "expand_grid", "feature_importance", "fit_and_score", "gini", "grid_search",
    "load_model", "predict_tree", "save_model", "stratified_kfold", "stratified_split",
    "svm_objective", "train_forest", "train_svm", "train_tree",
]

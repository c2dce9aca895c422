from .corpus import Corpus, load_text_corpus, synthetic_corpus
from .metrics import (
    ClassMetrics,
    ConfusionMatrix,
    MetricsReport,
    binarize,
    confusion,
    indicator_labels,
    metrics,
    metrics_from_indicators,
    score_predictions,
)
from .reports import detect_overfitting, plot_statistics, read_json, write_csv, write_json
from .validation import (
    CrossValidationResult,
    aggregate,
    monte_carlo_cv,
    n_fold_cv,
    split_validation,
    stratified_folds,
    validation_size,
)

__all__ = [
    "Corpus",
    "load_text_corpus",
    "synthetic_corpus",
    "ClassMetrics",
    "ConfusionMatrix",
    "MetricsReport",
    "binarize",
    "confusion",
    "indicator_labels",
    "metrics",
    "metrics_from_indicators",
    "score_predictions",
    "detect_overfitting",
    "plot_statistics",
    "read_json",
    "write_csv",
    "write_json",
    "CrossValidationResult",
    "aggregate",
    "monte_carlo_cv",
    "n_fold_cv",
    "split_validation",
    "stratified_folds",
    "validation_size",
]

"""BLE RSSI occupancy detection and counting."""

import json as _json

from ._bleocc import (
    Dataset,
    Error,
    classification_metrics,
    default_grid,
    featurize,
    fit_predict,
    fit_scaler,
    freq_feature_names,
    freq_features,
    load_dataset,
    parse_dataset,
    raw_matrix,
    regression_metrics,
    robust_scale,
    simulate,
    time_feature_names,
    time_features,
    version,
)
from ._bleocc import evaluate as _evaluate

__version__ = version()


def evaluate(dataset, task, representation="features", models=(), k=5, seed=0, jobs=1, select=True):
    """Run the full pipeline and return the report as a dict."""
    return _json.loads(_evaluate(dataset, task, representation, list(models), k, seed, jobs, select))


__all__ = [
    "Dataset",
    "Error",
    "classification_metrics",
    "default_grid",
    "evaluate",
    "featurize",
    "fit_predict",
    "fit_scaler",
    "freq_feature_names",
    "freq_features",
    "load_dataset",
    "parse_dataset",
    "raw_matrix",
    "regression_metrics",
    "robust_scale",
    "simulate",
    "time_feature_names",
    "time_features",
    "version",
]

"""Evaluation suite: marginal, column-pair, joint and utility metrics."""

from .association import (
    association_matrix,
    associations_difference,
    correlation_ratio,
    cramers_v,
    pearson_correlation,
)
from .histograms import (
    NUMERICAL_BIN_SIZES,
    GridHistogram,
    MetricError,
    categorical_histogram,
    column_correlation,
    column_correlation_info,
    histogram_intersection,
    jensen_shannon_distance,
    numerical_histogram,
    wasserstein_1d,
)
from .joint import SAMPLE_CAP, distance_to_closest_record, likelihood_approximation
from .predictors import (
    FeatureMap,
    f1_score,
    feature_map,
    fit_logreg,
    fit_mlp,
    fit_tree,
    r2_normalized,
)
from .report import (
    CSV_COLUMNS,
    METRIC_NAMES,
    REPRESENTATIVE_METRICS,
    MetricReport,
    csv_header,
    csv_line,
    evaluate,
)
from .utility import UtilityScore, dimension_wise_prediction, ml_efficacy, positive_code

__all__ = [
    "NUMERICAL_BIN_SIZES",
    "SAMPLE_CAP",
    "CSV_COLUMNS",
    "METRIC_NAMES",
    "REPRESENTATIVE_METRICS",
    "GridHistogram",
    "MetricError",
    "MetricReport",
    "FeatureMap",
    "UtilityScore",
    "association_matrix",
    "associations_difference",
    "categorical_histogram",
    "column_correlation",
    "column_correlation_info",
    "correlation_ratio",
    "cramers_v",
    "csv_header",
    "csv_line",
    "dimension_wise_prediction",
    "distance_to_closest_record",
    "evaluate",
    "f1_score",
    "feature_map",
    "fit_logreg",
    "fit_mlp",
    "fit_tree",
    "histogram_intersection",
    "jensen_shannon_distance",
    "likelihood_approximation",
    "ml_efficacy",
    "numerical_histogram",
    "pearson_correlation",
    "positive_code",
    "r2_normalized",
    "wasserstein_1d",
]

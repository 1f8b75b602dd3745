"""Nine-metric evaluation of a synthetic table against held-out real data.

Marginal and column-pair metrics compare the synthetic sample to the real
test split; numerical bin bounds come from the pooled real data. Utility
models train on the synthetic sample and are scored on the test split.
A reference report swaps the real training split in as "synthetic".
"""

import json
from dataclasses import dataclass

import numpy as np

from ..data import Table
from .association import associations_difference
from .histograms import (
    NUMERICAL_BIN_SIZES,
    MetricError,
    categorical_histogram,
    column_correlation_info,
    histogram_intersection,
    jensen_shannon_distance,
    numerical_histogram,
    wasserstein_1d,
)
from .joint import SAMPLE_CAP, distance_to_closest_record, likelihood_approximation
from .utility import dimension_wise_prediction, ml_efficacy

MARGINAL_METRICS = (
    "histogram_intersection",
    "jensen_shannon_distance",
    "wasserstein_1d",
    "column_correlation",
)

METRIC_NAMES = MARGINAL_METRICS + (
    "associations_difference",
    "distance_to_closest_record",
    "likelihood_approximation",
    "ml_efficacy",
    "dimension_wise_prediction",
)

# One headline metric per evaluation dimension.
REPRESENTATIVE_METRICS = (
    "histogram_intersection",
    "associations_difference",
    "distance_to_closest_record",
    "ml_efficacy",
)

METADATA_FIELDS = ("dataset", "subset_size", "variant", "seed", "trial")

CSV_COLUMNS = METADATA_FIELDS + METRIC_NAMES


@dataclass(frozen=True)
class MetricReport:
    """All nine scores plus the per-column/per-model values behind them."""

    metadata: dict
    scores: dict
    breakdowns: dict

    def __post_init__(self):
        missing = [m for m in METRIC_NAMES if m not in self.scores]
        if missing:
            raise MetricError(f"report is missing scores: {missing}")
        for name, value in self.scores.items():
            if not np.isfinite(value):
                raise MetricError(f"non-finite score for {name!r}")

    def to_json(self) -> str:
        payload = {
            "metadata": self.metadata,
            "scores": self.scores,
            "breakdowns": self.breakdowns,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        payload = json.loads(text)
        return cls(payload["metadata"], payload["scores"], payload["breakdowns"])

    def csv_row(self) -> dict:
        row = {name: self.metadata.get(name, "") for name in METADATA_FIELDS}
        for name in METRIC_NAMES:
            row[name] = self.scores[name]
        return row


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def csv_line(report: MetricReport) -> str:
    row = report.csv_row()
    return ",".join(str(row[name]) for name in CSV_COLUMNS)


def _marginal_scores(real_train, real_test, synth):
    schema = synth.schema
    per_metric = {m: {} for m in MARGINAL_METRICS}
    by_bins = {m: {} for m in MARGINAL_METRICS}
    fallbacks = []
    pair_metrics = {
        "histogram_intersection": histogram_intersection,
        "jensen_shannon_distance": jensen_shannon_distance,
        "wasserstein_1d": wasserstein_1d,
    }
    for name in schema.names:
        col = schema.column(name)
        if col.is_categorical:
            p = categorical_histogram(real_test.categorical_codes(name), col.cardinality)
            q = categorical_histogram(synth.categorical_codes(name), col.cardinality)
            for metric, fn in pair_metrics.items():
                per_metric[metric][name] = fn(p, q)
            corr, fell_back = column_correlation_info(p, q)
            per_metric["column_correlation"][name] = corr
            if fell_back:
                fallbacks.append(name)
            continue
        # pooled real bounds so train, test and synthetic share one grid
        pooled = np.concatenate(
            [real_train.numerical_column(name), real_test.numerical_column(name)]
        )
        lo, hi = float(pooled.min()), float(pooled.max())
        sub = {m: {} for m in MARGINAL_METRICS}
        fell_back_any = False
        for bins in NUMERICAL_BIN_SIZES:
            p = numerical_histogram(real_test.numerical_column(name), bins, lo, hi)
            q = numerical_histogram(synth.numerical_column(name), bins, lo, hi)
            for metric, fn in pair_metrics.items():
                sub[metric][str(bins)] = fn(p, q)
            corr, fell_back = column_correlation_info(p, q)
            sub["column_correlation"][str(bins)] = corr
            fell_back_any = fell_back_any or fell_back
        for metric in MARGINAL_METRICS:
            per_metric[metric][name] = float(np.mean(list(sub[metric].values())))
            by_bins[metric][name] = sub[metric]
        if fell_back_any:
            fallbacks.append(name)
    return per_metric, by_bins, fallbacks


def evaluate(
    real_train: Table,
    real_test: Table,
    synth: Table,
    k: int = 1,
    seed: int = 0,
    sample_cap: int = SAMPLE_CAP,
    metadata: dict | None = None,
) -> MetricReport:
    """Score `synth` on all nine metrics; `seed` fixes subsampling and MLP init."""
    schema = real_train.schema
    if schema != real_test.schema or schema != synth.schema:
        raise MetricError("evaluation needs a shared schema")
    if min(real_train.n_rows, real_test.n_rows, synth.n_rows) == 0:
        raise MetricError("evaluation needs non-empty tables")

    per_metric, by_bins, fallbacks = _marginal_scores(real_train, real_test, synth)
    scores = {}
    breakdowns = {}
    for metric in MARGINAL_METRICS:
        by_column = per_metric[metric]
        scores[metric] = float(np.mean(list(by_column.values())))
        breakdowns[metric] = {"by_column": by_column, "by_bins": by_bins[metric]}
    breakdowns["column_correlation"]["fallback_columns"] = fallbacks

    scores["associations_difference"] = associations_difference(real_test, synth)
    breakdowns["associations_difference"] = {}

    scores["distance_to_closest_record"] = distance_to_closest_record(
        synth, real_test, sample_cap=sample_cap, k=k, rng=np.random.default_rng(seed)
    )
    breakdowns["distance_to_closest_record"] = {"k": k, "sample_cap": sample_cap}
    scores["likelihood_approximation"] = likelihood_approximation(
        real_test, synth, sample_cap=sample_cap, rng=np.random.default_rng(seed)
    )
    breakdowns["likelihood_approximation"] = {"sample_cap": sample_cap}

    efficacy = ml_efficacy(synth, real_test, seed=seed)
    scores["ml_efficacy"] = efficacy.score
    breakdowns["ml_efficacy"] = {
        "by_model": efficacy.breakdown,
        "degenerate": efficacy.degenerate,
    }
    dwp = dimension_wise_prediction(synth, real_test, seed=seed)
    scores["dimension_wise_prediction"] = dwp.score
    breakdowns["dimension_wise_prediction"] = {
        "by_column": dwp.breakdown,
        "degenerate": dwp.degenerate,
    }

    return MetricReport(dict(metadata or {}), scores, breakdowns)

"""Utility metrics: downstream models trained on synthetic data, scored on real."""

from dataclasses import dataclass

import numpy as np

from ..data import Schema, Table
from .histograms import MetricError
from .predictors import (
    CLASSIFICATION,
    REGRESSION,
    f1_score,
    feature_map,
    fit_logreg,
    fit_mlp,
    fit_tree,
    r2_normalized,
)

MODEL_KINDS = ("linear", "tree", "mlp")


@dataclass(frozen=True)
class UtilityScore:
    """Mean score plus the per-model or per-column values behind it."""

    score: float
    breakdown: dict[str, float]
    degenerate: bool = False


def positive_code(schema: Schema, target: str) -> int | None:
    """Positive-class code for binary F1, or None for macro averaging.

    The schema-designated label applies to the declared target; any other
    binary column defaults to its last category."""
    col = schema.column(target)
    if not col.is_categorical or col.cardinality != 2:
        return None
    if target == schema.target and schema.positive_label is not None:
        return col.categories.index(schema.positive_label)
    return col.cardinality - 1


def _column_task(schema: Schema, target: str) -> str:
    return CLASSIFICATION if schema.column(target).is_categorical else REGRESSION


def ml_efficacy(
    synth_train: Table,
    real_test: Table,
    target: str | None = None,
    seed: int = 0,
) -> UtilityScore:
    """Train linear/tree/MLP models on `synth_train`, score on `real_test`.

    Classification targets are scored with F1, numerical targets with the
    normalized coefficient of determination; the metric is the mean over
    the three models."""
    schema = synth_train.schema
    if schema != real_test.schema:
        raise MetricError("utility metrics need a shared schema")
    if target is None:
        target = schema.target
    if target is None:
        raise MetricError("ml_efficacy needs a target column")
    if synth_train.n_rows == 0 or real_test.n_rows == 0:
        raise MetricError("utility metrics need non-empty tables")

    task = _column_task(schema, target)
    fm = feature_map(synth_train, target, task)
    x_train = fm.apply(synth_train)
    x_test = fm.apply(real_test)
    y_train = synth_train.column_values(target)
    y_test = real_test.column_values(target)

    if task == CLASSIFICATION:
        n_classes = schema.column(target).cardinality
        pos = positive_code(schema, target)
    else:
        n_classes = None

    models = {
        "linear": fit_logreg(x_train, y_train, task, n_classes=n_classes),
        "tree": fit_tree(x_train, y_train, task, n_classes=n_classes),
        "mlp": fit_mlp(x_train, y_train, task, n_classes=n_classes, seed=seed),
    }
    breakdown = {}
    for kind in MODEL_KINDS:
        pred = models[kind].predict(x_test)
        if task == CLASSIFICATION:
            breakdown[kind] = f1_score(pred, y_test, positive=pos)
        else:
            breakdown[kind] = r2_normalized(pred, y_test)
    degenerate = any(m.degenerate for m in models.values())
    return UtilityScore(float(np.mean(list(breakdown.values()))), breakdown, degenerate)


def dimension_wise_prediction(
    synth_train: Table,
    real_test: Table,
    seed: int = 0,
) -> UtilityScore:
    """Run the efficacy protocol once per column as target; mean over columns."""
    schema = synth_train.schema
    if schema != real_test.schema:
        raise MetricError("utility metrics need a shared schema")
    breakdown = {}
    degenerate = False
    for name in schema.names:
        cell = ml_efficacy(synth_train, real_test, target=name, seed=seed)
        breakdown[name] = cell.score
        degenerate = degenerate or cell.degenerate
    if not breakdown:
        raise MetricError("schema has no columns")
    return UtilityScore(float(np.mean(list(breakdown.values()))), breakdown, degenerate)

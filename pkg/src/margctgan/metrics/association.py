"""Column-pair fidelity: mixed-type association matrices (Pearson r,
Cramér's V, correlation ratio) and their mean absolute difference."""

from __future__ import annotations

import numpy as np

from ..data import Table
from .histograms import MetricError


def pearson_correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Signed Pearson r; 0 when either side has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.std() == 0.0 or y.std() == 0.0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def cramers_v(a: np.ndarray, b: np.ndarray) -> float:
    """sqrt(chi^2 / (n * (min(r, c) - 1))) over the observed contingency
    table, without bias correction; 0 when either side is constant."""
    a = np.asarray(a, dtype=np.int64).ravel()
    b = np.asarray(b, dtype=np.int64).ravel()
    if a.size != b.size or a.size == 0:
        raise MetricError("cramers_v needs two equal-length non-empty columns")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    r = ai.max() + 1
    c = bi.max() + 1
    if min(r, c) < 2:
        return 0.0
    n = a.size
    table = np.zeros((r, c))
    np.add.at(table, (ai, bi), 1.0)
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    with np.errstate(invalid="ignore", divide="ignore"):
        cells = np.where(expected > 0, (table - expected) ** 2 / expected, 0.0)
    chi2 = cells.sum()
    return float(np.sqrt(chi2 / (n * (min(r, c) - 1))))


def correlation_ratio(codes: np.ndarray, values: np.ndarray) -> float:
    """eta = sqrt(between-category SS / total SS); 0 when total SS is 0."""
    codes = np.asarray(codes, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=np.float64).ravel()
    if codes.size != values.size or codes.size == 0:
        raise MetricError("correlation_ratio needs two equal-length non-empty columns")
    grand = values.mean()
    total_ss = float(((values - grand) ** 2).sum())
    if total_ss == 0.0:
        return 0.0
    between = 0.0
    for k in np.unique(codes):
        group = values[codes == k]
        between += group.size * (group.mean() - grand) ** 2
    return float(np.sqrt(between / total_ss))


def association_matrix(table: Table) -> np.ndarray:
    """Square matrix over schema column order: Pearson r for num-num,
    Cramér's V for cat-cat, correlation ratio for mixed pairs."""
    schema = table.schema
    names = schema.names
    d = len(names)
    out = np.zeros((d, d))

    def col(n):
        if schema.column(n).is_categorical:
            return table.categorical_codes(n)
        return table.numerical_column(n)

    for i in range(d):
        for j in range(i, d):
            a_cat = schema.column(names[i]).is_categorical
            b_cat = schema.column(names[j]).is_categorical
            if not a_cat and not b_cat:
                v = pearson_correlation(col(names[i]), col(names[j]))
            elif a_cat and b_cat:
                v = cramers_v(col(names[i]), col(names[j]))
            elif a_cat:
                v = correlation_ratio(col(names[i]), col(names[j]))
            else:
                v = correlation_ratio(col(names[j]), col(names[i]))
            out[i, j] = v
            out[j, i] = v
    return out


def associations_difference(real: Table, synth: Table) -> float:
    """Mean absolute entrywise gap between the two association matrices."""
    if real.schema != synth.schema:
        raise MetricError("tables must share a schema")
    return float(np.abs(association_matrix(real) - association_matrix(synth)).mean())

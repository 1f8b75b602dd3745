"""Joint-fidelity metrics: nearest-neighbor distances between synthetic
rows and a capped random sample of real test rows, in min-max / one-hot
encoded space."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..data import Table
from ..transform import minmax_fit
from .histograms import MetricError

SAMPLE_CAP = 5000


def _nn_encode(table: Table, mms: dict) -> np.ndarray:
    """Min-max scaled numericals followed by one-hot categoricals."""
    schema = table.schema
    parts = []
    for name in schema.numerical_names:
        parts.append(mms[name].apply(table.numerical_column(name))[:, None])
    for name in schema.categorical_names:
        card = schema.column(name).cardinality
        codes = table.categorical_codes(name)
        onehot = np.zeros((table.n_rows, card))
        onehot[np.arange(table.n_rows), codes] = 1.0
        parts.append(onehot)
    if not parts:
        return np.zeros((table.n_rows, 0))
    return np.concatenate(parts, axis=1)


def _prepare(synth: Table, test: Table, sample_cap: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Encode both tables (min-max fitted on the test side) and subsample
    the test rows down to the cap."""
    if synth.schema != test.schema:
        raise MetricError("tables must share a schema")
    if synth.n_rows == 0 or test.n_rows == 0:
        raise MetricError("nearest-neighbor metrics need non-empty tables")
    mms = {
        name: minmax_fit(test.numerical_column(name))
        for name in test.schema.numerical_names
    }
    if test.n_rows > sample_cap:
        rows = rng.choice(test.n_rows, size=sample_cap, replace=False)
        test = test.take(np.sort(rows))
    return _nn_encode(synth, mms), _nn_encode(test, mms)


def distance_to_closest_record(
    synth: Table,
    test: Table,
    sample_cap: int = SAMPLE_CAP,
    k: int = 1,
    rng: np.random.Generator | None = None,
) -> float:
    """Mean Euclidean distance from each synthetic row to its k-th nearest
    row among up to `sample_cap` sampled test rows. Low values mean the
    synthetic data sits close to (possibly memorizes) real records."""
    if rng is None:
        rng = np.random.default_rng(0)
    if k < 1:
        raise MetricError("k must be >= 1")
    synth_enc, test_enc = _prepare(synth, test, sample_cap, rng)
    if k > test_enc.shape[0]:
        raise MetricError("k exceeds the number of sampled test rows")
    dists, _ = cKDTree(test_enc).query(synth_enc, k=k)
    if k > 1:
        dists = dists[:, k - 1]
    return float(dists.mean())


def likelihood_approximation(
    test: Table,
    synth: Table,
    sample_cap: int = SAMPLE_CAP,
    rng: np.random.Generator | None = None,
) -> float:
    """Mean distance from each of up to `sample_cap` sampled test rows to
    its nearest synthetic row; a nearest-neighbor likelihood proxy."""
    if rng is None:
        rng = np.random.default_rng(0)
    synth_enc, test_enc = _prepare(synth, test, sample_cap, rng)
    dists, _ = cKDTree(synth_enc).query(test_enc, k=1)
    return float(dists.mean())

"""Reversible row encoding: per-column Gaussian mixtures for numericals
(mode-specific normalization) and one-hot spans for categoricals, plus the
min-max / label encodings used by the evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, NUMERICAL, Schema, Table

STD_FLOOR = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


class TransformError(ValueError):
    """Encoding/decoding contract violation."""


# ---------------------------------------------------------------------------
# 1-D Gaussian mixtures

@dataclass(frozen=True)
class GmmModel:
    """Fitted 1-D mixture; components below the weight floor are inactive."""

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    active: np.ndarray
    degenerate: bool = False
    loglik_trace: np.ndarray | None = None

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)


def _log_normal_pdf(values: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    # (n, K) log densities
    z = (values[:, None] - means[None, :]) / stds[None, :]
    return -0.5 * z * z - np.log(stds)[None, :] - 0.5 * LOG_2PI


def _kmeanspp_centers(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [values[rng.integers(len(values))]]
    for _ in range(k - 1):
        d2 = np.min((values[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(centers[-1])
            continue
        centers.append(values[rng.choice(len(values), p=d2 / total)])
    return np.asarray(centers, dtype=np.float64)


def _em_fit(values, k, rng, max_iter=100, tol=1e-6):
    """Plain EM for a k-component 1-D mixture; returns params + loglik trace.

    The trace is kept monotone: if a floored M-step ever lowers the
    likelihood the previous parameters are restored and iteration stops.
    """
    n = len(values)
    means = _kmeanspp_centers(values, k, rng)
    global_std = max(float(values.std()), STD_FLOOR)
    stds = np.full(k, global_std)
    weights = np.full(k, 1.0 / k)

    trace = []
    prev = (weights, means, stds)
    prev_ll = -np.inf
    for _ in range(max_iter):
        log_joint = _log_normal_pdf(values, means, stds) + np.log(weights)[None, :]
        row_max = log_joint.max(axis=1, keepdims=True)
        log_norm = row_max[:, 0] + np.log(np.exp(log_joint - row_max).sum(axis=1))
        ll = float(log_norm.sum())
        if ll < prev_ll - 1e-10:
            weights, means, stds = prev
            break
        trace.append(ll)
        if ll - prev_ll < tol * (1.0 + abs(ll)) and np.isfinite(prev_ll):
            break
        prev = (weights, means, stds)
        prev_ll = ll

        resp = np.exp(log_joint - log_norm[:, None])
        nk = resp.sum(axis=0)
        safe_nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp * values[:, None]).sum(axis=0) / safe_nk
        var = (resp * (values[:, None] - means[None, :]) ** 2).sum(axis=0) / safe_nk
        stds = np.maximum(np.sqrt(var), STD_FLOOR)

    return weights, means, stds, np.asarray(trace)


def fit_gmm(
    values: np.ndarray,
    max_modes: int = 10,
    weight_floor: float = 0.005,
    rng: np.random.Generator | None = None,
) -> GmmModel:
    """Fit a 1-D mixture with the component count chosen by BIC.

    Components with final weight below `weight_floor` are deactivated.
    A constant column falls back to a single degenerate mode (std floored).
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise TransformError("cannot fit a mixture on an empty column")
    if max_modes < 1:
        raise TransformError("max_modes must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)

    n_distinct = len(np.unique(values))
    if n_distinct < 2:
        return GmmModel(
            weights=np.array([1.0]),
            means=np.array([float(values[0])]),
            stds=np.array([STD_FLOOR]),
            active=np.array([True]),
            degenerate=True,
            loglik_trace=np.empty(0),
        )

    n = len(values)
    best = None
    best_bic = np.inf
    for k in range(1, min(max_modes, n_distinct) + 1):
        weights, means, stds, trace = _em_fit(values, k, rng)
        ll = trace[-1]
        n_params = 3 * k - 1
        bic = -2.0 * ll + n_params * np.log(n)
        if bic < best_bic:
            best_bic = bic
            best = (weights, means, stds, trace)

    weights, means, stds, trace = best
    active = weights >= weight_floor
    if not active.any():
        active[np.argmax(weights)] = True
    return GmmModel(
        weights=weights,
        means=means,
        stds=stds,
        active=active,
        degenerate=False,
        loglik_trace=trace,
    )


def _active_log_responsibilities(g: GmmModel, values: np.ndarray) -> np.ndarray:
    idx = g.active_indices()
    return _log_normal_pdf(values, g.means[idx], g.stds[idx]) + np.log(g.weights[idx])[None, :]


def encode_column(
    g: GmmModel, values: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized mode-specific normalization for a whole column.

    Modes are sampled from the posterior responsibilities over active
    components (Gumbel-max over the log responsibilities); alpha is the
    offset in units of 4 component stds, clipped to [-1, 1].
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    idx = g.active_indices()
    logits = _active_log_responsibilities(g, values)
    if len(idx) == 1:
        slots = np.zeros(len(values), dtype=np.int64)
    else:
        slots = np.argmax(logits + rng.gumbel(size=logits.shape), axis=1)
    modes = idx[slots]
    alphas = (values - g.means[modes]) / (4.0 * g.stds[modes])
    return np.clip(alphas, -1.0, 1.0), modes


def encode_numerical(g: GmmModel, value: float, rng: np.random.Generator) -> tuple[float, int]:
    alphas, modes = encode_column(g, np.array([value]), rng)
    return float(alphas[0]), int(modes[0])


def decode_numerical(g: GmmModel, alpha, mode) -> np.ndarray | float:
    """Invert mode-specific normalization: eta_mode + 4*phi_mode*alpha."""
    mode_arr = np.asarray(mode)
    if not np.all(g.active[mode_arr]):
        raise TransformError("decode with inactive mode index")
    out = g.means[mode_arr] + 4.0 * g.stds[mode_arr] * np.asarray(alpha)
    return float(out) if np.isscalar(mode) or mode_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Encoded layout

@dataclass(frozen=True)
class Span:
    """Contiguous slice of the encoded vector owned by one original column.

    Numerical spans hold the alpha slot at `start` followed by one indicator
    slot per active mixture mode; categorical spans are plain one-hot.
    """

    name: str
    kind: str
    start: int
    width: int

    @property
    def end(self) -> int:
        return self.start + self.width


@dataclass(frozen=True)
class EncodedLayout:
    spans: tuple[Span, ...]
    width: int

    def span(self, name: str) -> Span:
        for s in self.spans:
            if s.name == name:
                return s
        raise TransformError(f"no span for column {name!r}")

    def tanh_slots(self) -> list[int]:
        return [s.start for s in self.spans if s.kind == NUMERICAL]

    def onehot_spans(self) -> list[tuple[int, int]]:
        """(start, width) of every span that must be one-hot: mode indicators
        and categorical spans."""
        out = []
        for s in self.spans:
            if s.kind == NUMERICAL:
                if s.width > 1:
                    out.append((s.start + 1, s.width - 1))
            else:
                out.append((s.start, s.width))
        return out

    def categorical_spans(self) -> dict[str, tuple[int, int]]:
        return {s.name: (s.start, s.width) for s in self.spans if s.kind == CATEGORICAL}


# ---------------------------------------------------------------------------
# Table transformer

class DataTransformer:
    """Fits per-column encoders on a Table and maps rows to/from the flat
    encoded vector consumed by the networks."""

    def __init__(self, max_modes: int = 10, weight_floor: float = 0.005):
        self.max_modes = max_modes
        self.weight_floor = weight_floor
        self.schema: Schema | None = None
        self.gmms: dict[str, GmmModel] = {}
        self.layout: EncodedLayout | None = None

    @property
    def fitted(self) -> bool:
        return self.layout is not None

    def fit(self, table: Table, rng: np.random.Generator | None = None) -> "DataTransformer":
        if rng is None:
            rng = np.random.default_rng(0)
        self.schema = table.schema
        self.gmms = {}
        spans = []
        offset = 0
        for col in table.schema.columns:
            if col.is_categorical:
                width = col.cardinality
            else:
                g = fit_gmm(
                    table.numerical_column(col.name),
                    max_modes=self.max_modes,
                    weight_floor=self.weight_floor,
                    rng=rng,
                )
                self.gmms[col.name] = g
                width = 1 + g.n_active
            spans.append(Span(col.name, col.kind, offset, width))
            offset += width
        self.layout = EncodedLayout(tuple(spans), offset)
        return self

    def _require_fitted(self):
        if not self.fitted:
            raise TransformError("transformer not fitted")

    def transform(self, table: Table, rng: np.random.Generator) -> np.ndarray:
        self._require_fitted()
        if table.schema != self.schema:
            raise TransformError("schema mismatch with the fitted transformer")
        out = np.zeros((table.n_rows, self.layout.width))
        rows = np.arange(table.n_rows)
        for span in self.layout.spans:
            if span.kind == NUMERICAL:
                g = self.gmms[span.name]
                alphas, modes = encode_column(g, table.numerical_column(span.name), rng)
                slots = np.searchsorted(g.active_indices(), modes)
                out[:, span.start] = alphas
                out[rows, span.start + 1 + slots] = 1.0
            else:
                codes = table.categorical_codes(span.name)
                out[rows, span.start + codes] = 1.0
        return out

    def inverse_transform(self, mat: np.ndarray) -> Table:
        """Decode an encoded matrix (hard or soft spans) back to a Table.

        Soft spans are resolved by per-span argmax (ties to the lowest index);
        alpha slots are clipped into [-1, 1] before decoding.
        """
        self._require_fitted()
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] != self.layout.width:
            raise TransformError(
                f"encoded width {mat.shape[-1] if mat.ndim else '?'} != layout width {self.layout.width}"
            )
        n = mat.shape[0]
        num = np.zeros((n, len(self.schema.numerical_names)))
        cat = np.zeros((n, len(self.schema.categorical_names)), dtype=np.int64)
        for span in self.layout.spans:
            if span.kind == NUMERICAL:
                g = self.gmms[span.name]
                alphas = np.clip(mat[:, span.start], -1.0, 1.0)
                slots = np.argmax(mat[:, span.start + 1 : span.end], axis=1)
                modes = g.active_indices()[slots]
                j = self.schema.numerical_names.index(span.name)
                num[:, j] = decode_numerical(g, alphas, modes)
            else:
                j = self.schema.categorical_names.index(span.name)
                cat[:, j] = np.argmax(mat[:, span.start : span.end], axis=1)
        return Table(self.schema, num, cat)

    # serialization hooks used by the model file format
    def state(self) -> dict:
        self._require_fitted()
        return {
            "max_modes": self.max_modes,
            "weight_floor": self.weight_floor,
            "columns": [
                {
                    "name": s.name,
                    "kind": s.kind,
                    "start": s.start,
                    "width": s.width,
                }
                for s in self.layout.spans
            ],
            "gmms": {
                name: {
                    "weights": g.weights.tolist(),
                    "means": g.means.tolist(),
                    "stds": g.stds.tolist(),
                    "active": [bool(a) for a in g.active],
                    "degenerate": g.degenerate,
                }
                for name, g in self.gmms.items()
            },
        }

    @classmethod
    def from_state(cls, state: dict, schema: Schema) -> "DataTransformer":
        dt = cls(max_modes=state["max_modes"], weight_floor=state["weight_floor"])
        dt.schema = schema
        dt.gmms = {
            name: GmmModel(
                weights=np.asarray(g["weights"]),
                means=np.asarray(g["means"]),
                stds=np.asarray(g["stds"]),
                active=np.asarray(g["active"], dtype=bool),
                degenerate=g["degenerate"],
            )
            for name, g in state["gmms"].items()
        }
        spans = tuple(
            Span(c["name"], c["kind"], c["start"], c["width"]) for c in state["columns"]
        )
        dt.layout = EncodedLayout(spans, spans[-1].end if spans else 0)
        return dt


# ---------------------------------------------------------------------------
# Metric-side encodings

@dataclass(frozen=True)
class MinMax:
    lo: float
    hi: float
    degenerate: bool

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.degenerate:
            return np.zeros_like(values)
        return (values - self.lo) / (self.hi - self.lo)


def minmax_fit(values: np.ndarray) -> MinMax:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise TransformError("cannot fit min-max on an empty column")
    lo, hi = float(values.min()), float(values.max())
    return MinMax(lo, hi, degenerate=(lo == hi))


def minmax_fit_apply(values: np.ndarray) -> tuple[np.ndarray, MinMax]:
    mm = minmax_fit(values)
    return mm.apply(values), mm


def label_encode(labels, categories) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(categories)}
    try:
        return np.array([index[lab] for lab in labels], dtype=np.int64)
    except KeyError as exc:
        raise TransformError(f"unknown label {exc.args[0]!r}") from None


def label_decode(codes, categories) -> list:
    categories = list(categories)
    return [categories[int(c)] for c in codes]

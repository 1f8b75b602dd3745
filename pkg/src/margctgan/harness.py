"""Sample-size sweep orchestration.

A sweep trains every (subset size, variant, seed) cell, draws `trials`
synthetic sets per trained model, scores each against the held-out test
split, and keeps one real-data reference per size. Every artifact lands
in its own directory so an interrupted sweep resumes without retraining,
and report emission from unchanged cells is byte-identical.
"""

import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import FULL, Table, load_csv, load_schema, subsample, write_csv
from .metrics import METRIC_NAMES, MetricReport, evaluate
from .metrics.joint import SAMPLE_CAP
from .synthesizer import VARIANTS, TrainConfig, load_model, save_model, train

DEFAULT_SIZES = (40, 80, 160, 320, 640, 1280, 2560, 5120, 10240, 20480, FULL)
REFERENCE = "reference"


class HarnessError(ValueError):
    """Sweep configuration or artifact-layout violation."""


@dataclass(frozen=True)
class SweepSpec:
    """Everything a sweep needs; serialized verbatim into the output dir."""

    dataset: str
    train_path: str
    test_path: str
    schema_path: str
    out_dir: str
    sizes: tuple = DEFAULT_SIZES
    variants: tuple = ("ctgan", "margctgan")
    train_seeds: tuple = (0, 1, 2)
    trials: int = 5
    sample_n: int = 20000
    epochs: int = 300
    k: int = 1
    sample_cap: int = SAMPLE_CAP
    keep_synth: bool = False
    train_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sizes:
            raise HarnessError("need at least one subset size")
        numeric = [s for s in self.sizes if s != FULL]
        if any(s < 1 for s in numeric):
            raise HarnessError("subset sizes must be positive (or the full-size marker)")
        if list(numeric) != sorted(set(numeric)):
            raise HarnessError("subset sizes must be strictly ascending")
        if FULL in self.sizes and (
            self.sizes[-1] != FULL or self.sizes.count(FULL) > 1
        ):
            raise HarnessError("the full-size marker must appear once, last")
        if not self.variants:
            raise HarnessError("need at least one variant")
        for v in self.variants:
            if v not in VARIANTS:
                raise HarnessError(f"unknown variant {v!r}")
        if len(set(self.train_seeds)) != len(self.train_seeds) or not self.train_seeds:
            raise HarnessError("training seeds must be distinct and non-empty")
        if self.trials < 1 or self.sample_n < 1 or self.epochs < 1 or self.k < 1:
            raise HarnessError("trials, sample_n, epochs and k must be >= 1")
        for key in ("variant", "seed", "epochs"):
            if key in self.train_options:
                raise HarnessError(f"train_options may not override {key!r}")
        opts = {k: tuple(v) if isinstance(v, list) else v
                for k, v in self.train_options.items()}
        object.__setattr__(self, "train_options", opts)
        # surface bad training knobs at spec time, not mid-sweep
        TrainConfig(variant=self.variants[0], seed=0, epochs=self.epochs, **self.train_options)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("sizes", "variants", "train_seeds"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        for key in ("sizes", "variants", "train_seeds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SweepSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CellResult:
    """One evaluated cell: a report plus pointers to its artifacts."""

    size: int
    variant: str
    seed: int
    trial: int
    report: MetricReport
    wall_clock_s: float = 0.0
    trace_path: str | None = None

    @property
    def key(self) -> tuple:
        return (self.size, self.variant, self.seed, self.trial)


def _size_dirname(size: int) -> str:
    return "size_full" if size == FULL else f"size_{size}"


def real_reference(train: Table, test: Table, k: int = 1, seed: int = 0,
                   sample_cap: int = SAMPLE_CAP, metadata: dict | None = None) -> MetricReport:
    """Score the real training subset as if it were a synthetic sample."""
    return evaluate(train, test, train, k=k, seed=seed, sample_cap=sample_cap,
                    metadata=metadata)


def relative_error(score: float, reference: float) -> float:
    """Percent shortfall against the reference; negative when the score wins."""
    if reference == 0.0:
        raise HarnessError("relative error is undefined for a zero reference")
    return 100.0 * (reference - score) / reference


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text())


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _load_report(path: Path) -> MetricReport:
    return MetricReport.from_json(path.read_text())


def _cell_metadata(spec: SweepSpec, size: int, variant: str, seed: int, trial: int) -> dict:
    return {
        "dataset": spec.dataset,
        "subset_size": size,
        "variant": variant,
        "seed": seed,
        "trial": trial,
    }


def run_sweep(spec: SweepSpec) -> list[CellResult]:
    """Execute (or resume) the sweep; returns every successful cell.

    Cells found on disk are loaded, not recomputed: a completed directory
    retrains nothing. Training failures are recorded in the cell directory
    and the sweep moves on.
    """
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec_path = out / "sweep.json"
    text = spec.to_json()
    if spec_path.exists():
        if spec_path.read_text() != text:
            raise HarnessError("output directory belongs to a different sweep spec")
    else:
        spec_path.write_text(text)

    schema = load_schema(spec.schema_path)
    train_table = load_csv(spec.train_path, schema)
    test_table = load_csv(spec.test_path, schema)
    for size in spec.sizes:
        if size != FULL and size > train_table.n_rows:
            raise HarnessError(
                f"subset size {size} exceeds the {train_table.n_rows} training rows"
            )

    cells: list[CellResult] = []
    for size in spec.sizes:
        # one fixed subset per size, shared by every variant and seed
        subset = train_table if size == FULL else subsample(train_table, size, seed=size)
        size_dir = out / "cells" / _size_dirname(size)

        ref_path = size_dir / REFERENCE / "report.json"
        if ref_path.exists():
            ref_report = _load_report(ref_path)
        else:
            ref_report = real_reference(
                subset, test_table, k=spec.k, seed=0, sample_cap=spec.sample_cap,
                metadata=_cell_metadata(spec, size, REFERENCE, 0, 0),
            )
            _write_text(ref_path, ref_report.to_json())
        cells.append(CellResult(size, REFERENCE, 0, 0, ref_report))

        for variant in spec.variants:
            for seed in spec.train_seeds:
                cell_dir = size_dir / variant / f"seed{seed}"
                cells.extend(_run_cell(spec, subset, test_table, size, variant, seed, cell_dir))
    return cells


def _run_cell(spec, subset, test_table, size, variant, seed, cell_dir: Path) -> list[CellResult]:
    model_path = cell_dir / "model.bin"
    trace_path = cell_dir / "trace.json"
    meta_path = cell_dir / "cell.json"
    trial_paths = [cell_dir / f"trial{t}" / "report.json" for t in range(spec.trials)]

    wall = float(_read_json(meta_path)["wall_clock_s"]) if meta_path.exists() else 0.0
    model = None
    if any(not p.exists() for p in trial_paths):
        if model_path.exists():
            model = load_model(model_path)
        else:
            config = TrainConfig(variant=variant, seed=seed, epochs=spec.epochs,
                                 **spec.train_options)
            start = time.perf_counter()
            try:
                model = train(subset, config)
            except Exception as exc:
                _write_text(cell_dir / "failed.json", json.dumps({
                    "size": size, "variant": variant, "seed": seed, "error": str(exc),
                }, sort_keys=True, indent=2) + "\n")
                warnings.warn(f"training failed for {_size_dirname(size)}/{variant}/seed{seed}: {exc}",
                              stacklevel=2)
                return []
            wall = time.perf_counter() - start
            model_path.parent.mkdir(parents=True, exist_ok=True)
            save_model(model, model_path)
            _write_text(trace_path, json.dumps(model.trace, sort_keys=True) + "\n")
            _write_text(meta_path, json.dumps({"wall_clock_s": wall}, sort_keys=True) + "\n")
            failed = cell_dir / "failed.json"
            if failed.exists():
                failed.unlink()

    results = []
    for trial, report_path in enumerate(trial_paths):
        if report_path.exists():
            report = _load_report(report_path)
        else:
            synth = model.sample(spec.sample_n, np.random.default_rng([seed, trial]))
            report = evaluate(
                subset, test_table, synth, k=spec.k, seed=trial,
                sample_cap=spec.sample_cap,
                metadata=_cell_metadata(spec, size, variant, seed, trial),
            )
            _write_text(report_path, report.to_json())
            if spec.keep_synth:
                write_csv(synth, report_path.parent / "synth.csv")
        results.append(CellResult(size, variant, seed, trial, report, wall,
                                  str(trace_path) if trace_path.exists() else None))
    return results


def load_cells(sweep_dir) -> tuple[SweepSpec, list[CellResult]]:
    """Recover the spec and every cell already on disk, in canonical order."""
    out = Path(sweep_dir)
    spec_path = out / "sweep.json"
    if not spec_path.exists():
        raise HarnessError(f"{out} is not a sweep directory (missing sweep.json)")
    spec = SweepSpec.from_json(spec_path.read_text())
    cells = []
    for size in spec.sizes:
        size_dir = out / "cells" / _size_dirname(size)
        ref_path = size_dir / REFERENCE / "report.json"
        if ref_path.exists():
            cells.append(CellResult(size, REFERENCE, 0, 0, _load_report(ref_path)))
        for variant in spec.variants:
            for seed in spec.train_seeds:
                cell_dir = size_dir / variant / f"seed{seed}"
                meta_path = cell_dir / "cell.json"
                wall = float(_read_json(meta_path)["wall_clock_s"]) if meta_path.exists() else 0.0
                trace = cell_dir / "trace.json"
                for trial in range(spec.trials):
                    report_path = cell_dir / f"trial{trial}" / "report.json"
                    if report_path.exists():
                        cells.append(CellResult(
                            size, variant, seed, trial, _load_report(report_path),
                            wall, str(trace) if trace.exists() else None,
                        ))
    return spec, cells


def load_failures(sweep_dir) -> list[dict]:
    out = Path(sweep_dir)
    return [_read_json(p) for p in sorted(out.glob("cells/*/*/seed*/failed.json"))]


# ---------------------------------------------------------------------------
# aggregation


def mean_scores(cells: list) -> dict:
    """Unweighted per-metric mean over cells (dicts or CellResults)."""
    rows = [_scores_of(c) for c in cells]
    if not rows:
        raise HarnessError("no cells to average")
    return {m: float(np.mean([r[m] for r in rows])) for m in METRIC_NAMES}


def cross_dataset_average(per_dataset: list) -> dict:
    """Unweighted mean of per-dataset mean scores (datasets weigh equally)."""
    if not per_dataset:
        raise HarnessError("no datasets to average")
    return {m: float(np.mean([d[m] for d in per_dataset])) for m in METRIC_NAMES}


def _scores_of(cell) -> dict:
    return cell if isinstance(cell, dict) else cell.report.scores


@dataclass(frozen=True)
class MetricCorrelation:
    metrics: tuple
    matrix: np.ndarray
    degenerate: tuple  # metrics without variance across cells


def metric_correlation(cells: list) -> MetricCorrelation:
    """Absolute Pearson correlation between metrics across cells."""
    rows = [_scores_of(c) for c in cells]
    if len(rows) < 2:
        raise HarnessError("metric correlation needs at least two cells")
    values = np.array([[r[m] for r in rows] for m in METRIC_NAMES])
    stds = values.std(axis=1)
    degenerate = tuple(m for m, s in zip(METRIC_NAMES, stds) if s == 0.0)
    matrix = np.eye(len(METRIC_NAMES))
    for i in range(len(METRIC_NAMES)):
        for j in range(i + 1, len(METRIC_NAMES)):
            if stds[i] == 0.0 or stds[j] == 0.0:
                r = 0.0
            else:
                r = abs(float(np.corrcoef(values[i], values[j])[0, 1]))
            matrix[i, j] = matrix[j, i] = r
    return MetricCorrelation(METRIC_NAMES, matrix, degenerate)


# ---------------------------------------------------------------------------
# report emission


def _fmt_cell(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def relative_error_table(spec: SweepSpec, cells: list, metric: str) -> str:
    """CSV: one row per variant, one column per size, largest size first."""
    if metric not in METRIC_NAMES:
        raise HarnessError(f"unknown metric {metric!r}")
    sizes = tuple(reversed(spec.sizes))
    by_key: dict[tuple, list[float]] = {}
    refs: dict[int, float] = {}
    for cell in cells:
        if cell.variant == REFERENCE:
            refs[cell.size] = cell.report.scores[metric]
        else:
            by_key.setdefault((cell.size, cell.variant), []).append(cell.report.scores[metric])
    lines = ["variant," + ",".join(str(s) for s in sizes)]
    for variant in spec.variants:
        row = [variant]
        for size in sizes:
            scores = by_key.get((size, variant))
            ref = refs.get(size)
            if not scores or ref is None or ref == 0.0:
                row.append(_fmt_cell(None))
            else:
                row.append(_fmt_cell(relative_error(float(np.mean(scores)), ref)))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _long_csv(cells: list, metric: str) -> str:
    lines = ["size,variant,seed,trial,score"]
    for cell in cells:
        lines.append(f"{cell.size},{cell.variant},{cell.seed},{cell.trial},"
                     f"{cell.report.scores[metric]}")
    return "\n".join(lines) + "\n"


def _correlation_csv(corr: MetricCorrelation) -> str:
    lines = ["," + ",".join(corr.metrics)]
    for name, row in zip(corr.metrics, corr.matrix):
        lines.append(name + "," + ",".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"


def write_report(sweep_dir, fmt: str = "csv") -> list[Path]:
    """Emit plot-ready tables for a sweep directory into `<dir>/report`.

    Deterministic: unchanged cells re-emit byte-identical files."""
    if fmt not in ("csv", "json"):
        raise HarnessError(f"unknown report format {fmt!r}")
    spec, cells = load_cells(sweep_dir)
    if not cells:
        raise HarnessError("sweep directory holds no completed cells")
    keys = [c.key for c in cells]
    if len(set(keys)) != len(keys):
        raise HarnessError("duplicate cell keys in sweep directory")
    synth_cells = [c for c in cells if c.variant != REFERENCE]
    report_dir = Path(sweep_dir) / "report"
    written = []

    corr = metric_correlation(synth_cells) if len(synth_cells) >= 2 else None
    manifest = {
        "spec": spec.to_dict(),
        "cells": [
            {
                "size": c.size, "variant": c.variant, "seed": c.seed, "trial": c.trial,
                "wall_clock_s": round(c.wall_clock_s, 3),
            }
            for c in cells
        ],
        "failures": load_failures(sweep_dir),
        "correlation_degenerate": list(corr.degenerate) if corr else list(METRIC_NAMES),
    }
    manifest_path = report_dir / "manifest.json"
    _write_text(manifest_path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    written.append(manifest_path)

    if fmt == "json":
        cells_path = report_dir / "cells.json"
        payload = [json.loads(c.report.to_json()) for c in cells]
        _write_text(cells_path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
        written.append(cells_path)
        return written

    for metric in METRIC_NAMES:
        long_path = report_dir / "long" / f"{metric}.csv"
        _write_text(long_path, _long_csv(cells, metric))
        written.append(long_path)
        err_path = report_dir / "relative_error" / f"{metric}.csv"
        _write_text(err_path, relative_error_table(spec, cells, metric))
        written.append(err_path)
    if corr is not None:
        corr_path = report_dir / "metric_correlation.csv"
        _write_text(corr_path, _correlation_csv(corr))
        written.append(corr_path)
    return written

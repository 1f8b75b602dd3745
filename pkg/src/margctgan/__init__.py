"""Tabular synthetic data with decorrelated moment matching.

A WGAN-GP tabular synthesizer (mode-specific normalization, conditional
one-hot spans, training-by-sampling) extended with a first/second-moment
penalty in a PCA-decorrelated feature space, plus the nine-metric
evaluation suite and a sample-size experiment harness.
"""

from .data import (
    CATEGORICAL,
    FULL,
    NUMERICAL,
    Column,
    DataError,
    MixtureColumn,
    PriorColumn,
    Schema,
    Table,
    TargetRule,
    ToySpec,
    load_csv,
    load_schema,
    save_schema,
    split,
    subsample,
    toy_dataset,
    write_csv,
)
from .harness import (
    DEFAULT_SIZES,
    CellResult,
    HarnessError,
    SweepSpec,
    cross_dataset_average,
    load_cells,
    mean_scores,
    metric_correlation,
    real_reference,
    relative_error,
    run_sweep,
    write_report,
)
from .metrics import (
    METRIC_NAMES,
    REPRESENTATIVE_METRICS,
    MetricError,
    MetricReport,
    evaluate,
)
from .synthesizer import (
    VARIANTS,
    SynthError,
    SynthModel,
    TrainConfig,
    load_model,
    save_model,
    train,
)
from .transform import DataTransformer, TransformError

__version__ = "0.1.0"

__all__ = [
    "CATEGORICAL",
    "DEFAULT_SIZES",
    "FULL",
    "METRIC_NAMES",
    "NUMERICAL",
    "REPRESENTATIVE_METRICS",
    "VARIANTS",
    "CellResult",
    "Column",
    "DataError",
    "DataTransformer",
    "HarnessError",
    "MetricError",
    "MetricReport",
    "MixtureColumn",
    "PriorColumn",
    "Schema",
    "SweepSpec",
    "SynthError",
    "SynthModel",
    "Table",
    "TargetRule",
    "ToySpec",
    "TrainConfig",
    "TransformError",
    "cross_dataset_average",
    "evaluate",
    "load_cells",
    "load_csv",
    "load_model",
    "load_schema",
    "mean_scores",
    "metric_correlation",
    "real_reference",
    "relative_error",
    "run_sweep",
    "save_model",
    "save_schema",
    "split",
    "subsample",
    "toy_dataset",
    "train",
    "write_csv",
    "write_report",
]

"""Command-line interface: fit, sample, eval, sweep and report.

Every subcommand works on explicit file paths; nothing reads the
environment. `sweep --config` consumes a JSON file mirroring SweepSpec.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .data import DataError, load_csv, load_schema, write_csv
from .harness import (
    HarnessError,
    SweepSpec,
    load_failures,
    run_sweep,
    write_report,
)
from .metrics import METRIC_NAMES, MetricError, evaluate
from .netcore import NetError
from .synthesizer import (
    VARIANTS,
    SynthError,
    TrainConfig,
    load_model,
    save_model,
    train,
)
from .transform import TransformError

_DOMAIN_ERRORS = (DataError, TransformError, NetError, SynthError, MetricError, HarnessError)


def _widths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _cmd_fit(args) -> int:
    schema = load_schema(args.schema)
    table = load_csv(args.data, schema)
    config = TrainConfig(
        variant=args.variant,
        seed=args.seed,
        epochs=args.epochs,
        batch=args.batch,
        latent=args.latent,
        gen_hidden=args.gen_hidden,
        critic_hidden=args.critic_hidden,
        max_modes=args.max_modes,
    )
    model = train(table, config)
    save_model(model, args.out)
    last = {k: v[-1] for k, v in model.trace.items()}
    print(f"trained {args.variant} on {table.n_rows} rows "
          f"for {args.epochs} epochs -> {args.out}")
    print("final losses: " + ", ".join(f"{k}={v:.4f}" for k, v in sorted(last.items())))
    return 0


def _cmd_sample(args) -> int:
    model = load_model(args.model)
    condition = None
    if args.condition is not None:
        if "=" not in args.condition:
            raise SynthError("condition must look like column=category")
        name, label = args.condition.split("=", 1)
        condition = (name, label)
    synth = model.sample(args.n, np.random.default_rng(args.seed), condition=condition)
    write_csv(synth, args.out)
    print(f"sampled {args.n} rows -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    schema = load_schema(args.schema)
    train_table = load_csv(args.train, schema)
    test_table = load_csv(args.test, schema)
    synth = load_csv(args.synth, schema)
    metadata = {
        "dataset": args.dataset,
        "subset_size": train_table.n_rows,
        "variant": args.label,
        "seed": args.seed,
        "trial": 0,
    }
    report = evaluate(
        train_table, test_table, synth,
        k=args.k, seed=args.seed, sample_cap=args.sample_cap, metadata=metadata,
    )
    for name in METRIC_NAMES:
        print(f"{name} = {report.scores[name]:.6f}")
    if args.out is not None:
        Path(args.out).write_text(report.to_json())
        print(f"report -> {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    spec = SweepSpec.from_json(Path(args.config).read_text())
    cells = run_sweep(spec)
    failures = load_failures(spec.out_dir)
    line = f"{len(cells)} cells complete in {spec.out_dir}"
    if failures:
        line += f" ({len(failures)} training failures recorded)"
    print(line)
    return 0


def _cmd_report(args) -> int:
    files = write_report(args.cells, fmt=args.format)
    print(f"wrote {len(files)} report files under {Path(args.cells) / 'report'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="margctgan",
        description="Tabular synthesis with moment matching, plus its evaluation suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="train a synthesizer on a CSV dataset")
    fit.add_argument("--data", required=True, help="training CSV")
    fit.add_argument("--schema", required=True, help="schema manifest JSON")
    fit.add_argument("--variant", choices=VARIANTS, default="margctgan")
    fit.add_argument("--epochs", type=int, default=300)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True, help="model file to write")
    fit.add_argument("--batch", type=int, default=500)
    fit.add_argument("--latent", type=int, default=128)
    fit.add_argument("--gen-hidden", type=_widths, default=(256, 256))
    fit.add_argument("--critic-hidden", type=_widths, default=(256, 256))
    fit.add_argument("--max-modes", type=int, default=10)
    fit.set_defaults(func=_cmd_fit)

    sample = sub.add_parser("sample", help="draw synthetic rows from a model")
    sample.add_argument("--model", required=True)
    sample.add_argument("--n", type=int, required=True)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", required=True, help="CSV file to write")
    sample.add_argument("--condition", default=None,
                        help="force a category, e.g. --condition label=pos")
    sample.set_defaults(func=_cmd_sample)

    ev = sub.add_parser("eval", help="score a synthetic CSV against real splits")
    ev.add_argument("--synth", required=True)
    ev.add_argument("--train", required=True)
    ev.add_argument("--test", required=True)
    ev.add_argument("--schema", required=True)
    ev.add_argument("--out", default=None, help="where to write report JSON")
    ev.add_argument("--k", type=int, default=1)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--sample-cap", type=int, default=5000)
    ev.add_argument("--dataset", default="", help="dataset name for the report")
    ev.add_argument("--label", default="synthetic", help="variant label for the report")
    ev.set_defaults(func=_cmd_eval)

    sweep = sub.add_parser("sweep", help="run a sample-size sweep from a config")
    sweep.add_argument("--config", required=True, help="JSON file mirroring SweepSpec")
    sweep.set_defaults(func=_cmd_sweep)

    report = sub.add_parser("report", help="emit plot-ready tables for a sweep")
    report.add_argument("--cells", required=True, help="sweep output directory")
    report.add_argument("--format", choices=("csv", "json"), default="csv")
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

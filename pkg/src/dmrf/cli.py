"""Command-line interface: ``dmrf <command> [options]``.

Commands are train, predict, cv, sweep, consistency, bench and fetch. Every
option can also come from an INI file given with ``--config``; keys are the
long option names without the leading dashes (``trees = 50``, ``strict-leaf = true``),
read from the ``[dmrf]`` section and then from a section named after the
command. Command-line flags override file values.

Exit codes: 0 ok, 1 usage, 2 data, 3 config, 4 internal.
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import datasets
from .data import CLASSIFICATION, Dataset, encode_column, load_csv, parse_synthetic, read_rows, synthesize
from .errors import ConfigError, DataError
from .evaluation import (RESULT_COLUMNS, SweepGrid, bench_runtime, consistency_curve, cross_validate,
                         sweep, write_rows)
from .forest import VariantConfig, load_forest, save_forest, train_forest

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# option -> (VariantConfig field, type); every one defaults to None so the
# config file can fill it before built-in defaults apply
FOREST_OPTIONS = {
    "variant": ("variant", str),
    "trees": ("n_trees", int),
    "q": ("q", float),
    "p": ("p", float),
    "b1": ("b1", float),
    "b2": ("b2", float),
    "p1": ("p1", float),
    "p2": ("p2", float),
    "lambda": ("poisson_mean", float),
    "m": ("preselect", int),
    "ratio": ("ratio", float),
}

COMMON_OPTIONS = {
    "data": str, "synthetic": str, "n": int, "label": str, "no-header": _bool, "log-label": _bool,
    "kn": str, "folds": int, "repeats": int, "seed": int, "jobs": int, "out": str,
    "strict-leaf": _bool, "weighted-mse": _bool,
    **{name: kind for name, (_, kind) in FOREST_OPTIONS.items()},
}

COMMAND_OPTIONS = {
    "train": {},
    "predict": {"model": str},
    "cv": {},
    "sweep": {"grid": str},
    "consistency": {"schedule": str, "seeds": int, "test-size": int},
    "bench": {"sizes": str, "variants": str, "bench-repeats": int},
    "fetch": {"force": _bool},
}

DEFAULTS = {
    "n": 1000, "label": "-1", "no-header": False, "log-label": False, "folds": 10, "repeats": 10,
    "seed": 0, "jobs": 1, "strict-leaf": False, "weighted-mse": False, "grid": "pq",
    "schedule": "256,1024,4096,8192", "seeds": 5, "test-size": 10_000, "sizes": "1000,2000",
    "variants": "DMRF,MRF-b", "bench-repeats": 3, "force": False,
}


HELP = {
    "data": "CSV file or bundle dataset name (see fetch)",
    "synthetic": "synthetic source, e.g. classification:dim=2,noise=0.1,seed=0 or regression",
    "n": "synthetic sample size (default 1000)",
    "label": "label column name or index (default -1, the last column)",
    "no-header": "CSV has no header row",
    "log-label": "replace regression labels by their natural log",
    "kn": "minimum node size k_n (default 5); consistency also takes a rule such as n^0.6",
    "folds": "cross-validation folds (default 10)",
    "repeats": "cross-validation repeats (default 10)",
    "seed": "master seed (default 0)",
    "jobs": "worker processes for tree training (default 1)",
    "out": "output path (model file or result CSV)",
    "strict-leaf": "enforce k_n as a minimum leaf size instead of a minimum split size",
    "weighted-mse": "weight child MSE by child share in regression reductions",
    "variant": "DMRF, BreimanRF, BRF-SE, BRF-b, MRF-SE, MRF-b, Denil14-SE or Denil14-b",
    "trees": "number of trees M (default 100)",
    "q": "per-sample bootstrap inclusion probability (default 1 - 1/e)",
    "p": "probability of taking the best split at a node (default 0.5)",
    "b1": "feature softmax temperature (default 5)",
    "b2": "threshold softmax temperature (default 5)",
    "p1": "BRF probability of a single-feature subspace (default 0.05)",
    "p2": "BRF probability of random thresholds (default 0.05)",
    "lambda": "Denil14 Poisson mean of the subspace size (default 10)",
    "m": "Denil14 number of preselected threshold points (default 100)",
    "ratio": "SE structure share of the training samples (default 0.5)",
    "model": "saved forest file",
    "grid": "pq, temperatures, b1b2, trees or name=v1,v2;name=... (default pq)",
    "schedule": "comma-separated sample sizes (default 256,1024,4096,8192)",
    "seeds": "independent sample paths (default 5)",
    "test-size": "test set size (default 10000)",
    "sizes": "comma-separated sample sizes (default 1000,2000)",
    "variants": "comma-separated variants to time (default DMRF,MRF-b)",
    "bench-repeats": "timing repeats, best one kept (default 3)",
    "force": "download again even if present",
}


def _add_option(parser, name, kind):
    dest = name.replace("-", "_")
    if kind is _bool:
        parser.add_argument(f"--{name}", dest=dest, action="store_const", const=True, default=None,
                            help=HELP[name])
    else:
        metavar = name.upper().replace("-", "_")
        parser.add_argument(f"--{name}", dest=dest, type=kind, default=None, metavar=metavar,
                            help=HELP[name])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dmrf", description="DMRF random forests and baseline variants.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "train": "train a forest and save it",
        "predict": "predict with a saved forest",
        "cv": "repeated k-fold cross-validation",
        "sweep": "cross-validate over a parameter grid",
        "consistency": "test risk against growing sample sizes",
        "bench": "training time against sample size",
        "fetch": "download the UCI benchmark bundle",
    }
    for command, extra in COMMAND_OPTIONS.items():
        cmd = sub.add_parser(command, help=helps[command])
        cmd.add_argument("--config", default=None, metavar="INI", help="INI file with option defaults")
        for name, kind in {**COMMON_OPTIONS, **extra}.items():
            _add_option(cmd, name, kind)
        if command == "fetch":
            cmd.add_argument("names", nargs="*", help=f"datasets to fetch (default: all of {', '.join(datasets.BUNDLE)})")
    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    known = {**COMMON_OPTIONS, **COMMAND_OPTIONS[args.command]}
    values: dict = {}
    if args.config:
        ini = configparser.ConfigParser()
        try:
            with open(args.config) as fh:
                ini.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        for section in ("dmrf", args.command):
            if not ini.has_section(section):
                continue
            for key, raw in ini.items(section):
                if key not in known:
                    raise ConfigError(f"unknown key {key!r} in [{section}] of {args.config}")
                try:
                    values[key] = known[key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key!r} in {args.config}: {exc}") from exc
    for name in known:
        dest = name.replace("-", "_")
        if getattr(args, dest, None) is None:
            setattr(args, dest, values.get(name, DEFAULTS.get(name)))
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise ConfigError(f"missing required parameter --{name}")


def _variant_config(args, variant: str | None = None) -> VariantConfig:
    values = {}
    for name, (field_name, _) in FOREST_OPTIONS.items():
        value = getattr(args, name.replace("-", "_"))
        if value is not None:
            values[field_name] = value
    if variant is not None:
        values["variant"] = variant
    if args.kn is not None:
        try:
            values["min_node_size"] = int(args.kn)
        except ValueError as exc:
            raise ConfigError(f"--kn must be an integer for {args.command}, got {args.kn!r}") from exc
    values.update(strict=args.strict_leaf, weighted_mse=args.weighted_mse, seed=args.seed)
    return VariantConfig(**values)


def _synthetic_spec(args):
    try:
        return parse_synthetic(args.synthetic)
    except ValueError as exc:
        raise ConfigError(f"bad --synthetic value {args.synthetic!r}: {exc}") from exc


def _load_dataset(args) -> Dataset:
    if args.data is None and args.synthetic is None:
        raise ConfigError("missing required parameter --data (or --synthetic)")
    if args.data is not None and args.synthetic is not None:
        raise ConfigError("give either --data or --synthetic, not both")
    if args.synthetic is not None:
        return synthesize(_synthetic_spec(args), args.n)
    if args.data in datasets.BUNDLE and not Path(args.data).exists():
        return datasets.load(args.data)
    return load_csv(args.data, label=args.label, has_header=not args.no_header,
                    log_label=args.log_label, name=Path(args.data).stem)


def _emit(rows, out, columns=None):
    """Write ``rows`` to ``out`` (CSV) and a sibling ``.jsonl`` file."""
    if out is None:
        return
    path = Path(out)
    write_rows(rows, path, path.with_suffix(".jsonl"), columns)


# -- commands --------------------------------------------------------------------------

def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    _require(args, "out")
    cfg = _variant_config(args)
    start = time.perf_counter()
    forest = train_forest(dataset, cfg, jobs=args.jobs)
    seconds = time.perf_counter() - start
    save_forest(forest, args.out)
    print(f"trained {cfg.variant}: M={cfg.n_trees} n={dataset.n} D={dataset.n_features} "
          f"seconds={seconds:.3f} -> {args.out}")
    return EXIT_OK


def _prediction_matrix(forest, header, rows, has_header) -> np.ndarray:
    schema = forest.schema
    width = len(header) if header is not None else len(rows[0])
    if has_header and header is not None and schema["label_name"] in header and width == forest.n_features + 1:
        drop = header.index(schema["label_name"])
    elif width == forest.n_features + 1:
        drop = width - 1
    elif width == forest.n_features:
        drop = None
    else:
        raise DataError(f"input has {width} columns; the model expects {forest.n_features} "
                        f"features (optionally followed by the label)")
    keep = [j for j in range(width) if j != drop]
    columns = []
    for feature, j in enumerate(keep):
        levels = schema["feature_levels"][feature]
        values, _ = encode_column([row[j] for row in rows], levels)
        columns.append(values)
    return np.column_stack(columns)


def cmd_predict(args) -> int:
    _require(args, "model", "data", "out")
    forest = load_forest(args.model)
    has_header = not args.no_header
    header, rows = read_rows(args.data, has_header)
    if not rows:
        Path(args.out).write_text("")
        print(f"no input rows; wrote empty {args.out}")
        return EXIT_OK
    X = _prediction_matrix(forest, header, rows, has_header)
    predicted = forest.predict(X, np.random.default_rng(args.seed))
    if forest.task == CLASSIFICATION:
        names = forest.schema["class_names"]
        out = [names[int(label) - 1] for label in predicted]
    else:
        out = [repr(float(v)) for v in predicted]
    label = forest.schema["label_name"] or "prediction"
    Path(args.out).write_text("\n".join([label] + out) + "\n")
    print(f"predicted {len(out)} rows -> {args.out}")
    return EXIT_OK


def cmd_cv(args) -> int:
    dataset = _load_dataset(args)
    cfg = _variant_config(args)
    report = cross_validate(dataset, cfg, args.folds, args.repeats, args.seed, args.jobs)
    _emit(report.rows(), args.out, RESULT_COLUMNS)
    print(report.headline())
    return EXIT_OK


PRESET_GRIDS = {
    "pq": SweepGrid.probabilities,
    "temperatures": SweepGrid.temperatures,
    "b1b2": SweepGrid.temperatures,
    "trees": SweepGrid.tree_counts,
}


def parse_grid(text: str) -> SweepGrid:
    """A preset name or ``name=v1,v2,...;name=...`` over VariantConfig fields or CLI names."""
    if text in PRESET_GRIDS:
        return PRESET_GRIDS[text]()
    axes = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, _, values = part.partition("=")
        name = name.strip()
        field_name, kind = FOREST_OPTIONS.get(name, (name, float))
        if field_name == "min_node_size" or name == "kn":
            field_name, kind = "min_node_size", int
        if not values:
            raise ConfigError(f"grid axis {name!r} has no values")
        try:
            axes[field_name] = tuple(kind(v) for v in values.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad value on grid axis {name!r}: {exc}") from exc
    if not axes:
        raise ConfigError(f"empty grid {text!r}")
    return SweepGrid.of(**axes)


def cmd_sweep(args) -> int:
    dataset = _load_dataset(args)
    cfg = _variant_config(args)
    grid = parse_grid(args.grid)
    rows = sweep(dataset, cfg, grid, args.folds, args.repeats, args.seed, args.jobs)
    _emit(rows, args.out)
    best = max(rows, key=lambda r: r["mean"] if r["metric"] == "accuracy" else -r["mean"])
    params = ", ".join(f"{k}={best[k]}" for k, _ in grid.axes)
    print(f"{len(rows)} grid points; best {best['metric']} {best['mean']:.6g} +/- {best['std']:.3g} at {params}")
    return EXIT_OK


def _int_list(text, name) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--{name} must be a comma-separated list of integers: {exc}") from exc


def _without_kn(args):
    """A copy of ``args`` without ``kn``, which the consistency rule consumes."""
    copy = argparse.Namespace(**vars(args))
    copy.kn = None
    return copy


def cmd_consistency(args) -> int:
    _require(args, "synthetic")
    spec = _synthetic_spec(args)
    schedule = _int_list(args.schedule, "schedule")
    rule = args.kn or "n^0.6"
    base = _variant_config(_without_kn(args))
    points = consistency_curve(spec, schedule, rule, base, args.seeds, args.test_size, args.jobs)
    rows = [{"n": p.n, "min_node_size": p.min_node_size, "mean_risk": p.mean_risk,
             "mean_error": p.mean_error, "risks": json.dumps(p.risks)} for p in points]
    _emit(rows, args.out)
    for row in rows:
        print(f"n={row['n']:>7} k_n={row['min_node_size']:>5} risk={row['mean_risk']:.6g} "
              f"error={row['mean_error']:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    _require(args, "synthetic")
    spec = _synthetic_spec(args)
    sizes = _int_list(args.sizes, "sizes")
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    configs = [_variant_config(args, variant=v) for v in variants]
    rows = bench_runtime(lambda n: synthesize(spec, n), sizes, configs, args.bench_repeats)
    _emit(rows, args.out)
    for row in rows:
        ratio = "" if row["ratio"] is None else f" ratio={row['ratio']:.2f}"
        print(f"{row['variant']:>11} n={row['n']:>7} D={row['n_features']} M={row['n_trees']} "
              f"seconds={row['seconds']:.3f}{ratio}")
    return EXIT_OK


def cmd_fetch(args) -> int:
    names = args.names or list(datasets.BUNDLE)
    failed = 0
    for name in names:
        try:
            path = datasets.fetch(name, force=args.force)
            print(f"{name}: {path}")
        except DataError as exc:
            failed += 1
            print(f"{name}: {exc}", file=sys.stderr)
    return EXIT_DATA if failed else EXIT_OK


COMMANDS = {
    "train": cmd_train, "predict": cmd_predict, "cv": cmd_cv, "sweep": cmd_sweep,
    "consistency": cmd_consistency, "bench": cmd_bench, "fetch": cmd_fetch,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser.parse_args(argv))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

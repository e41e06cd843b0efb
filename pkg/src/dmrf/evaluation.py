"""Cross-validation, parameter sweeps, consistency curves and runtime benchmarks."""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .data import CLASSIFICATION, Dataset, SyntheticSpec, kfold, regression_function, synthesize
from .errors import ConfigError, DataError
from .forest import VariantConfig, derive_seed, train_forest

RESULT_COLUMNS = ("variant", "params", "fold", "repeat", "metric", "seconds")


def score(dataset: Dataset, truth, predicted) -> float:
    """Accuracy for classification, mean squared error for regression."""
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if dataset.task == CLASSIFICATION:
        return float(np.mean(truth == predicted))
    return float(np.mean((truth - predicted) ** 2))


def config_params(cfg: VariantConfig) -> dict:
    params = asdict(cfg)
    params.pop("variant")
    return params


@dataclass
class EvalReport:
    """Repeated k-fold results.

    ``fold_metrics`` and ``fold_seconds`` have shape ``(repeats, k)``. The
    headline ``mean``/``std`` are taken over the per-repeat means.
    """

    dataset: str
    metric: str
    config: VariantConfig
    fold_metrics: np.ndarray
    fold_seconds: np.ndarray

    @property
    def repeat_means(self) -> np.ndarray:
        return self.fold_metrics.mean(axis=1)

    @property
    def mean(self) -> float:
        return float(self.repeat_means.mean())

    @property
    def std(self) -> float:
        means = self.repeat_means
        return float(means.std(ddof=1)) if means.size > 1 else 0.0

    @property
    def fold_std(self) -> float:
        return float(self.fold_metrics.std(ddof=1)) if self.fold_metrics.size > 1 else 0.0

    @property
    def nmse(self) -> float:
        if self.metric != "mse":
            raise ValueError("NMSE is only defined for regression reports")
        return -self.mean

    def rows(self) -> list[dict]:
        params = json.dumps(config_params(self.config), sort_keys=True)
        out = []
        for r, f in itertools.product(range(self.fold_metrics.shape[0]), range(self.fold_metrics.shape[1])):
            out.append({
                "variant": self.config.variant, "params": params, "fold": f, "repeat": r,
                "metric": float(self.fold_metrics[r, f]), "seconds": float(self.fold_seconds[r, f]),
            })
        return out

    def headline(self) -> str:
        if self.metric == "accuracy":
            return f"{self.config.variant} on {self.dataset}: accuracy {100 * self.mean:.2f} +/- {100 * self.std:.2f} (%)"
        return f"{self.config.variant} on {self.dataset}: MSE {self.mean:.6g} +/- {self.std:.3g}"


def cross_validate(dataset: Dataset, cfg: VariantConfig, k: int = 10, repeats: int = 10,
                   seed: int = 0, jobs: int = 1) -> EvalReport:
    """``repeats`` rounds of k-fold cross-validation with fresh folds each round.

    Round ``r`` draws its folds from ``derive_seed(seed, r)``; the forest of
    fold ``f`` uses master seed ``derive_seed(seed, r, f)``.
    """
    if k < 2 or repeats < 1:
        raise ConfigError("cross-validation needs k >= 2 and repeats >= 1")
    if dataset.n < k:
        raise DataError(f"{dataset.n} samples cannot form {k} folds")
    metrics = np.zeros((repeats, k))
    seconds = np.zeros((repeats, k))
    for r in range(repeats):
        for f, (train, test) in enumerate(kfold(dataset.n, k, derive_seed(seed, r))):
            fold_seed = derive_seed(seed, r, f)
            start = time.perf_counter()
            forest = train_forest(dataset, replace(cfg, seed=fold_seed), train, jobs=jobs)
            predicted = forest.predict(dataset.features[test], np.random.default_rng(fold_seed))
            seconds[r, f] = time.perf_counter() - start
            metrics[r, f] = score(dataset, dataset.labels[test], predicted)
    metric = "accuracy" if dataset.task == CLASSIFICATION else "mse"
    return EvalReport(dataset.name, metric, cfg, metrics, seconds)


# -- sweeps ----------------------------------------------------------------------------

def _grid_range(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid over ``VariantConfig`` fields, in declaration order."""

    axes: tuple[tuple[str, tuple], ...]

    def __post_init__(self):
        if not self.axes or any(len(values) == 0 for _, values in self.axes):
            raise ConfigError("a sweep grid needs at least one value on every axis")
        valid = set(VariantConfig.__dataclass_fields__)
        for name, _ in self.axes:
            if name not in valid:
                raise ConfigError(f"cannot sweep unknown parameter {name!r}")

    @classmethod
    def of(cls, **axes) -> "SweepGrid":
        return cls(tuple((name, tuple(values)) for name, values in axes.items()))

    @classmethod
    def probabilities(cls) -> "SweepGrid":
        """p and q over 0.05, 0.15, ..., 0.95."""
        values = _grid_range(0.05, 0.95, 0.1)
        return cls.of(p=values, q=values)

    @classmethod
    def temperatures(cls) -> "SweepGrid":
        """B1 and B2 over the integers 1..10."""
        values = tuple(float(b) for b in range(1, 11))
        return cls.of(b1=values, b2=values)

    @classmethod
    def tree_counts(cls, counts: Sequence[int] = (5, 25, 50, 100, 200)) -> "SweepGrid":
        return cls.of(n_trees=tuple(int(m) for m in counts))

    def points(self) -> list[dict]:
        names = [name for name, _ in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.axes))]

    def __len__(self):
        return math.prod(len(values) for _, values in self.axes)


def sweep(dataset: Dataset, base: VariantConfig, grid: SweepGrid, k: int = 10, repeats: int = 10,
          seed: int = 0, jobs: int = 1) -> list[dict]:
    """One :func:`cross_validate` per grid point; regression rows also carry NMSE."""
    rows = []
    for point in grid.points():
        report = cross_validate(dataset, replace(base, **point), k, repeats, seed, jobs)
        row = {**point, "metric": report.metric, "mean": report.mean, "std": report.std}
        if report.metric == "mse":
            row["nmse"] = report.nmse
        rows.append(row)
    return rows


# -- consistency ------------------------------------------------------------------------

def kn_rule(descriptor) -> Callable[[int], int]:
    """Minimum node size as a function of n.

    Accepts a callable, an integer constant, or a string ``"n^a"`` meaning
    ``ceil(n ** a)``.
    """
    if callable(descriptor):
        return descriptor
    if isinstance(descriptor, int):
        return lambda n: descriptor
    text = str(descriptor).replace(" ", "")
    if text.startswith("n^"):
        exponent = float(text[2:])
        if not 0 < exponent < 1:
            raise ConfigError("the k_n exponent must lie in (0, 1) so that k_n/log n -> inf and k_n/n -> 0")
        return lambda n: int(math.ceil(n ** exponent))
    if text.isdigit():
        return lambda n: int(text)
    raise ConfigError(f"cannot parse k_n rule {descriptor!r}")


@dataclass
class ConsistencyPoint:
    n: int
    min_node_size: int
    risks: list[float] = field(default_factory=list)
    test_errors: list[float] = field(default_factory=list)

    @property
    def mean_risk(self) -> float:
        return float(np.mean(self.risks))

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.test_errors))


def consistency_curve(spec: SyntheticSpec, n_schedule: Sequence[int], rule, cfg: VariantConfig,
                      seeds: int = 5, test_size: int = 10_000, jobs: int = 1) -> list[ConsistencyPoint]:
    """Test risk of forests trained on growing prefixes of one sample path per seed.

    For classification ``risks`` holds the excess misclassification rate over
    the Bayes risk and ``test_errors`` the raw rate; for regression both hold
    the mean squared deviation from the true regression function. Training
    always uses strict leaves with ``k_n = rule(n)``.
    """
    schedule = [int(n) for n in n_schedule]
    if len(schedule) < 3:
        raise ConfigError("a consistency schedule needs at least 3 sample sizes")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError("the sample-size schedule must be strictly increasing")
    rule = kn_rule(rule)
    test = synthesize(replace(spec, seed=derive_seed(spec.seed, 1)), test_size)
    classification = test.task == CLASSIFICATION
    target = test.labels if classification else regression_function(test.features)
    points = [ConsistencyPoint(n, rule(n)) for n in schedule]
    for s in range(seeds):
        path = synthesize(replace(spec, seed=derive_seed(spec.seed, 2, s)), schedule[-1])
        for point in points:
            forest_cfg = replace(cfg, min_node_size=point.min_node_size, strict=True,
                                 seed=derive_seed(spec.seed, 3, s, point.n))
            forest = train_forest(path, forest_cfg, np.arange(point.n), jobs=jobs)
            predicted = forest.predict(test.features, np.random.default_rng(forest_cfg.seed))
            if classification:
                error = float(np.mean(predicted != target))
                point.test_errors.append(error)
                point.risks.append(error - spec.bayes_risk)
            else:
                deviation = float(np.mean((predicted - target) ** 2))
                point.test_errors.append(deviation)
                point.risks.append(deviation)
    return points


# -- runtime ----------------------------------------------------------------------------

def bench_runtime(make_dataset: Callable[[int], Dataset], sizes: Sequence[int],
                  configs: Sequence[VariantConfig], repeats: int = 1) -> list[dict]:
    """Best-of-``repeats`` wall-clock training time per (variant, n).

    ``ratio`` compares each size with the previous one for the same config.
    One untimed fit per config on the smallest size absorbs JIT compilation.
    """
    if len(sizes) < 2:
        raise ConfigError("benchmarking needs at least two sizes")
    rows = []
    for cfg in configs:
        train_forest(make_dataset(min(sizes)), replace(cfg, n_trees=1))
        previous = None
        for n in sizes:
            dataset = make_dataset(n)
            timings = []
            for _ in range(repeats):
                start = time.perf_counter()
                train_forest(dataset, cfg)
                timings.append(time.perf_counter() - start)
            seconds = min(timings)
            rows.append({
                "variant": cfg.variant, "n": n, "n_features": dataset.n_features,
                "n_trees": cfg.n_trees, "seconds": seconds,
                "ratio": seconds / previous if previous else None,
            })
            previous = seconds
    return rows


# -- output -----------------------------------------------------------------------------

def write_rows(rows: list[dict], csv_path=None, jsonl_path=None, columns: Sequence[str] | None = None) -> None:
    """Write ``rows`` as CSV and/or JSON lines with a fixed column order."""
    columns = list(columns or (rows[0].keys() if rows else RESULT_COLUMNS))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            for row in rows:
                writer.writerow({c: row.get(c) for c in columns})
    if jsonl_path is not None:
        with open(jsonl_path, "w") as fh:
            for row in rows:
                fh.write(json.dumps({c: row.get(c) for c in columns}) + "\n")

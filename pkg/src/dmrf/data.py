"""Datasets, CSV ingestion, index partitioning and synthetic distributions.

Index views are plain sorted ``int64`` arrays of row indices into a
:class:`Dataset`; every helper here returns fresh arrays and never mutates
the dataset.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

CLASSIFICATION = "classification"
REGRESSION = "regression"

MISSING_VALUE = -1.0
MISSING_TOKENS = frozenset({"", "?", "na", "n/a", "nan", "null", "none"})


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix plus labels.

    Classification labels are integers ``1..c`` (``class_names[k - 1]`` holds
    the original token of class ``k``); regression labels are floats.
    ``feature_levels[j]`` maps tokens to codes for columns that were ordinal
    encoded, and is ``None`` for numeric columns.
    """

    features: np.ndarray
    labels: np.ndarray
    task: str
    class_names: tuple[str, ...] = ()
    feature_names: tuple[str, ...] = ()
    feature_levels: tuple[dict[str, float] | None, ...] = ()
    label_name: str = "label"
    name: str = ""

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a nonempty 2-D matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values; missing cells must hold -1.0")
        n, d = X.shape
        if self.task == CLASSIFICATION:
            y = np.asarray(self.labels)
            if y.size and not np.all(y == np.round(y)):
                raise DataError("classification labels must be integers")
            y = y.astype(np.int64)
            c = len(self.class_names) if self.class_names else (int(y.max()) if y.size else 0)
            if y.size and (y.min() < 1 or y.max() > c):
                raise DataError(f"classification labels must lie in 1..{c}")
            names = self.class_names or tuple(str(k) for k in range(1, c + 1))
            object.__setattr__(self, "class_names", tuple(names))
        elif self.task == REGRESSION:
            y = np.array(self.labels, dtype=np.float64)
            if not np.all(np.isfinite(y)):
                raise DataError("regression labels must be finite")
        else:
            raise DataError(f"unknown task {self.task!r}")
        if y.shape != (n,):
            raise DataError(f"expected {n} labels, got shape {y.shape}")
        X.setflags(write=False)
        y = y.copy()
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"x{j}" for j in range(d)))
        if not self.feature_levels:
            object.__setattr__(self, "feature_levels", (None,) * d)
        if len(self.feature_names) != d or len(self.feature_levels) != d:
            raise DataError("feature metadata does not match the feature count")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names) if self.task == CLASSIFICATION else 0

    @property
    def targets(self) -> np.ndarray:
        """Labels in the form the tree code consumes: 0-based class codes or floats."""
        if self.task == CLASSIFICATION:
            return self.labels - 1
        return self.labels

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx], self.labels[idx], self.task, self.class_names,
            self.feature_names, self.feature_levels, self.label_name, self.name,
        )


# -- CSV ---------------------------------------------------------------------

def _parse_float(token: str) -> float | None:
    try:
        value = float(token)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _is_missing(token: str) -> bool:
    return token.strip().lower() in MISSING_TOKENS


def _resolve_column(label, header: list[str] | None, width: int) -> int:
    if isinstance(label, str) and not label.lstrip("-").isdigit():
        if header is None or label not in header:
            raise DataError(f"label column {label!r} not found")
        return header.index(label)
    index = int(label)
    if index < 0:
        index += width
    if not 0 <= index < width:
        raise DataError(f"label column index {label} out of range for {width} columns")
    return index


def read_rows(path, has_header: bool = True) -> tuple[list[str] | None, list[list[str]]]:
    """Read a comma-delimited file into (header, rows); all rows must share one width."""
    try:
        with open(path, newline="") as fh:
            rows = [[cell.strip() for cell in row] for row in csv.reader(fh)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except csv.Error as exc:
        raise DataError(f"{path} is not valid delimited text: {exc}") from exc
    rows = [row for row in rows if any(cell for cell in row)]
    header = None
    if has_header and rows:
        header = rows.pop(0)
    width = len(header) if header is not None else (len(rows[0]) if rows else 0)
    for lineno, row in enumerate(rows, start=2 if has_header else 1):
        if len(row) != width:
            raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
    return header, rows


def encode_column(tokens: Sequence[str], levels: dict[str, float] | None = None):
    """Encode one feature column.

    Columns without a single numeric cell are ordinal-encoded by first
    appearance (codes 1, 2, ...). Otherwise numeric cells are kept and every
    missing or non-numeric cell becomes -1.0. Passing ``levels`` reuses a
    previously learned encoding; unseen tokens then map to -1.0.
    """
    if levels is not None:
        return np.array([levels.get(t, MISSING_VALUE) for t in tokens], dtype=np.float64), levels
    parsed = [None if _is_missing(t) else _parse_float(t) for t in tokens]
    if any(v is not None for v in parsed) or all(_is_missing(t) for t in tokens):
        return np.array([MISSING_VALUE if v is None else v for v in parsed]), None
    learned: dict[str, float] = {}
    for t in tokens:
        if not _is_missing(t) and t not in learned:
            learned[t] = float(len(learned) + 1)
    return np.array([learned.get(t, MISSING_VALUE) for t in tokens]), learned


def load_csv(path, label=-1, has_header: bool = True, log_label: bool = False,
             task: str = "auto", name: str | None = None) -> Dataset:
    """Load a delimited file into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
        Comma-delimited text file.
    label : int or str
        Label column, by 0-based index (negative counts from the end) or by
        header name.
    has_header : bool
        Whether the first non-empty row holds column names.
    log_label : bool
        Replace every label ``y`` by ``ln(y)``; regression only.
    task : {"auto", "classification", "regression"}
        ``auto`` picks regression when every label is numeric and at least
        one is non-integral, classification otherwise.
    """
    header, rows = read_rows(path, has_header)
    if not rows:
        raise DataError(f"{path} contains no data rows")
    width = len(rows[0])
    if width < 2:
        raise DataError(f"{path} needs a label column and at least one feature column")
    label_col = _resolve_column(label, header, width)
    raw_labels = [row[label_col] for row in rows]
    for i, token in enumerate(raw_labels):
        if token == "":
            raise DataError(f"{path}: row {i + 1 + has_header} has an empty label")

    numeric = [_parse_float(t) for t in raw_labels]
    if task == "auto":
        is_real = all(v is not None for v in numeric) and any(v != round(v) for v in numeric)
        task = REGRESSION if (is_real or log_label) else CLASSIFICATION
    if task not in (CLASSIFICATION, REGRESSION):
        raise DataError(f"unknown task {task!r}")

    class_names: tuple[str, ...] = ()
    if task == CLASSIFICATION:
        if log_label:
            raise DataError("log-transformed labels only apply to regression")
        order: dict[str, int] = {}
        for t in raw_labels:
            order.setdefault(t, len(order) + 1)
        labels = np.array([order[t] for t in raw_labels], dtype=np.int64)
        class_names = tuple(order)
    else:
        for i, v in enumerate(numeric):
            if v is None:
                raise DataError(f"{path}: row {i + 1 + has_header} has non-numeric label {raw_labels[i]!r}")
            if log_label and v <= 0:
                raise DataError(f"{path}: row {i + 1 + has_header} has non-positive label {v} under log transform")
        labels = np.array(numeric, dtype=np.float64)
        if log_label:
            labels = np.log(labels)

    feature_cols = [j for j in range(width) if j != label_col]
    columns, levels = [], []
    for j in feature_cols:
        values, lv = encode_column([row[j] for row in rows])
        columns.append(values)
        levels.append(lv)
    names = tuple(header[j] for j in feature_cols) if header else ()
    label_name = header[label_col] if header else "label"
    return Dataset(
        np.column_stack(columns), labels, task, class_names, names, tuple(levels),
        label_name, name or Path(path).stem,
    )


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` with a header row and the label as the last column."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dataset.feature_names, dataset.label_name])
        for row, y in zip(dataset.features, dataset.labels):
            out = [repr(float(v)) for v in row]
            if dataset.task == CLASSIFICATION:
                out.append(dataset.class_names[int(y) - 1])
            else:
                out.append(repr(float(y)))
            writer.writerow(out)


# -- index partitioning ----------------------------------------------------------

def kfold(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold partition of ``range(n)`` into (train, test) pairs."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    folds = []
    for test in np.array_split(perm, k):
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        folds.append((np.flatnonzero(mask), np.sort(test)))
    return folds


def structure_estimation_split(indices, ratio: float, rng: np.random.Generator):
    """Randomly split an index view into disjoint structure and estimation parts.

    The structure part receives ``floor(ratio * m + 0.5)`` indices.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    m = idx.size
    n_structure = int(math.floor(ratio * m + 0.5))
    if n_structure < 1 or n_structure >= m:
        raise ValueError(f"ratio {ratio} leaves an empty part for {m} indices")
    perm = rng.permutation(m)
    return np.sort(idx[perm[:n_structure]]), np.sort(idx[perm[n_structure:]])


# -- synthetic distributions -------------------------------------------------------

NOISY_THRESHOLD = "noisy-threshold-classification"
SMOOTH_REGRESSION = "smooth-regression"


@dataclass(frozen=True)
class SyntheticSpec:
    """A synthetic distribution on ``[0, 1]^dimension`` with a closed-form optimum.

    ``noise`` is the label flip probability for classification and the
    noise variance for regression.
    """

    kind: str
    dimension: int = 2
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind == NOISY_THRESHOLD:
            if not 0.0 <= self.noise < 0.5:
                raise ValueError(f"flip probability must lie in [0, 0.5), got {self.noise}")
            min_dim = 1
        elif self.kind == SMOOTH_REGRESSION:
            if self.noise < 0:
                raise ValueError(f"noise variance must be nonnegative, got {self.noise}")
            min_dim = 2
        else:
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        if self.dimension < min_dim:
            raise ValueError(f"{self.kind} needs dimension >= {min_dim}")

    @property
    def bayes_risk(self) -> float:
        """Minimal achievable misclassification rate (or noise variance)."""
        return float(self.noise)


def regression_function(X: np.ndarray) -> np.ndarray:
    """Conditional mean of the smooth-regression distribution."""
    X = np.asarray(X, dtype=np.float64)
    return np.sin(2.0 * np.pi * X[:, 0]) * X[:, 1]


def synth_classification(spec: SyntheticSpec, n: int) -> Dataset:
    if spec.kind != NOISY_THRESHOLD:
        raise ValueError(f"expected a {NOISY_THRESHOLD} spec, got {spec.kind!r}")
    rng = np.random.default_rng(spec.seed)
    X = rng.random((n, spec.dimension))
    y = np.where(X[:, 0] > 0.5, 1, 2)
    flip = rng.random(n) < spec.noise
    y = np.where(flip, 3 - y, y)
    return Dataset(X, y, CLASSIFICATION, ("1", "2"), name=f"{spec.kind}-{spec.seed}")


def synth_regression(spec: SyntheticSpec, n: int) -> Dataset:
    if spec.kind != SMOOTH_REGRESSION:
        raise ValueError(f"expected a {SMOOTH_REGRESSION} spec, got {spec.kind!r}")
    rng = np.random.default_rng(spec.seed)
    X = rng.random((n, spec.dimension))
    y = regression_function(X) + rng.normal(0.0, math.sqrt(spec.noise), n)
    return Dataset(X, y, REGRESSION, name=f"{spec.kind}-{spec.seed}")


def synthesize(spec: SyntheticSpec, n: int) -> Dataset:
    if spec.kind == NOISY_THRESHOLD:
        return synth_classification(spec, n)
    return synth_regression(spec, n)


def parse_synthetic(text: str) -> SyntheticSpec:
    """Parse ``kind[:key=value,...]``, e.g. ``noisy-threshold-classification:dim=2,noise=0.1``."""
    kind, _, rest = text.partition(":")
    aliases = {"classification": NOISY_THRESHOLD, "regression": SMOOTH_REGRESSION}
    kind = aliases.get(kind.strip(), kind.strip())
    kwargs: dict = {}
    keys = {"dim": "dimension", "dimension": "dimension", "noise": "noise", "flip": "noise", "seed": "seed"}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, _, value = item.partition("=")
        if key.strip() not in keys:
            raise ValueError(f"unknown synthetic option {key!r}")
        target = keys[key.strip()]
        kwargs[target] = float(value) if target == "noise" else int(value)
    return SyntheticSpec(kind, **kwargs)

"""Impurity measures and split-point selection strategies.

Every strategy sees a node as ``(X, y, idx)``: the full feature matrix, the
full target vector (0-based class codes or real values) and the row indices
reaching the node. A split ``SplitPoint(j, v)`` sends ``x[j] <= v`` left.
Candidate thresholds are the distinct observed values whose split leaves
both children nonempty (at least ``min_leaf`` samples each).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError

VARIANTS = ("dmrf", "best", "brf", "mrf", "denil14")

# Reductions within this relative distance of the maximum count as ties.
TIE_RTOL = 1e-12


# -- impurity ------------------------------------------------------------------

def gini(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini of an empty node")
    return float(1.0 - np.sum((counts / total) ** 2))


def mse(values) -> float:
    """Mean squared deviation from the sample mean."""
    y = np.asarray(values, dtype=np.float64)
    if y.size == 0:
        raise ValueError("mse of an empty node")
    return float(np.mean((y - y.mean()) ** 2))


def gini_reduction(parent, left, right) -> float:
    parent, left, right = (np.asarray(a, dtype=np.float64) for a in (parent, left, right))
    if left.sum() <= 0 or right.sum() <= 0:
        raise ValueError("split leaves an empty child")
    if not np.array_equal(left + right, parent):
        raise ValueError("child counts do not add up to the parent counts")
    n = parent.sum()
    return gini(parent) - left.sum() / n * gini(left) - right.sum() / n * gini(right)


def mse_reduction(parent, left, right, weighted: bool = False) -> float:
    """MSE reduction of a split; children are unweighted unless ``weighted``."""
    parent, left, right = (np.asarray(a, dtype=np.float64) for a in (parent, left, right))
    if left.size == 0 or right.size == 0:
        raise ValueError("split leaves an empty child")
    if left.size + right.size != parent.size:
        raise ValueError("children do not partition the parent")
    if weighted:
        n = parent.size
        return mse(parent) - left.size / n * mse(left) - right.size / n * mse(right)
    return mse(parent) - mse(left) - mse(right)


def candidate_thresholds(values) -> np.ndarray:
    """Sorted distinct values usable as ``x <= v`` thresholds (the maximum is excluded)."""
    distinct = np.unique(np.asarray(values, dtype=np.float64))
    return distinct[:-1]


# -- probabilities ---------------------------------------------------------------

def normalize(vec) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant vector maps to all zeros."""
    v = np.asarray(vec, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi - lo <= 0:
        return np.zeros_like(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def softmax_temp(vec, temperature: float) -> np.ndarray:
    """``exp(B * v_i) / sum_j exp(B * v_j)`` for a nonnegative finite ``B``."""
    if not (temperature >= 0 and math.isfinite(temperature)):
        raise ValueError(f"temperature must be finite and nonnegative, got {temperature}")
    z = temperature * np.asarray(vec, dtype=np.float64)
    z = np.exp(z - z.max())
    return z / z.sum()


def sample_categorical(probs, rng: np.random.Generator) -> int:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be a nonempty vector of nonnegative numbers")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if i >= p.size:
        i = int(np.flatnonzero(p)[-1])
    return i


# -- node scanning -------------------------------------------------------------------

@dataclass(frozen=True)
class SplitPoint:
    feature: int
    threshold: float


@dataclass(frozen=True)
class Criterion:
    """Gini when ``n_classes > 0``, MSE otherwise; ``min_leaf`` bounds child sizes."""

    n_classes: int = 0
    min_leaf: int = 1
    weighted_mse: bool = False

    @property
    def is_classification(self) -> bool:
        return self.n_classes > 0

    def scan(self, X, y, idx, feature):
        if self.n_classes > 0:
            return _kernels.scan_gini(X, y, idx, feature, self.n_classes, self.min_leaf)
        return _kernels.scan_mse(X, y, idx, feature, self.min_leaf, self.weighted_mse)

    def tie_tolerance(self, y, idx) -> float:
        if self.n_classes > 0:
            return TIE_RTOL
        return TIE_RTOL * max(float(np.var(y[idx])), np.finfo(float).tiny)


@dataclass
class ReductionTable:
    """Impurity reductions of every candidate threshold, per splittable feature.

    ``features[j]`` is a full-space feature index; ``thresholds[j]`` and
    ``reductions[j]`` are aligned ascending-threshold vectors for it, and
    ``maxima[j]`` is the largest entry of ``reductions[j]``.
    """

    features: np.ndarray
    thresholds: list
    reductions: list
    maxima: np.ndarray

    def __len__(self):
        return len(self.features)

    def argmax(self, j: int, tol: float = 0.0) -> int:
        """Lowest threshold index whose reduction is within ``tol`` of the feature's maximum."""
        red = self.reductions[j]
        return int(np.flatnonzero(red >= red.max() - tol)[0])


def reduction_table(X, y, idx, features, criterion: Criterion) -> ReductionTable:
    """Scan ``features`` (in ascending order); features with no candidates are dropped."""
    kept, thresholds, reductions = [], [], []
    for f in np.sort(np.asarray(features, dtype=np.int64)):
        thr, red = criterion.scan(X, y, idx, int(f))
        if thr.size:
            kept.append(int(f))
            thresholds.append(thr)
            reductions.append(red)
    maxima = np.array([r.max() for r in reductions], dtype=np.float64)
    return ReductionTable(np.array(kept, dtype=np.int64), thresholds, reductions, maxima)


def subspace_size(n_features: int) -> int:
    return max(1, math.isqrt(n_features))


def node_subspace(X, idx, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` features drawn uniformly without replacement among those not constant on the node.

    Features are visited in a random order and constant ones are skipped, so
    the result is a uniform subset of the node's non-constant features (all
    of them when fewer than ``size`` exist, none when the node is constant).
    """
    chosen = []
    for f in rng.permutation(X.shape[1]):
        col = X[idx, f]
        if col.min() < col.max():
            chosen.append(int(f))
            if len(chosen) == size:
                break
    return np.sort(np.array(chosen, dtype=np.int64))


def _best_from_table(table: ReductionTable, tol: float) -> SplitPoint | None:
    if not len(table):
        return None
    best = table.maxima.max()
    j = int(np.flatnonzero(table.maxima >= best - tol)[0])
    i = int(np.flatnonzero(table.reductions[j] >= best - tol)[0])
    return SplitPoint(int(table.features[j]), float(table.thresholds[j][i]))


def _sample_from_table(table: ReductionTable, b1: float, b2: float, rng) -> SplitPoint | None:
    if not len(table):
        return None
    alpha = softmax_temp(normalize(table.maxima), b1)
    j = sample_categorical(alpha, rng)
    beta = softmax_temp(normalize(table.reductions[j]), b2)
    i = sample_categorical(beta, rng)
    return SplitPoint(int(table.features[j]), float(table.thresholds[j][i]))


def best_split(X, y, idx, features, criterion: Criterion) -> SplitPoint | None:
    """Reduction-maximizing split over ``features``.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    table = reduction_table(X, y, idx, features, criterion)
    return _best_from_table(table, _tolerance(table, criterion, y, idx))


def _tolerance(table, criterion, y, idx) -> float:
    if not len(table):
        return 0.0
    return criterion.tie_tolerance(y, idx)


# -- strategies ----------------------------------------------------------------------

@dataclass(frozen=True)
class SplitStrategyConfig:
    """Parameters of one split-selection strategy.

    ``p`` gates DMRF between the optimal and the sampled split, ``b1``/``b2``
    are the feature and threshold softmax temperatures, ``p1``/``p2`` the BRF
    Bernoulli probabilities, ``poisson_mean`` and ``preselect`` the Denil14
    subspace mean and preselected point count.
    """

    variant: str = "dmrf"
    p: float = 0.5
    b1: float = 5.0
    b2: float = 5.0
    p1: float = 0.05
    p2: float = 0.05
    poisson_mean: float = 10.0
    preselect: int = 100

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown split strategy {self.variant!r}; choose from {VARIANTS}")
        for name in ("p", "p1", "p2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        for name in ("b1", "b2"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be finite and nonnegative, got {value}")
        if not self.poisson_mean > 0:
            raise ConfigError(f"poisson_mean must be positive, got {self.poisson_mean}")
        if self.preselect < 1:
            raise ConfigError(f"preselect must be at least 1, got {self.preselect}")


def dmrf_split(X, y, idx, features, cfg: SplitStrategyConfig, criterion: Criterion,
               rng: np.random.Generator) -> SplitPoint | None:
    """Bernoulli(p) choice between the optimal split and a two-stage softmax draw."""
    if rng.random() < cfg.p:
        return best_split(X, y, idx, features, criterion)
    table = reduction_table(X, y, idx, features, criterion)
    return _sample_from_table(table, cfg.b1, cfg.b2, rng)


def mrf_split(X, y, idx, cfg: SplitStrategyConfig, criterion: Criterion,
              rng: np.random.Generator) -> SplitPoint | None:
    """Two-stage softmax draw over the full feature space."""
    table = reduction_table(X, y, idx, np.arange(X.shape[1]), criterion)
    return _sample_from_table(table, cfg.b1, cfg.b2, rng)


def brf_split(X, y, idx, cfg: SplitStrategyConfig, criterion: Criterion,
              rng: np.random.Generator) -> SplitPoint | None:
    """Two Bernoulli gates: subspace of one feature (p1) and random thresholds (p2).

    Under the random-threshold branch every candidate feature draws one
    threshold uniformly and the feature whose drawn threshold reduces
    impurity most wins; otherwise the optimal split of the subspace is used.
    """
    size = 1 if rng.random() < cfg.p1 else subspace_size(X.shape[1])
    features = node_subspace(X, idx, size, rng)
    random_threshold = rng.random() < cfg.p2
    table = reduction_table(X, y, idx, features, criterion)
    if not len(table):
        return None
    if not random_threshold:
        return _best_from_table(table, _tolerance(table, criterion, y, idx))
    picks = [int(rng.integers(len(t))) for t in table.thresholds]
    scores = np.array([r[i] for r, i in zip(table.reductions, picks)])
    j = int(np.flatnonzero(scores >= scores.max() - _tolerance(table, criterion, y, idx))[0])
    return SplitPoint(int(table.features[j]), float(table.thresholds[j][picks[j]]))


def denil14_split(X, y, idx, cfg: SplitStrategyConfig, criterion: Criterion,
                  rng: np.random.Generator) -> SplitPoint | None:
    """Optimal split over a Poisson-sized subspace, thresholds limited to preselected points.

    ``min(1 + Poisson(poisson_mean), D)`` features and ``min(preselect, |node|)``
    node points are drawn without replacement; only the preselected points'
    values are tried as thresholds, each scored on the whole node. When the
    restricted grid is empty the full grid of the subspace is used instead.
    """
    size = min(1 + int(rng.poisson(cfg.poisson_mean)), X.shape[1])
    features = node_subspace(X, idx, size, rng)
    if cfg.preselect < idx.size:
        chosen = rng.choice(idx, cfg.preselect, replace=False)
    else:
        chosen = idx
    table = reduction_table(X, y, idx, features, criterion)
    if not len(table) or chosen is idx:
        return _best_from_table(table, _tolerance(table, criterion, y, idx))
    kept = []
    for j, f in enumerate(table.features):
        mask = np.isin(table.thresholds[j], X[chosen, f])
        if mask.any():
            kept.append((int(f), table.thresholds[j][mask], table.reductions[j][mask]))
    if kept:
        table = ReductionTable(
            np.array([k[0] for k in kept], dtype=np.int64),
            [k[1] for k in kept], [k[2] for k in kept],
            np.array([k[2].max() for k in kept]),
        )
    return _best_from_table(table, _tolerance(table, criterion, y, idx))


def choose_split(X, y, idx, cfg: SplitStrategyConfig, criterion: Criterion,
                 rng: np.random.Generator) -> SplitPoint | None:
    """Select a split for one node according to ``cfg.variant``."""
    if cfg.variant in ("dmrf", "best"):
        features = node_subspace(X, idx, subspace_size(X.shape[1]), rng)
        if cfg.variant == "dmrf":
            return dmrf_split(X, y, idx, features, cfg, criterion, rng)
        return best_split(X, y, idx, features, criterion)
    if cfg.variant == "mrf":
        return mrf_split(X, y, idx, cfg, criterion, rng)
    if cfg.variant == "brf":
        return brf_split(X, y, idx, cfg, criterion, rng)
    return denil14_split(X, y, idx, cfg, criterion, rng)

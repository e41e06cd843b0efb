"""Forest variants: bootstrap schemes, ensemble training and aggregated prediction."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .data import CLASSIFICATION, Dataset
from .errors import ConfigError, DataError
from .splits import SplitStrategyConfig
from .tree import Tree, TreeBuildConfig, build_tree, tree_from_lines, tree_to_lines

FORMAT_TAG = "dmrf-forest 1"

# variant -> (bootstrap scheme, structure/estimation separation, split strategy)
VARIANTS = {
    "DMRF": ("bernoulli", False, "dmrf"),
    "BreimanRF": ("classic", False, "best"),
    "BRF-SE": ("none", True, "brf"),
    "BRF-b": ("bernoulli", False, "brf"),
    "MRF-SE": ("none", True, "mrf"),
    "MRF-b": ("bernoulli", False, "mrf"),
    "Denil14-SE": ("none", True, "denil14"),
    "Denil14-b": ("bernoulli", False, "denil14"),
}

DEFAULT_Q = 1.0 - 1.0 / math.e


@dataclass(frozen=True)
class VariantConfig:
    """Everything that identifies a trained forest, including its master seed.

    Defaults: 100 trees, q = 1 - 1/e, p = 0.5, B1 = B2 = 5, k_n = 5,
    p1 = p2 = 0.05, Poisson mean 10, 100 preselected points, Ratio = 0.5.
    """

    variant: str = "DMRF"
    n_trees: int = 100
    q: float = DEFAULT_Q
    min_node_size: int = 5
    p: float = 0.5
    b1: float = 5.0
    b2: float = 5.0
    p1: float = 0.05
    p2: float = 0.05
    poisson_mean: float = 10.0
    preselect: int = 100
    ratio: float = 0.5
    strict: bool = False
    weighted_mse: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be at least 1, got {self.n_trees}")
        if not 0.0 < self.q <= 1.0:
            raise ConfigError(f"q must lie in (0, 1], got {self.q}")
        if self.se_mode and not 0.0 < self.ratio < 1.0:
            raise ConfigError(f"{self.variant} needs ratio in (0, 1), got {self.ratio}")
        self.tree_config()

    @property
    def bootstrap(self) -> str:
        return VARIANTS[self.variant][0]

    @property
    def se_mode(self) -> bool:
        return VARIANTS[self.variant][1]

    def strategy(self) -> SplitStrategyConfig:
        return SplitStrategyConfig(
            VARIANTS[self.variant][2], self.p, self.b1, self.b2, self.p1, self.p2,
            self.poisson_mean, self.preselect,
        )

    def tree_config(self) -> TreeBuildConfig:
        return TreeBuildConfig(
            self.strategy(), self.min_node_size, self.strict, self.se_mode, self.ratio,
            leaf_sampling=self.variant == "MRF-SE", weighted_mse=self.weighted_mse,
        )

    @classmethod
    def from_dict(cls, values: dict) -> "VariantConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return cls(**values)


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed from a tuple of nonnegative integers."""
    return int(np.random.SeedSequence(list(keys)).generate_state(2, np.uint64)[0] >> np.uint64(1))


def tree_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index``; identical to ``SeedSequence(master).spawn()[index]``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def bootstrap_indices(n: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Keep each of ``range(n)`` independently with probability ``q``; redraw empty samples."""
    if n < 1:
        raise ValueError("cannot bootstrap an empty dataset")
    while True:
        kept = np.flatnonzero(rng.random(n) < q)
        if kept.size:
            return kept


def classic_bootstrap(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws with replacement, sorted; duplicates are kept."""
    return np.sort(rng.integers(0, n, n))


@dataclass
class Forest:
    trees: list[Tree]
    task: str
    n_classes: int
    n_features: int
    config: VariantConfig
    schema: dict

    def tree_predictions(self, X) -> np.ndarray:
        """``(n_trees, n_rows)`` matrix of per-tree labels or values."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DataError(f"expected {self.n_features} features, got shape {X.shape}")
        return np.stack([tree.predict(X) for tree in self.trees])

    def vote_counts(self, X) -> np.ndarray:
        """``(n_rows, n_classes)`` tree votes per class; rows sum to the tree count."""
        if self.task != CLASSIFICATION:
            raise DataError("vote counts only exist for classification forests")
        preds = self.tree_predictions(X)
        votes = np.zeros((preds.shape[1], self.n_classes), dtype=np.int64)
        rows = np.broadcast_to(np.arange(preds.shape[1]), preds.shape)
        np.add.at(votes, (rows.ravel(), preds.ravel() - 1), 1)
        return votes

    def predict(self, X, rng: np.random.Generator | None = None) -> np.ndarray:
        """Majority vote (ties broken uniformly with ``rng``) or the mean of the trees."""
        if self.task != CLASSIFICATION:
            return self.tree_predictions(X).mean(axis=0)
        votes = self.vote_counts(X)
        out = np.argmax(votes, axis=1) + 1
        top = votes.max(axis=1, keepdims=True)
        for row in np.flatnonzero((votes == top).sum(axis=1) > 1):
            if rng is None:
                raise ValueError("a vote tie needs an rng to break it")
            out[row] = rng.choice(np.flatnonzero(votes[row] == top[row])) + 1
        return out


def predict_class(forest: Forest, x, rng: np.random.Generator) -> int:
    if forest.task != CLASSIFICATION:
        raise DataError("predict_class needs a classification forest")
    return int(forest.predict(np.atleast_2d(x), rng)[0])


def predict_value(forest: Forest, x) -> float:
    if forest.task == CLASSIFICATION:
        raise DataError("predict_value needs a regression forest")
    return float(forest.predict(np.atleast_2d(x))[0])


def _training_view(cfg: VariantConfig, indices: np.ndarray, rng) -> np.ndarray:
    if cfg.bootstrap == "bernoulli":
        return indices[bootstrap_indices(indices.size, cfg.q, rng)]
    if cfg.bootstrap == "classic":
        return indices[classic_bootstrap(indices.size, rng)]
    return indices


def _grow(X, y, indices, cfg: VariantConfig, n_classes: int, index: int) -> Tree:
    rng = tree_rng(cfg.seed, index)
    view = _training_view(cfg, indices, rng)
    return build_tree(X, y, view, cfg.tree_config(), rng, n_classes)


_WORKER: dict = {}


def _init_worker(X, y, indices, cfg, n_classes):
    _WORKER.update(X=X, y=y, indices=indices, cfg=cfg, n_classes=n_classes)


def _grow_in_worker(index: int) -> Tree:
    w = _WORKER
    return _grow(w["X"], w["y"], w["indices"], w["cfg"], w["n_classes"], index)


def train_forest(dataset: Dataset, cfg: VariantConfig, indices=None, jobs: int = 1) -> Forest:
    """Train ``cfg.n_trees`` trees on ``dataset`` (restricted to ``indices`` when given).

    Tree ``i`` draws from :func:`tree_rng` ``(cfg.seed, i)``, so the forest
    does not depend on ``jobs`` or on completion order.
    """
    X = np.ascontiguousarray(dataset.features)
    y = np.ascontiguousarray(dataset.targets)
    idx = np.arange(dataset.n) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise DataError("empty training set")
    c = dataset.n_classes
    if jobs > 1 and cfg.n_trees > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker,
                                 initargs=(X, y, idx, cfg, c)) as pool:
            trees = list(pool.map(_grow_in_worker, range(cfg.n_trees),
                                  chunksize=max(1, cfg.n_trees // (4 * jobs))))
    else:
        trees = [_grow(X, y, idx, cfg, c, i) for i in range(cfg.n_trees)]
    schema = {
        "class_names": list(dataset.class_names),
        "feature_names": list(dataset.feature_names),
        "feature_levels": list(dataset.feature_levels),
        "label_name": dataset.label_name,
        "dataset": dataset.name,
    }
    return Forest(trees, dataset.task, c, dataset.n_features, cfg, schema)


# -- persistence ---------------------------------------------------------------------

def dumps_forest(forest: Forest) -> str:
    """Serialize: a format tag, one JSON header line, then every tree in text form."""
    header = {
        "task": forest.task,
        "n_classes": forest.n_classes,
        "n_features": forest.n_features,
        "config": asdict(forest.config),
        "schema": forest.schema,
    }
    lines = [FORMAT_TAG, json.dumps(header, sort_keys=True)]
    for tree in forest.trees:
        lines.extend(tree_to_lines(tree))
    return "\n".join(lines) + "\n"


def loads_forest(text: str) -> Forest:
    lines = text.splitlines()
    if len(lines) < 2 or lines[0] != FORMAT_TAG:
        raise DataError("not a serialized forest")
    header = json.loads(lines[1])
    cfg = VariantConfig.from_dict(header["config"])
    n_classes = int(header["n_classes"])
    trees, pos = [], 2
    while pos < len(lines):
        n_nodes = int(lines[pos].split()[1])
        trees.append(tree_from_lines(lines[pos:pos + n_nodes + 1], n_classes))
        pos += n_nodes + 1
    if len(trees) != cfg.n_trees:
        raise DataError(f"header declares {cfg.n_trees} trees, file holds {len(trees)}")
    return Forest(trees, header["task"], n_classes, int(header["n_features"]), cfg, header["schema"])


def save_forest(forest: Forest, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_forest(forest))


def load_forest(path) -> Forest:
    try:
        with open(path) as fh:
            return loads_forest(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc


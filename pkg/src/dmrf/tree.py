"""Binary decision trees: construction, leaf payloads, prediction and text format.

A tree is stored as parallel node arrays. Node 0 is the root; internal
nodes have ``feature >= 0`` and route ``x[feature] <= threshold`` to
``left``; leaves have ``feature == -1`` and carry ``value`` (a 1-based class
label or a mean), the number of samples the payload was computed from, and
for classification the class-frequency vector ``votes``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import structure_estimation_split
from .errors import ConfigError, DataError
from .splits import Criterion, SplitStrategyConfig, choose_split, sample_categorical


@dataclass(frozen=True)
class TreeBuildConfig:
    """How one tree grows.

    Nodes with fewer than ``min_node_size`` (k_n) samples become leaves. In
    ``strict`` mode a split is only admissible when both children keep at
    least ``min_node_size`` samples. ``se_mode`` splits the training view
    into structure and estimation parts at ``ratio``; ``leaf_sampling``
    draws classification leaf labels from the leaf's class frequencies.
    """

    strategy: SplitStrategyConfig = field(default_factory=SplitStrategyConfig)
    min_node_size: int = 5
    strict: bool = False
    se_mode: bool = False
    ratio: float = 0.5
    leaf_sampling: bool = False
    weighted_mse: bool = False

    def __post_init__(self):
        if self.min_node_size < 1:
            raise ConfigError(f"min_node_size must be at least 1, got {self.min_node_size}")
        if self.se_mode and not 0.0 < self.ratio < 1.0:
            raise ConfigError(f"ratio must lie in (0, 1), got {self.ratio}")


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    votes: np.ndarray
    n_classes: int = 0

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Index of the leaf reached by each row of ``X``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError("expected a 2-D feature matrix")
        return _kernels.route(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X) -> np.ndarray:
        values = self.value[self.apply(X)]
        return values.astype(np.int64) if self.n_classes else values


# -- leaf payloads -----------------------------------------------------------------------

def leaf_label_classification(labels, n_classes: int) -> tuple[np.ndarray, int]:
    """Class frequencies of 1-based ``labels`` and the majority label (ties to the lowest)."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("empty leaf")
    votes = np.bincount(labels - 1, minlength=n_classes) / labels.size
    return votes, int(np.argmax(votes)) + 1


def leaf_label_regression(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty leaf")
    return float(values.mean())


def mrf_se_leaf_label(labels, n_classes: int, rng: np.random.Generator) -> int:
    """Label drawn from the leaf's class frequencies."""
    votes, _ = leaf_label_classification(labels, n_classes)
    return sample_categorical(votes, rng) + 1


# -- construction -------------------------------------------------------------------------

def _is_pure(y, idx) -> bool:
    first = y[idx[0]]
    return bool(np.all(y[idx] == first))


def build_tree(X, y, indices, cfg: TreeBuildConfig, rng: np.random.Generator,
               n_classes: int = 0) -> Tree:
    """Grow one tree on the rows ``indices`` of ``(X, y)``.

    ``y`` holds 0-based class codes when ``n_classes > 0`` and real targets
    otherwise. A node becomes a leaf when it holds fewer than k_n samples,
    is label-pure, or the strategy finds no admissible split. In SE mode
    splits are chosen from structure rows only and leaves are labeled from
    the estimation rows that reach them, falling back to structure rows when
    none do.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64 if n_classes else np.float64)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise DataError("cannot build a tree from an empty training view")
    if cfg.se_mode:
        structure, estimation = structure_estimation_split(indices, cfg.ratio, rng)
    else:
        structure, estimation = indices, None
    criterion = Criterion(n_classes, cfg.min_node_size if cfg.strict else 1, cfg.weighted_mse)
    k_n = cfg.min_node_size

    feature, threshold, left, right, value, count, votes = [], [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        count.append(0)
        votes.append(None)
        return len(feature) - 1

    stack = [(new_node(), structure, estimation)]
    while stack:
        node, s_idx, e_idx = stack.pop()
        split = None
        if s_idx.size >= k_n and not _is_pure(y, s_idx):
            split = choose_split(X, y, s_idx, cfg.strategy, criterion, rng)
        if split is None:
            payload = e_idx if e_idx is not None and e_idx.size else s_idx
            count[node] = payload.size
            if n_classes:
                freq, label = leaf_label_classification(y[payload] + 1, n_classes)
                if cfg.leaf_sampling:
                    label = sample_categorical(freq, rng) + 1
                votes[node] = freq
                value[node] = float(label)
            else:
                value[node] = leaf_label_regression(y[payload])
            continue
        f, v = split.feature, split.threshold
        go_left = X[s_idx, f] <= v
        children = [s_idx[go_left], s_idx[~go_left]]
        if e_idx is not None:
            e_left = X[e_idx, f] <= v
            e_children = [e_idx[e_left], e_idx[~e_left]]
        else:
            e_children = [None, None]
        feature[node], threshold[node], count[node] = f, v, s_idx.size
        left[node], right[node] = new_node(), new_node()
        stack.append((right[node], children[1], e_children[1]))
        stack.append((left[node], children[0], e_children[0]))

    n_nodes = len(feature)
    vote_matrix = np.zeros((n_nodes, n_classes))
    for node, freq in enumerate(votes):
        if freq is not None:
            vote_matrix[node] = freq
    # renumber in preorder so a tree equals its own text round trip
    order, stack = [], [0]
    while stack:
        node = stack.pop()
        order.append(node)
        if feature[node] >= 0:
            stack.extend((right[node], left[node]))
    order = np.array(order, dtype=np.int64)
    new_id = np.empty(n_nodes, dtype=np.int64)
    new_id[order] = np.arange(n_nodes)
    feature_arr = np.array(feature, dtype=np.int64)[order]
    internal = feature_arr >= 0
    left_arr = np.full(n_nodes, -1, dtype=np.int64)
    right_arr = np.full(n_nodes, -1, dtype=np.int64)
    left_arr[internal] = new_id[np.array(left, dtype=np.int64)[order][internal]]
    right_arr[internal] = new_id[np.array(right, dtype=np.int64)[order][internal]]
    return Tree(
        feature_arr, np.array(threshold, dtype=np.float64)[order], left_arr, right_arr,
        np.array(value, dtype=np.float64)[order], np.array(count, dtype=np.int64)[order],
        vote_matrix[order], n_classes,
    )


def predict_tree(tree: Tree, x, n_features: int | None = None):
    """Prediction of ``tree`` for a single feature vector ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or (n_features is not None and x.size != n_features):
        raise DataError(f"expected a feature vector of length {n_features}, got shape {x.shape}")
    node = 0
    while tree.feature[node] >= 0:
        f = tree.feature[node]
        if f >= x.size:
            raise DataError(f"feature vector has {x.size} components, tree uses index {f}")
        node = tree.left[node] if x[f] <= tree.threshold[node] else tree.right[node]
    return int(tree.value[node]) if tree.n_classes else float(tree.value[node])


# -- text format --------------------------------------------------------------------------
#
#   tree <n_nodes>
#   S <feature> <threshold>                  internal node, children follow in preorder
#   L <value> <count> [<vote_1> ... <vote_c>] leaf
#
# Floats are written with repr(), which round-trips exactly.

def tree_to_lines(tree: Tree) -> list[str]:
    lines = [f"tree {tree.n_nodes}"]
    stack = [0]
    while stack:
        node = stack.pop()
        if tree.feature[node] >= 0:
            lines.append(f"S {tree.feature[node]} {float(tree.threshold[node])!r}")
            stack.append(int(tree.right[node]))
            stack.append(int(tree.left[node]))
        else:
            parts = ["L", repr(float(tree.value[node])), str(int(tree.count[node]))]
            parts += [repr(float(v)) for v in tree.votes[node]]
            lines.append(" ".join(parts))
    return lines


def tree_from_lines(lines: list[str], n_classes: int) -> Tree:
    head = lines[0].split()
    if len(head) != 2 or head[0] != "tree":
        raise DataError(f"expected a 'tree <n>' header, got {lines[0]!r}")
    n_nodes = int(head[1])
    if len(lines) != n_nodes + 1:
        raise DataError(f"tree declares {n_nodes} nodes but has {len(lines) - 1} lines")
    feature = np.full(n_nodes, -1, dtype=np.int64)
    threshold = np.zeros(n_nodes)
    left = np.full(n_nodes, -1, dtype=np.int64)
    right = np.full(n_nodes, -1, dtype=np.int64)
    value = np.zeros(n_nodes)
    count = np.zeros(n_nodes, dtype=np.int64)
    votes = np.zeros((n_nodes, n_classes))
    # Preorder ids: node i's left child is i + 1; its right child follows the left subtree.
    pending: list[int] = []
    for node, line in enumerate(lines[1:]):
        parts = line.split()
        if parts[0] == "S":
            feature[node] = int(parts[1])
            threshold[node] = float(parts[2])
            left[node] = node + 1
            pending.append(node)
        elif parts[0] == "L":
            value[node] = float(parts[1])
            count[node] = int(parts[2])
            if len(parts) != 3 + n_classes:
                raise DataError(f"leaf line has {len(parts) - 3} votes, expected {n_classes}")
            votes[node] = [float(v) for v in parts[3:]]
            if pending and node + 1 < n_nodes:
                right[pending.pop()] = node + 1
        else:
            raise DataError(f"unknown node line {line!r}")
    if pending:
        raise DataError("truncated tree: internal node without a right subtree")
    return Tree(feature, threshold, left, right, value, count, votes, n_classes)

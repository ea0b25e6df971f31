"""Random forest for probability estimation, written from first principles.

Trees are grown on full-size bootstrap resamples by recursive binary
splitting on the Gini criterion, with a fresh uniform draw of ``mtry``
candidate features at every node and ties between equally good splits
broken uniformly at random.  Leaves store bootstrap-weighted class
proportions; the forest estimates probabilities by averaging those
proportions across trees (the probability-machine estimate) or,
alternatively, by the fraction of trees voting for each class.

Two implementations coexist on purpose.  ``gini_impurity``,
``best_split``, and ``grow_tree`` are transparent reference routines
operating on explicit node objects; ``fit_forest`` runs compiled
kernels over flat arrays for speed.  Both follow the same contract, and
the test suite holds them to each other.

Split eligibility (strictly positive impurity decrease) is decided in
exact integer arithmetic on the bootstrap counts, which is why training
sets are capped at 50000 cases: beyond that the comparison could
overflow 64-bit integers.

The ``node_size_rule`` flag controls what ``min_node_size`` bounds:
``child`` (default) requires both children of every split to carry at
least that much bootstrap weight; ``parent`` only requires a node to
exceed it before it may be split, so leaves can be smaller.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _tree_kernels as _k
from .rng import tree_seeds
from .synthetic import Dataset

__all__ = [
    "Forest",
    "ForestParams",
    "Split",
    "TreeNode",
    "best_split",
    "bootstrap_sample",
    "fit_forest",
    "gini_impurity",
    "grow_tree",
    "load_forest",
    "predict_oob",
    "predict_proba",
    "save_forest",
]

FOREST_FORMAT_VERSION = 1

MAX_TRAIN_CASES = 50_000

VOTE_MODES = ("proportion_average", "majority_vote_fraction")
NODE_SIZE_RULES = ("child", "parent")


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters.

    ``mtry=None`` resolves to ceil(sqrt(P)) when fitting.
    """

    n_tree: int = 500
    mtry: int | None = None
    min_node_size: int = 2
    vote_mode: str = "proportion_average"
    node_size_rule: str = "child"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_tree < 1:
            raise ValueError("n_tree must be >= 1")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.vote_mode not in VOTE_MODES:
            raise ValueError(f"vote_mode must be one of {VOTE_MODES}")
        if self.node_size_rule not in NODE_SIZE_RULES:
            raise ValueError(f"node_size_rule must be one of {NODE_SIZE_RULES}")

    def resolve_mtry(self, n_features: int) -> int:
        if self.mtry is None:
            # isqrt(P - 1) + 1 == ceil(sqrt(P)) for P >= 1
            mtry = math.isqrt(n_features - 1) + 1
        else:
            mtry = self.mtry
        if not 1 <= mtry <= n_features:
            raise ValueError(f"mtry={mtry} outside 1..{n_features}")
        return mtry


@dataclass(frozen=True)
class Split:
    """A committed split; cases with value <= threshold go left."""

    feature: int
    threshold: float
    gain: float


@dataclass(frozen=True)
class TreeNode:
    """Internal node (split with two children) or leaf (proportions).

    ``n_cases`` is the bootstrap weight reaching the node.
    """

    n_cases: int
    split: Split | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    class_proportions: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass
class Forest:
    """A fitted forest over flat node arrays.

    ``feature`` is -1 at leaves; ``left``/``right`` index into the same
    arrays; tree t occupies rows tree_offsets[t]:tree_offsets[t+1] with
    its root first.  ``classes`` maps probability columns back to the
    original labels.  ``inbag_counts`` row t holds tree t's bootstrap
    multiplicities.
    """

    params: ForestParams
    classes: np.ndarray
    n_features: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    node_weight: np.ndarray
    node_gain: np.ndarray
    leaf_prop: np.ndarray
    tree_offsets: np.ndarray
    inbag_counts: np.ndarray

    @property
    def n_tree(self) -> int:
        return len(self.tree_offsets) - 1

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_train(self) -> int:
        return self.inbag_counts.shape[1]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return predict_proba(self, x)

    def tree(self, t: int) -> TreeNode:
        """Materialize tree t as linked TreeNode objects (for inspection)."""
        if not 0 <= t < self.n_tree:
            raise IndexError(f"tree index {t} outside 0..{self.n_tree - 1}")
        lo, hi = int(self.tree_offsets[t]), int(self.tree_offsets[t + 1])
        nodes: dict[int, TreeNode] = {}
        for i in range(hi - 1, lo - 1, -1):
            if self.feature[i] < 0:
                nodes[i] = TreeNode(
                    n_cases=int(self.node_weight[i]),
                    class_proportions=self.leaf_prop[i].copy(),
                )
            else:
                nodes[i] = TreeNode(
                    n_cases=int(self.node_weight[i]),
                    split=Split(
                        feature=int(self.feature[i]),
                        threshold=float(self.threshold[i]),
                        gain=float(self.node_gain[i]),
                    ),
                    left=nodes[int(self.left[i])],
                    right=nodes[int(self.right[i])],
                )
        return nodes[lo]


def gini_impurity(class_counts) -> float:
    """1 - sum of squared class shares."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or len(counts) == 0:
        raise ValueError("class_counts must be a non-empty vector")
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total < 1:
        raise ValueError("empty node has no impurity")
    shares = counts / total
    return float(1.0 - np.sum(shares * shares))


def _as_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights)
    if w.shape != (n,):
        raise ValueError("weights must have one entry per case")
    if not np.all(w == np.floor(w)) or np.any(w < 0):
        raise ValueError("weights must be non-negative integer multiplicities")
    w = w.astype(np.int64)
    if w.sum() < 1:
        raise ValueError("total bootstrap weight must be >= 1")
    if w.sum() > MAX_TRAIN_CASES:
        raise ValueError(f"supports at most {MAX_TRAIN_CASES} bootstrap cases")
    return w


def best_split(
    x: np.ndarray,
    y: np.ndarray,
    weights,
    features,
    min_node_size: int,
    rng: np.random.Generator,
    node_size_rule: str = "child",
) -> Split | None:
    """Best Gini split of the weighted cases over a feature subset.

    Candidate thresholds are midpoints of consecutive distinct values
    present in the node.  Returns a split with maximal impurity decrease
    (ties uniform via ``rng``), or None when no candidate has strictly
    positive gain or, under the child rule, none leaves both children
    with at least ``min_node_size`` bootstrap cases.  Gain positivity is
    decided exactly on the integer counts.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    w = _as_weights(weights, len(x))
    if node_size_rule not in NODE_SIZE_RULES:
        raise ValueError(f"node_size_rule must be one of {NODE_SIZE_RULES}")
    rows = np.flatnonzero(w > 0)
    k = int(y.max()) + 1 if len(y) else 0
    cls_total = np.bincount(y[rows], weights=w[rows], minlength=k).astype(np.int64)
    w_total = int(cls_total.sum())
    ap = int(np.sum(cls_total * cls_total))

    candidates: list[tuple[float, int, float]] = []  # (score, feature, threshold)
    best_score = -1.0
    for f in features:
        fv = x[rows, int(f)]
        order = np.argsort(fv)
        sorted_rows = rows[order]
        sorted_vals = fv[order]
        cls_left = np.zeros(k, dtype=np.int64)
        w_left = 0
        for j in range(len(sorted_rows) - 1):
            case = sorted_rows[j]
            cls_left[y[case]] += w[case]
            w_left += int(w[case])
            if sorted_vals[j] == sorted_vals[j + 1]:
                continue
            w_right = w_total - w_left
            if node_size_rule == "child" and (w_left < min_node_size or w_right < min_node_size):
                continue
            cls_right = cls_total - cls_left
            al = int(np.sum(cls_left * cls_left))
            ar = int(np.sum(cls_right * cls_right))
            if al * w_right * w_total + ar * w_left * w_total - ap * w_left * w_right <= 0:
                continue
            score = al / w_left + ar / w_right
            if score > best_score:
                best_score = score
                candidates = [(score, int(f), 0.5 * (sorted_vals[j] + sorted_vals[j + 1]))]
            elif score == best_score:
                candidates.append((score, int(f), 0.5 * (sorted_vals[j] + sorted_vals[j + 1])))
    if not candidates:
        return None
    score, feat, thr = candidates[int(rng.integers(len(candidates)))]
    gain = (score - ap / w_total) / w_total
    return Split(feature=feat, threshold=thr, gain=float(gain))


def grow_tree(
    data: Dataset,
    bootstrap_weights,
    params: ForestParams,
    rng: np.random.Generator,
) -> TreeNode:
    """Reference recursive tree growth; returns the root TreeNode.

    At each node a fresh uniform subset of ``mtry`` features is drawn
    from ``rng``; the node becomes a leaf when ``best_split`` finds no
    eligible split.  Leaf proportions are bootstrap-weighted.
    """
    x = data.x
    classes, y_idx = np.unique(data.y, return_inverse=True)
    k = len(classes)
    w = _as_weights(bootstrap_weights, len(x))
    mtry = params.resolve_mtry(x.shape[1])
    child_rule = params.node_size_rule == "child"
    mns = params.min_node_size

    def build(weights: np.ndarray) -> TreeNode:
        cls = np.bincount(y_idx, weights=weights, minlength=k).astype(np.int64)
        w_total = int(cls.sum())
        split = None
        splittable = w_total >= 2 * mns if child_rule else w_total > mns
        if splittable and np.count_nonzero(cls) > 1:
            feats = rng.choice(x.shape[1], size=mtry, replace=False)
            split = best_split(x, y_idx, weights, feats, mns, rng, params.node_size_rule)
        if split is None:
            return TreeNode(n_cases=w_total, class_proportions=cls / w_total)
        go_left = x[:, split.feature] <= split.threshold
        left = build(np.where(go_left, weights, 0))
        right = build(np.where(~go_left, weights, 0))
        return TreeNode(n_cases=w_total, split=split, left=left, right=right)

    return build(w)


def bootstrap_sample(n: int, rng: np.random.Generator) -> np.ndarray:
    """Multiplicity vector of a full-size bootstrap draw (sums to n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)


def fit_forest(data: Dataset, params: ForestParams) -> Forest:
    """Grow a forest on independent full-size bootstrap resamples.

    Each tree's random stream is derived from (seed, tree index), so
    results do not depend on construction order or thread count.
    """
    x = data.x
    n, p = x.shape
    if n < 2:
        raise ValueError("need at least 2 training cases")
    if n > MAX_TRAIN_CASES:
        raise ValueError(f"supports at most {MAX_TRAIN_CASES} training cases")
    classes, y_idx = np.unique(data.y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("training data contains a single class; nothing to model")
    k = len(classes)
    mtry = params.resolve_mtry(p)
    mns = params.min_node_size
    child_rule = params.node_size_rule == "child"

    if child_rule:
        cap = 2 * max(1, n // max(mns, 1)) + 1
    else:
        cap = 2 * n + 1
    total_cap = params.n_tree * cap

    feature = np.empty(total_cap, dtype=np.int64)
    threshold = np.empty(total_cap, dtype=np.float64)
    left = np.empty(total_cap, dtype=np.int64)
    right = np.empty(total_cap, dtype=np.int64)
    weight = np.empty(total_cap, dtype=np.int64)
    gain = np.empty(total_cap, dtype=np.float64)
    leafp = np.empty((total_cap, k), dtype=np.float64)
    tree_offsets = np.empty(params.n_tree + 1, dtype=np.int64)
    inbag = np.empty((params.n_tree, n), dtype=np.int64)

    seeds = tree_seeds(params.seed, params.n_tree)
    total = _k.grow_forest(
        np.ascontiguousarray(x), y_idx.astype(np.int64), k, seeds, mtry, mns,
        child_rule, True, feature, threshold, left, right, weight, gain, leafp,
        tree_offsets, inbag,
    )
    return Forest(
        params=params,
        classes=classes.astype(np.int64),
        n_features=p,
        feature=feature[:total].copy(),
        threshold=threshold[:total].copy(),
        left=left[:total].copy(),
        right=right[:total].copy(),
        node_weight=weight[:total].copy(),
        node_gain=gain[:total].copy(),
        leaf_prop=leafp[:total].copy(),
        tree_offsets=tree_offsets,
        inbag_counts=inbag,
    )


def _check_predict_input(forest: Forest, x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != forest.n_features:
        raise ValueError(
            f"forest was fit on {forest.n_features} features, got input of shape {x.shape}"
        )
    return x


def predict_proba(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Class probability estimates, one column per entry of ``forest.classes``.

    ``proportion_average`` averages leaf class proportions across trees;
    ``majority_vote_fraction`` counts each tree's winning class (ties
    split evenly).  Rows sum to 1.
    """
    x = _check_predict_input(forest, x)
    out = np.zeros((len(x), forest.n_classes), dtype=np.float64)
    majority = forest.params.vote_mode == "majority_vote_fraction"
    _k.predict_forest(
        forest.feature, forest.threshold, forest.left, forest.right,
        forest.leaf_prop, forest.tree_offsets, x, majority, out,
    )
    return out


def predict_oob(forest: Forest, data: Dataset) -> np.ndarray:
    """Out-of-bag probability estimates on the training data.

    Case i is averaged only over trees whose bootstrap sample excluded
    it; rows that are in-bag for every tree come back as NaN.
    """
    x = _check_predict_input(forest, data.x)
    if len(x) != forest.n_train:
        raise ValueError(
            f"forest was fit on {forest.n_train} cases, got {len(x)}; out-of-bag "
            "prediction is only defined on the training data"
        )
    out = np.zeros((len(x), forest.n_classes), dtype=np.float64)
    n_oob = np.zeros(len(x), dtype=np.int64)
    majority = forest.params.vote_mode == "majority_vote_fraction"
    _k.predict_oob(
        forest.feature, forest.threshold, forest.left, forest.right,
        forest.leaf_prop, forest.tree_offsets, forest.inbag_counts, x, majority,
        out, n_oob,
    )
    return out


def save_forest(forest: Forest, path: str) -> None:
    """Serialize to .npz; arrays round-trip bit-exactly."""
    params = forest.params
    np.savez_compressed(
        path,
        format_version=np.int64(FOREST_FORMAT_VERSION),
        params_json=np.frombuffer(
            json.dumps({
                "n_tree": params.n_tree,
                "mtry": params.mtry,
                "min_node_size": params.min_node_size,
                "vote_mode": params.vote_mode,
                "node_size_rule": params.node_size_rule,
                "seed": params.seed,
            }).encode(), dtype=np.uint8,
        ),
        classes=forest.classes,
        n_features=np.int64(forest.n_features),
        feature=forest.feature,
        threshold=forest.threshold,
        left=forest.left,
        right=forest.right,
        node_weight=forest.node_weight,
        node_gain=forest.node_gain,
        leaf_prop=forest.leaf_prop,
        tree_offsets=forest.tree_offsets,
        inbag_counts=forest.inbag_counts,
    )


def load_forest(path: str) -> Forest:
    with np.load(path) as z:
        if "format_version" not in z:
            raise ValueError(f"{path} is not a saved forest")
        version = int(z["format_version"])
        if version != FOREST_FORMAT_VERSION:
            raise ValueError(f"unsupported forest version {version}")
        params = ForestParams(**json.loads(z["params_json"].tobytes().decode()))
        return Forest(
            params=params,
            classes=z["classes"],
            n_features=int(z["n_features"]),
            feature=z["feature"],
            threshold=z["threshold"],
            left=z["left"],
            right=z["right"],
            node_weight=z["node_weight"],
            node_gain=z["node_gain"],
            leaf_prop=z["leaf_prop"],
            tree_offsets=z["tree_offsets"],
            inbag_counts=z["inbag_counts"],
        )

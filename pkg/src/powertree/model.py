"""Regression models over activity counts.

Greedy binary regression trees (variance-minimizing CART), an ordinary
least-squares baseline, frequency-scaled prediction, additive ensembles of
per-component trees, and the MAE% metric used throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .workload import Dataset

__all__ = [
    "HyperParams",
    "TreeNode",
    "DecisionTree",
    "LinearModel",
    "EnsembleModel",
    "fit_tree",
    "best_split",
    "predict_tree",
    "predict_tree_batch",
    "feature_importances",
    "fit_linear",
    "predict_linear",
    "predict_linear_batch",
    "scale_prediction",
    "predict_ensemble",
    "mae_percent",
    "save_tree",
    "load_tree",
    "save_linear",
    "load_linear",
    "rule_text",
]


@dataclass(frozen=True)
class HyperParams:
    """Tree growth limits.

    min_leaf_impurity is a dimensionless stopping rule: a node may only be
    split while its target variance is at least that fraction of the root's
    target variance.
    """

    max_depth: int = 6
    min_split_sample: int = 5
    min_leaf_sample: int = 5
    min_leaf_impurity: float = 0.01

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_split_sample < 2:
            raise ValueError("min_split_sample must be >= 2")
        if self.min_leaf_sample < 1:
            raise ValueError("min_leaf_sample must be >= 1")
        if not (0.0 <= self.min_leaf_impurity < 1.0):
            raise ValueError("min_leaf_impurity must lie in [0, 1)")


@dataclass
class TreeNode:
    """Decision node (feature, threshold, children) or leaf (value).

    n_samples and impurity (population variance of the training targets that
    reached the node, in W^2) are kept on every node; decision nodes also
    record the impurity decrease their split achieved.
    """

    n_samples: int
    impurity: float
    value: float | None = None
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    reduction: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.value is not None


@dataclass
class DecisionTree:
    root: TreeNode
    depth: int
    n_features: int
    model_freq: float
    feature_ids: tuple[str, ...]
    _flat: dict | None = field(default=None, repr=False, compare=False)

    def nodes_preorder(self) -> list[TreeNode]:
        out: list[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            if not node.is_leaf:
                stack.append(node.right)  # type: ignore[arg-type]
                stack.append(node.left)  # type: ignore[arg-type]
        return out

    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes_preorder() if n.is_leaf)


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # watts per count
    intercept: float
    model_freq: float
    feature_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class EnsembleModel:
    """Additive combination of per-component trees over disjoint features."""

    components: tuple[tuple[DecisionTree, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for tree, ids in self.components:
            if len(ids) != tree.n_features:
                raise ValueError("feature-id subset must match the tree width")
            overlap = seen & set(ids)
            if overlap:
                raise ValueError(f"component feature sets overlap: {sorted(overlap)}")
            seen |= set(ids)


def _best_split_all(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (feature, threshold, impurity_decrease) over all features.

    Scans midpoints of consecutive distinct sorted values per feature and
    maximizes the decrease of mean squared deviation:
    var(parent) - weighted var(children).  Candidates leaving a child with
    fewer than min_leaf samples are skipped.  Ties resolve to the lowest
    feature index, then the lowest threshold.  Returns None when no candidate
    achieves a strictly positive decrease.

    Per-feature candidates are ranked with sorted prefix sums; the finalists
    are then re-scored from subset variances so that features inducing the
    same partition get bitwise-identical scores and the feature-index tie
    rule is honored regardless of summation order.
    """
    m, n_feat = X.shape
    if m < 2 or m < 2 * min_leaf:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    cy = np.cumsum(ys, axis=0)
    cyy = np.cumsum(ys * ys, axis=0)
    tot_y, tot_yy = cy[-1], cyy[-1]
    nl = np.arange(1, m, dtype=np.float64)[:, None]
    nr = m - nl
    sl, ql = cy[:-1], cyy[:-1]
    sr, qr = tot_y - sl, tot_yy - ql
    sse_l = ql - sl * sl / nl
    sse_r = qr - sr * sr / nr
    sse_p = tot_yy - tot_y * tot_y / m
    red = (sse_p - sse_l - sse_r) / m
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        k = np.arange(1, m)[:, None]
        valid &= (k >= min_leaf) & (m - k >= min_leaf)
    red = np.where(valid, red, -np.inf)
    pos = np.argmax(red, axis=0)
    fast = red[pos, np.arange(n_feat)]

    parent_sse = np.var(y) * m
    best = None
    for j in range(n_feat):
        if not fast[j] > -np.inf:
            continue
        r = int(pos[j])
        thr = 0.5 * (xs[r, j] + xs[r + 1, j])
        mask = X[:, j] <= thr
        n_left = int(mask.sum())
        sse = np.var(y[mask]) * n_left + np.var(y[~mask]) * (m - n_left)
        score = (parent_sse - sse) / m
        if score > 0.0 and (best is None or score > best[2]):
            best = (j, float(thr), float(score))
    return best


def best_split(features: np.ndarray, targets: np.ndarray, feature_index: int,
               min_leaf_sample: int = 1):
    """Best threshold for one feature, or None if nothing reduces variance.

    Returns (threshold, impurity_decrease); samples with
    feature <= threshold go left.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("features must be (n, F) with targets (n,)")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not (0 <= feature_index < X.shape[1]):
        raise ValueError("feature_index out of range")
    res = _best_split_all(X[:, [feature_index]], y, min_leaf_sample)
    if res is None:
        return None
    _, thr, red = res
    return thr, red


def fit_tree(dataset: Dataset, hp: HyperParams) -> DecisionTree:
    """Grow a variance-minimizing binary regression tree.

    A node becomes a leaf when it is at max_depth, holds fewer than
    min_split_sample samples, is pure, falls below the min_leaf_impurity
    variance fraction, or no candidate split reduces variance (candidates
    that would starve a child below min_leaf_sample are skipped).
    """
    if len(dataset) == 0:
        raise ValueError("cannot fit on an empty dataset")
    X = dataset.features.astype(np.float64)
    y = dataset.powers.astype(np.float64)
    root_var = float(np.var(y))

    def build(rows: np.ndarray, depth: int) -> tuple[TreeNode, int]:
        yy = y[rows]
        m = int(rows.size)
        var = float(np.var(yy))
        leaf = TreeNode(n_samples=m, impurity=var, value=float(yy.mean()))
        if depth >= hp.max_depth or m < hp.min_split_sample:
            return leaf, depth
        if np.all(yy == yy[0]):
            return leaf, depth
        if root_var == 0.0 or var / root_var < hp.min_leaf_impurity:
            return leaf, depth
        found = _best_split_all(X[rows], yy, hp.min_leaf_sample)
        if found is None:
            return leaf, depth
        j, thr, red = found
        mask = X[rows, j] <= thr
        left, dl = build(rows[mask], depth + 1)
        right, dr = build(rows[~mask], depth + 1)
        node = TreeNode(n_samples=m, impurity=var, feature=j, threshold=thr,
                        left=left, right=right, reduction=red)
        return node, max(dl, dr)

    root, depth = build(np.arange(len(dataset), dtype=np.intp), 0)
    return DecisionTree(root, depth, dataset.n_features, dataset.clock_freq,
                        dataset.feature_names)


def predict_tree(tree: DecisionTree, features) -> float:
    """Root-to-leaf traversal for one feature vector."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (tree.n_features,):
        raise ValueError(f"expected {tree.n_features} features, got shape {x.shape}")
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return float(node.value)


def _flatten(tree: DecisionTree) -> dict:
    if tree._flat is None:
        nodes = tree.nodes_preorder()
        index = {id(n): i for i, n in enumerate(nodes)}
        n = len(nodes)
        flat = {
            "feature": np.zeros(n, dtype=np.intp),
            "threshold": np.zeros(n, dtype=np.float64),
            "left": np.zeros(n, dtype=np.intp),
            "right": np.zeros(n, dtype=np.intp),
            "value": np.zeros(n, dtype=np.float64),
            "is_leaf": np.zeros(n, dtype=bool),
        }
        for i, node in enumerate(nodes):
            if node.is_leaf:
                flat["is_leaf"][i] = True
                flat["value"][i] = node.value
            else:
                flat["feature"][i] = node.feature
                flat["threshold"][i] = node.threshold
                flat["left"][i] = index[id(node.left)]
                flat["right"][i] = index[id(node.right)]
        tree._flat = flat
    return tree._flat


def predict_tree_batch(tree: DecisionTree, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise ValueError(f"expected (n, {tree.n_features}) features")
    flat = _flatten(tree)
    idx = np.zeros(X.shape[0], dtype=np.intp)
    for _ in range(tree.depth + 1):
        active = ~flat["is_leaf"][idx]
        if not active.any():
            break
        cur = idx[active]
        go_left = X[active, flat["feature"][cur]] <= flat["threshold"][cur]
        idx[active] = np.where(go_left, flat["left"][cur], flat["right"][cur])
    return flat["value"][idx]


def feature_importances(tree: DecisionTree) -> np.ndarray:
    """Per-feature sum of (sample fraction x impurity decrease), normalized
    to unit sum.  All zeros for a single-leaf tree."""
    imp = np.zeros(tree.n_features, dtype=np.float64)
    n_root = tree.root.n_samples
    for node in tree.nodes_preorder():
        if not node.is_leaf:
            imp[node.feature] += node.n_samples / n_root * node.reduction
    total = imp.sum()
    return imp / total if total > 0 else imp


def fit_linear(dataset: Dataset) -> LinearModel:
    """Ordinary least squares on raw activity counts.

    Solves centered normal equations; an exactly collinear design matrix
    falls back to a 1e-8 ridge term.
    """
    n, n_feat = len(dataset), dataset.n_features
    if n <= n_feat:
        raise ValueError("need more samples than features")
    X = dataset.features.astype(np.float64)
    y = dataset.powers.astype(np.float64)
    xm = X.mean(axis=0)
    ym = float(y.mean())
    Xc = X - xm
    g = Xc.T @ Xc
    b = Xc.T @ (y - ym)
    try:
        np.linalg.cholesky(g)  # positive-definiteness probe
        w = np.linalg.solve(g, b)
    except np.linalg.LinAlgError:
        w = np.linalg.solve(g + 1e-8 * np.eye(n_feat), b)
    intercept = ym - float(xm @ w)
    return LinearModel(w, intercept, dataset.clock_freq, dataset.feature_names)


def predict_linear(model: LinearModel, features) -> float:
    x = np.asarray(features, dtype=np.float64)
    if x.shape != model.weights.shape:
        raise ValueError("feature dimensionality mismatch")
    return float(x @ model.weights + model.intercept)


def predict_linear_batch(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X @ model.weights + model.intercept


def scale_prediction(p: float, model_freq: float, current_freq: float) -> float:
    """Retarget a prediction to another clock: power is proportional to f."""
    if model_freq <= 0 or current_freq <= 0:
        raise ValueError("frequencies must be positive")
    return p * (current_freq / model_freq)


def predict_ensemble(em: EnsembleModel, per_component_features) -> float:
    """Sum of the component tree predictions, one feature vector each."""
    if len(per_component_features) != len(em.components):
        raise ValueError("one feature vector per component required")
    return float(sum(predict_tree(tree, x)
                     for (tree, _), x in zip(em.components, per_component_features)))


def mae_percent(predictions, truths) -> float:
    """100 * mean(|pred - truth|) / mean(truth)."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ValueError("predictions and truths must be equal-length, non-empty")
    mt = float(t.mean())
    if mt <= 0:
        raise ValueError("mean true power must be positive")
    return float(100.0 * np.mean(np.abs(p - t)) / mt)


# ---------------------------------------------------------------------------
# Persistence: nodes listed in pre-order with explicit child indices.

def _tree_to_doc(tree: DecisionTree) -> dict:
    nodes: list[dict] = []

    def emit(node: TreeNode) -> int:
        i = len(nodes)
        nodes.append({})
        if node.is_leaf:
            nodes[i] = {"kind": "leaf", "value": node.value,
                        "n_samples": node.n_samples, "impurity": node.impurity}
        else:
            li = emit(node.left)
            ri = emit(node.right)
            nodes[i] = {"kind": "decision", "feature": node.feature,
                        "threshold": node.threshold, "left": li, "right": ri,
                        "n_samples": node.n_samples, "impurity": node.impurity,
                        "reduction": node.reduction}
        return i

    emit(tree.root)
    return {
        "format": "powertree-tree-v1",
        "model_freq_hz": tree.model_freq,
        "n_features": tree.n_features,
        "feature_ids": list(tree.feature_ids),
        "depth": tree.depth,
        "nodes": nodes,
    }


def _tree_from_doc(doc: dict) -> DecisionTree:
    if doc.get("format") != "powertree-tree-v1":
        raise ValueError("not a decision-tree document")
    raw = doc["nodes"]

    def build(i: int) -> TreeNode:
        d = raw[i]
        if d["kind"] == "leaf":
            return TreeNode(n_samples=int(d["n_samples"]),
                            impurity=float(d["impurity"]),
                            value=float(d["value"]))
        return TreeNode(n_samples=int(d["n_samples"]),
                        impurity=float(d["impurity"]),
                        feature=int(d["feature"]),
                        threshold=float(d["threshold"]),
                        left=build(int(d["left"])), right=build(int(d["right"])),
                        reduction=float(d["reduction"]))

    return DecisionTree(build(0), int(doc["depth"]), int(doc["n_features"]),
                        float(doc["model_freq_hz"]), tuple(doc["feature_ids"]))


def save_tree(tree: DecisionTree, path: str | Path) -> None:
    Path(path).write_text(json.dumps(_tree_to_doc(tree), indent=1,
                                     sort_keys=True) + "\n")


def load_tree(path: str | Path) -> DecisionTree:
    return _tree_from_doc(json.loads(Path(path).read_text()))


def save_linear(model: LinearModel, path: str | Path) -> None:
    doc = {
        "format": "powertree-linear-v1",
        "model_freq_hz": model.model_freq,
        "feature_ids": list(model.feature_ids),
        "weights": [float(w) for w in model.weights],
        "intercept": model.intercept,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_linear(path: str | Path) -> LinearModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "powertree-linear-v1":
        raise ValueError("not a linear-model document")
    return LinearModel(np.array(doc["weights"], dtype=np.float64),
                       float(doc["intercept"]), float(doc["model_freq_hz"]),
                       tuple(doc["feature_ids"]))


def rule_text(tree: DecisionTree) -> str:
    """Human-readable if/else rules equivalent to the tree."""
    lines = ["# features: " + " ".join(tree.feature_ids)]

    def walk(node: TreeNode, indent: int) -> None:
        pad = "    " * indent
        if node.is_leaf:
            lines.append(f"{pad}value: {node.value!r}")
        else:
            lines.append(f"{pad}if x[{node.feature}] <= {node.threshold!r}:")
            walk(node.left, indent + 1)
            lines.append(f"{pad}else:")
            walk(node.right, indent + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"

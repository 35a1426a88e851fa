"""Base learners: decision stumps, CART trees (weighted Gini), random trees,
and minimal cost-complexity pruning with 10-fold cross-validated subtree
selection.

Trees are stored as flat index-linked node arrays (preorder ids: root 0, left
subtree before right) produced by the kernel backend; this module owns the
model type, the pruning machinery, prediction, and JSON serialization.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import _backend
from .data import Dataset, WeightVector
from .errors import DomainError
from .rng import RandomSource

LEARNER_KINDS = ("stump", "cart_unpruned", "cart_pruned", "random_tree")


@dataclass(frozen=True)
class LearnerSpec:
    """Which base learner to train and with what knobs.

    k_features applies to random trees only; None means ceil(sqrt(D)) chosen
    at training time.
    """

    kind: str
    min_split: int = 2
    k_features: int | None = None

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise DomainError(f"unknown learner kind {self.kind!r}")
        if self.min_split < 2:
            raise DomainError("min_split must be >= 2")
        if self.k_features is not None and self.k_features < 1:
            raise DomainError("k_features must be >= 1")


@dataclass(frozen=True)
class TreeModel:
    """Flat binary tree: feature[i] < 0 marks a leaf with leaf_label[i]."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_label: np.ndarray
    depth: int
    n_features: int

    def __post_init__(self):
        feature = np.ascontiguousarray(self.feature, dtype=np.int32)
        threshold = np.ascontiguousarray(self.threshold, dtype=np.float64)
        left = np.ascontiguousarray(self.left, dtype=np.int32)
        right = np.ascontiguousarray(self.right, dtype=np.int32)
        leaf_label = np.ascontiguousarray(self.leaf_label, dtype=np.int8)
        nn = feature.shape[0]
        if nn < 1 or any(
            arr.shape != (nn,) for arr in (threshold, left, right, leaf_label)
        ):
            raise DomainError("node arrays must be equal-length and non-empty")
        internal = feature >= 0
        if internal.any():
            if self.n_features < 1 or (feature[internal] >= self.n_features).any():
                raise DomainError("split features out of range")
            if not np.isfinite(threshold[internal]).all():
                raise DomainError("split thresholds must be finite")
            kids = np.concatenate([left[internal], right[internal]])
            if (kids <= np.concatenate([np.nonzero(internal)[0]] * 2)).any():
                raise DomainError("children must have larger preorder ids")
            if (kids >= nn).any():
                raise DomainError("child id out of range")
            if (leaf_label[internal] != 0).any():
                raise DomainError("internal nodes carry no label")
            counts = np.bincount(kids, minlength=nn)
            if counts[0] != 0 or (counts[1:] != 1).any():
                raise DomainError("every non-root node must be linked exactly once")
        elif nn != 1:
            raise DomainError("a tree without splits must be a single leaf")
        leaves = ~internal
        if (left[leaves] != -1).any() or (right[leaves] != -1).any():
            raise DomainError("leaves must not link children")
        if not np.isin(leaf_label[leaves], (-1, 1)).all():
            raise DomainError("leaf labels must be -1 or +1")
        for name, arr in (
            ("feature", feature),
            ("threshold", threshold),
            ("left", left),
            ("right", right),
            ("leaf_label", leaf_label),
        ):
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))


def predict_batch(tree: TreeModel, X) -> np.ndarray:
    """Labels for every row of X; the hot path used by ensembles."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise DomainError(
            f"expected {tree.n_features} features, got {X.shape[1] if X.ndim == 2 else 'non-2D'}"
        )
    return _backend.predict_tree(
        tree.feature, tree.threshold, tree.left, tree.right, tree.leaf_label, X
    )


def tree_predict(tree: TreeModel, x) -> int:
    """Route one attribute vector to its leaf label."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != tree.n_features:
        raise DomainError(f"expected {tree.n_features} attributes")
    return int(predict_batch(tree, x[None, :])[0])


def _leaf_model(label: int, n_features: int) -> TreeModel:
    return TreeModel(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.zeros(1),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        leaf_label=np.array([label], dtype=np.int8),
        depth=0,
        n_features=n_features,
    )


def _check_weights(data: Dataset, w: WeightVector):
    if len(w) != data.n:
        raise DomainError("weight length must match dataset size")


def train_stump(data: Dataset, w: WeightVector) -> TreeModel:
    """Best depth-1 tree by weighted 0/1 error; candidates are scanned
    feature-ascending then threshold-ascending with first-wins ties, and a
    constant majority leaf replaces the best split only when strictly better.
    """
    _check_weights(data, w)
    f, thr, l_lab, r_lab, err, c_lab, c_err = _backend.best_stump(
        data.X, data.y, w.values
    )
    if f < 0 or c_err < err:
        return _leaf_model(int(c_lab), data.d)
    return TreeModel(
        feature=np.array([f, -1, -1], dtype=np.int32),
        threshold=np.array([thr, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        leaf_label=np.array([0, l_lab, r_lab], dtype=np.int8),
        depth=1,
        n_features=data.d,
    )


def train_cart(data: Dataset, w: WeightVector, spec: LearnerSpec) -> TreeModel:
    """Unrestricted recursive Gini splitting down to min_split/purity."""
    if spec.kind not in ("cart_unpruned", "cart_pruned"):
        raise DomainError("train_cart needs a cart_* spec")
    _check_weights(data, w)
    arrays = _backend.grow_tree(data.X, data.y, w.values, spec.min_split, data.d, 0)
    return TreeModel(*arrays, n_features=data.d)


def train_random_tree(
    data: Dataset, w: WeightVector, spec: LearnerSpec, rng: RandomSource
) -> TreeModel:
    """As train_cart, but each node searches a fresh uniform feature subset."""
    if spec.kind != "random_tree":
        raise DomainError("train_random_tree needs a random_tree spec")
    _check_weights(data, w)
    k = spec.k_features if spec.k_features is not None else math.ceil(math.sqrt(data.d))
    if k > data.d:
        raise DomainError(f"k_features={k} exceeds dimension {data.d}")
    arrays = _backend.grow_tree(
        data.X, data.y, w.values, spec.min_split, k, rng.tree_seed()
    )
    return TreeModel(*arrays, n_features=data.d)


# ---------------------------------------------------------------------------
# cost-complexity pruning


def _node_stats(tree: TreeModel, X, y, w):
    """Weighted positive/negative mass reaching each node (root gets all)."""
    nn = tree.n_nodes
    wpos = np.zeros(nn)
    wneg = np.zeros(nn)
    wp = np.where(y > 0, w, 0.0)
    wn = w - wp
    rows = np.arange(X.shape[0])
    node = np.zeros(rows.shape[0], dtype=np.int64)
    while rows.size:
        np.add.at(wpos, node, wp[rows])
        np.add.at(wneg, node, wn[rows])
        f = tree.feature[node]
        internal = f >= 0
        rows = rows[internal]
        node = node[internal]
        f = f[internal]
        if rows.size:
            go_left = X[rows, f] <= tree.threshold[node]
            node = np.where(go_left, tree.left[node], tree.right[node])
    return wpos, wneg


def _weakest_link(tree: TreeModel, wpos, wneg):
    """Nested collapse sets: [(alpha_0=0, {}), (alpha_1, C_1), ...] ending at
    the root; alphas nondecreasing. C_k holds node ids collapsed into leaves.
    """
    nn = tree.n_nodes
    internal = tree.feature >= 0
    seq = [(0.0, frozenset())]
    if not internal.any():
        return seq
    total = wpos[0] + wneg[0]
    r_leaf = np.minimum(wpos, wneg) / total
    parent = np.full(nn, -1, dtype=np.int64)
    parent[tree.left[internal]] = np.nonzero(internal)[0]
    parent[tree.right[internal]] = np.nonzero(internal)[0]
    collapsed = np.zeros(nn, dtype=bool)
    cum: set[int] = set()
    r_sub = np.empty(nn)
    leaves = np.zeros(nn, dtype=np.int64)
    alive = np.empty(nn, dtype=bool)
    prev_alpha = 0.0
    while not collapsed[0]:
        alive[0] = True
        for v in range(1, nn):
            p = parent[v]
            alive[v] = alive[p] and not collapsed[p]
        for v in range(nn - 1, -1, -1):
            if not internal[v] or collapsed[v]:
                r_sub[v] = r_leaf[v]
                leaves[v] = 1
            else:
                r_sub[v] = r_sub[tree.left[v]] + r_sub[tree.right[v]]
                leaves[v] = leaves[tree.left[v]] + leaves[tree.right[v]]
        cand = alive & internal & ~collapsed
        g = np.full(nn, np.inf)
        g[cand] = (r_leaf[cand] - r_sub[cand]) / (leaves[cand] - 1)
        alpha = float(g[cand].min())
        newly = cand & (g == alpha)
        collapsed |= newly
        cum |= set(int(v) for v in np.nonzero(newly)[0])
        # theory gives nondecreasing alphas; clamp FP jitter so bisect stays valid
        prev_alpha = max(prev_alpha, alpha, 0.0)
        seq.append((prev_alpha, frozenset(cum)))
    return seq


def _materialize(tree: TreeModel, collapsed: frozenset, wpos, wneg) -> TreeModel:
    if not collapsed:
        return tree
    feat2: list[int] = []
    thr2: list[float] = []
    l2: list[int] = []
    r2: list[int] = []
    lab2: list[int] = []
    depth = 0
    stack = [(0, -1, False, 0)]
    while stack:
        v, pnew, is_right, dep = stack.pop()
        nid = len(feat2)
        if pnew >= 0:
            if is_right:
                r2[pnew] = nid
            else:
                l2[pnew] = nid
        if dep > depth:
            depth = dep
        if tree.feature[v] < 0 or v in collapsed:
            feat2.append(-1)
            thr2.append(0.0)
            l2.append(-1)
            r2.append(-1)
            if tree.feature[v] < 0:
                lab2.append(int(tree.leaf_label[v]))
            else:
                lab2.append(1 if wpos[v] >= wneg[v] else -1)
        else:
            feat2.append(int(tree.feature[v]))
            thr2.append(float(tree.threshold[v]))
            l2.append(-1)
            r2.append(-1)
            lab2.append(0)
            stack.append((int(tree.right[v]), nid, True, dep + 1))
            stack.append((int(tree.left[v]), nid, False, dep + 1))
    return TreeModel(
        feature=np.array(feat2, dtype=np.int32),
        threshold=np.array(thr2, dtype=np.float64),
        left=np.array(l2, dtype=np.int32),
        right=np.array(r2, dtype=np.int32),
        leaf_label=np.array(lab2, dtype=np.int8),
        depth=depth,
        n_features=tree.n_features,
    )


def cost_complexity_sequence(tree: TreeModel, data: Dataset, w: WeightVector):
    """Materialized weakest-link sequence [(alpha, subtree)], alpha ascending;
    first element is the input tree, last is the root collapsed to a leaf."""
    _check_weights(data, w)
    wpos, wneg = _node_stats(tree, data.X, data.y, w.values)
    seq = _weakest_link(tree, wpos, wneg)
    return [(alpha, _materialize(tree, c, wpos, wneg)) for alpha, c in seq]


def _stratified_folds(y, n_folds):
    """Deterministic round-robin fold ids per class, in index order."""
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    for cls in (-1, 1):
        members = np.nonzero(y == cls)[0]
        fold_of[members] = np.arange(members.shape[0]) % n_folds
    return fold_of


def _stage_map(seq, nn):
    stage = np.full(nn, len(seq), dtype=np.int64)
    prev: frozenset = frozenset()
    for k, (_, cset) in enumerate(seq):
        for v in cset - prev:
            stage[v] = k
        prev = cset
    return stage


def _fold_curve(ftree: TreeModel, fseq, fwpos, fwneg, Xv, yv, wv):
    """Weighted validation error of every fold-sequence element, via the
    per-instance path trick (prediction only changes when a path node
    collapses, and the shallowest collapsed ancestor wins)."""
    kf = len(fseq) - 1
    stage = _stage_map(fseq, ftree.n_nodes)
    maj = np.where(fwpos >= fwneg, 1, -1)
    diff = np.zeros(kf + 2)
    for i in range(Xv.shape[0]):
        x = Xv[i]
        yi = int(yv[i])
        wi = float(wv[i])
        # records: path nodes achieving a new minimum collapse stage
        node = 0
        run_min = kf + 1  # sentinel: larger than any real stage
        records = []
        while True:
            s = int(stage[node])
            if s < run_min:
                records.append((s, int(maj[node])))
                run_min = s
            f = int(ftree.feature[node])
            if f < 0:
                leaf_lab = int(ftree.leaf_label[node])
                break
            node = (
                int(ftree.left[node])
                if x[f] <= ftree.threshold[node]
                else int(ftree.right[node])
            )
        # segments of j in [0, kf]: [s_r, s_{r-1}-1] -> records[r], tail -> leaf
        upper = kf
        for s, lab in records:
            if s > upper:
                continue
            if lab != yi:
                diff[s] += wi
                diff[upper + 1] -= wi
            upper = s - 1
            if upper < 0:
                break
        if upper >= 0 and leaf_lab != yi:
            diff[0] += wi
            diff[upper + 1] -= wi
    return np.cumsum(diff[: kf + 1])


def prune_cart(
    tree: TreeModel,
    data: Dataset,
    w: WeightVector,
    spec: LearnerSpec | None = None,
) -> TreeModel:
    """Minimal cost-complexity pruning.

    Builds the weakest-link sequence of the input tree, then picks the element
    whose representative penalty beta_k = sqrt(alpha_k*alpha_{k+1}) (last
    element: unbounded) minimizes 10-fold cross-validated weighted error; ties
    go to the smaller subtree. Folds are deterministic stratified round-robin
    in instance order (this operation takes no rng); fold trees are grown with
    `spec` (default: min_split=2 unpruned growth, matching train_cart).
    """
    _check_weights(data, w)
    if spec is None:
        spec = LearnerSpec(kind="cart_unpruned", min_split=2)
    wpos, wneg = _node_stats(tree, data.X, data.y, w.values)
    seq = _weakest_link(tree, wpos, wneg)
    if len(seq) == 1:
        return tree
    alphas = [a for a, _ in seq]
    betas = [
        math.sqrt(alphas[k] * alphas[k + 1]) for k in range(len(seq) - 1)
    ] + [math.inf]

    n_folds = min(10, data.n)
    fold_of = _stratified_folds(data.y, n_folds)
    cv_err = np.zeros(len(seq))
    grow_spec = LearnerSpec(kind="cart_unpruned", min_split=spec.min_split)
    for fold in range(n_folds):
        val = fold_of == fold
        train = ~val
        if not val.any() or not train.any():
            continue
        wt = w.values[train]
        s = float(wt.sum())
        if s <= 0.0:
            continue
        sub = data.subset(np.nonzero(train)[0])
        ftree = train_cart(sub, WeightVector(wt / s), grow_spec)
        fwpos, fwneg = _node_stats(ftree, sub.X, sub.y, wt / s)
        fseq = _weakest_link(ftree, fwpos, fwneg)
        curve = _fold_curve(
            ftree, fseq, fwpos, fwneg,
            data.X[val], data.y[val], w.values[val],
        )
        f_alphas = [a for a, _ in fseq]
        for k, beta in enumerate(betas):
            j = bisect_right(f_alphas, beta) - 1
            cv_err[k] += curve[j]

    best_k = 0
    best = cv_err[0]
    for k in range(1, len(seq)):
        if cv_err[k] <= best:
            best_k = k
            best = cv_err[k]
    return _materialize(tree, seq[best_k][1], wpos, wneg)


# ---------------------------------------------------------------------------
# serialization


def tree_to_obj(tree: TreeModel) -> list:
    nodes = []
    for i in range(tree.n_nodes):
        if tree.feature[i] < 0:
            nodes.append({"label": int(tree.leaf_label[i])})
        else:
            nodes.append(
                {
                    "feature": int(tree.feature[i]),
                    "threshold": float(tree.threshold[i]),
                    "left": int(tree.left[i]),
                    "right": int(tree.right[i]),
                }
            )
    return nodes


def tree_from_obj(nodes: list, n_features: int) -> TreeModel:
    nn = len(nodes)
    if nn < 1:
        raise DomainError("empty node list")
    feature = np.full(nn, -1, dtype=np.int32)
    threshold = np.zeros(nn)
    left = np.full(nn, -1, dtype=np.int32)
    right = np.full(nn, -1, dtype=np.int32)
    leaf_label = np.zeros(nn, dtype=np.int8)
    for i, node in enumerate(nodes):
        if "label" in node:
            leaf_label[i] = int(node["label"])
        else:
            feature[i] = int(node["feature"])
            threshold[i] = float(node["threshold"])
            left[i] = int(node["left"])
            right[i] = int(node["right"])
    # recompute depth by walking from the root
    depth = 0
    stack = [(0, 0)]
    while stack:
        v, dep = stack.pop()
        if dep > depth:
            depth = dep
        if feature[v] >= 0:
            stack.append((int(left[v]), dep + 1))
            stack.append((int(right[v]), dep + 1))
    return TreeModel(feature, threshold, left, right, leaf_label, depth, n_features)


def tree_to_json(tree: TreeModel) -> str:
    return json.dumps(tree_to_obj(tree), sort_keys=True, separators=(",", ":"))


def tree_from_json(text: str, n_features: int) -> TreeModel:
    return tree_from_obj(json.loads(text), n_features)

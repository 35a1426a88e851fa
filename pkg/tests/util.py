"""Shared test helpers: dataset factories, brute-force oracles (exhaustive
stump search, exhaustive pruned-subtree enumeration) written with plain scalar
loops, and a pruning re-selection oracle that reuses only the verified growth
routines while redoing the fold bookkeeping and candidate scoring itself."""

import math
from bisect import bisect_right

import numpy as np

from voteboost.data import Dataset, WeightVector
from voteboost.trees import (
    LearnerSpec,
    TreeModel,
    cost_complexity_sequence,
    train_cart,
)


def dset(X, y, name="test"):
    return Dataset(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.int8),
        name=name,
    )


def rand_dataset(gen, n, d, tie_prob=0.0):
    """Random continuous features; tie_prob > 0 quantizes to force duplicate
    values and threshold ties."""
    X = gen.normal(size=(n, d))
    if tie_prob > 0.0:
        mask = gen.random(size=(n, d)) < tie_prob
        X[mask] = np.round(X[mask] * 2) / 2
    y = np.where(gen.random(n) < 0.5, -1, 1).astype(np.int8)
    if np.all(y == y[0]):
        y[0] = -y[0]
    return X, y


def dyadic_weights(gen, n, denom_bits=10):
    """Exactly representable weights that sum to exactly 1.0 (multinomial
    counts over a power-of-two denominator), so error comparisons are exact."""
    counts = gen.multinomial(1 << denom_bits, np.full(n, 1.0 / n))
    return counts.astype(np.float64) / (1 << denom_bits)


def brute_stump(X, y, w):
    """Exhaustive stump search. Returns (best_error, kind, detail):
    kind 'split' -> detail (feature, threshold, left_label, right_label),
    kind 'leaf' -> detail label. Tie rules: lowest feature, then lowest
    threshold, then the left=-1/right=+1 orientation; a constant leaf wins
    only when strictly better than every split."""
    n, d = X.shape
    p_tot = sum(w[i] for i in range(n) if y[i] == 1)
    q_tot = sum(w[i] for i in range(n) if y[i] == -1)
    best = None  # (error, feature, threshold, left, right)
    for f in range(d):
        vals = sorted(set(X[:, f]))
        for a, b in zip(vals, vals[1:]):
            t = (a + b) * 0.5
            if not (t < b):
                t = a
            pl = sum(w[i] for i in range(n) if X[i, f] <= t and y[i] == 1)
            ql = sum(w[i] for i in range(n) if X[i, f] <= t and y[i] == -1)
            err_a = pl + (q_tot - ql)  # left=-1, right=+1
            err_b = ql + (p_tot - pl)  # left=+1, right=-1
            for err, ll, rl in ((err_a, -1, 1), (err_b, 1, -1)):
                if best is None or err < best[0]:
                    best = (err, f, t, ll, rl)
    const_label = 1 if p_tot >= q_tot else -1
    const_error = q_tot if const_label == 1 else p_tot
    if best is None or const_error < best[0]:
        return const_error, "leaf", const_label
    return best[0], "split", best[1:]


def stump_weighted_error(tree: TreeModel, X, y, w):
    err = 0.0
    for i in range(X.shape[0]):
        node = 0
        while tree.feature[node] >= 0:
            if X[i, tree.feature[node]] <= tree.threshold[node]:
                node = tree.left[node]
            else:
                node = tree.right[node]
        if tree.leaf_label[node] != y[i]:
            err += w[i]
    return err


def route_risks(tree: TreeModel, X, y, w):
    """Per-node weighted (pos, neg) mass by scalar routing; collapse risk of a
    node is its minority mass (ties labeled +1, so risk = neg when pos==neg)."""
    nn = tree.n_nodes
    pos = [0.0] * nn
    neg = [0.0] * nn
    for i in range(X.shape[0]):
        node = 0
        while True:
            if y[i] == 1:
                pos[node] += w[i]
            else:
                neg[node] += w[i]
            if tree.feature[node] < 0:
                break
            if X[i, tree.feature[node]] <= tree.threshold[node]:
                node = tree.left[node]
            else:
                node = tree.right[node]
    return pos, neg


def collapse_risk(pos, neg, node):
    return neg[node] if pos[node] >= neg[node] else pos[node]


def enumerate_prunings(tree: TreeModel, pos, neg):
    """All pruned subtrees as (collapsed_ids frozenset, n_leaves, risk)."""

    def rec(node):
        if tree.feature[node] < 0:
            return [(frozenset(), 1, collapse_risk(pos, neg, node))]
        out = [(frozenset([node]), 1, collapse_risk(pos, neg, node))]
        for sl, ll, rl in rec(tree.left[node]):
            for sr, lr, rr in rec(tree.right[node]):
                out.append((sl | sr, ll + lr, rl + rr))
        return out

    return rec(0)


def best_pruning_at(prunings, alpha):
    """Minimum cost risk + alpha*leaves; ties -> fewest leaves. Returns
    (cost_of_best, min_leaves_among_optima, optimal_sets_with_min_leaves)."""
    best_cost = min(r + alpha * l for _, l, r in prunings)
    optima = [(s, l, r) for s, l, r in prunings
              if abs(r + alpha * l - best_cost) <= 1e-12 * max(1.0, abs(best_cost))]
    min_leaves = min(l for _, l, _ in optima)
    sets = [s for s, l, _ in optima if l == min_leaves]
    return best_cost, min_leaves, sets


def cv_prune_choice(data, w, full, min_split=2):
    """Re-run the pruned-subtree selection from first principles: rebuild the
    representative penalties from the cost-complexity alphas, form stratified
    round-robin folds, grow and sequence each fold tree, score validation
    points by scalar routing, and apply the ties-to-later (smaller subtree)
    rule. Returns the sequence element an independent selection would pick."""
    spec = LearnerSpec("cart_unpruned", min_split=min_split)
    wv = WeightVector(w)
    seq = cost_complexity_sequence(full, data, wv)
    alphas = [a for a, _ in seq]
    betas = [math.sqrt(alphas[k] * alphas[k + 1]) for k in range(len(seq) - 1)]
    betas.append(math.inf)
    n = data.n
    n_folds = min(10, n)
    fold_of = np.empty(n, dtype=np.int64)
    for cls in (-1, 1):
        members = np.nonzero(data.y == cls)[0]
        fold_of[members] = np.arange(members.shape[0]) % n_folds
    cv = np.zeros(len(seq))
    for fold in range(n_folds):
        val = fold_of == fold
        tr = ~val
        wt = w[tr]
        sub = data.subset(np.nonzero(tr)[0])
        fw = WeightVector(wt / wt.sum())
        ftree = train_cart(sub, fw, spec)
        fseq = cost_complexity_sequence(ftree, sub, fw)
        f_alphas = [a for a, _ in fseq]
        for k, beta in enumerate(betas):
            j = bisect_right(f_alphas, beta) - 1
            cv[k] += stump_weighted_error(fseq[j][1], data.X[val], data.y[val], w[val])
    best_k = 0
    for k in range(1, len(seq)):
        if cv[k] <= cv[best_k] + 1e-12:
            best_k = k
    return seq[best_k][1]

"""Pure-Python tree kernels.

Reference implementation of the three hot operations (tree growth, stump
search, batch prediction). The compiled backend mirrors these semantics
bit-for-bit, which the test suite asserts; anything pinned here is pinned
there too:

- sorts are stable (ties keep original position order),
- prefix sums accumulate left to right (np.cumsum is a sequential scan),
- split candidates are scanned feature-ascending, threshold-ascending, and
  the first strict improvement wins,
- the feature-subset sampler is a PCG32 stream seeded per tree, consumed only
  when k_features < D.

Split scoring: maximizing the weighted Gini impurity decrease of a split is
equivalent to maximizing s = (P_L^2+Q_L^2)/W_L + (P_R^2+Q_R^2)/W_R over the
node's candidates, where P/Q are positive/negative weight totals; the parent
contributes the constant baseline (P^2+Q^2)/W. Splits with s strictly above
the baseline are preferred; if none exists but some candidate ties the
baseline exactly (XOR-like geometry), the first such candidate is accepted
rather than stopping, so parity patterns still get separated.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_MASK64 = (1 << 64) - 1
_PCG_MULT = 6364136223846793005
_PCG_SEQ = 0xDA3E39CB94B95BDB


class _Pcg32:
    """Minimal PCG32 (XSH-RR), fixed increment; matches the compiled kernel."""

    __slots__ = ("state",)

    _inc = ((_PCG_SEQ << 1) | 1) & _MASK64

    def __init__(self, seed: int):
        self.state = 0
        self.next32()
        self.state = (self.state + (seed & _MASK64)) & _MASK64
        self.next32()

    def next32(self) -> int:
        old = self.state
        self.state = (old * _PCG_MULT + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & 0xFFFFFFFF

    def bounded(self, bound: int) -> int:
        # unbiased rejection sampling, threshold = (2^32 - bound) % bound
        threshold = (1 << 32) % bound
        while True:
            r = self.next32()
            if r >= threshold:
                return r % bound


def _sample_features(rng: _Pcg32, d: int, k: int) -> list[int]:
    # partial Fisher-Yates; result sorted ascending for the scan order
    perm = list(range(d))
    for i in range(k):
        j = i + rng.bounded(d - i)
        perm[i], perm[j] = perm[j], perm[i]
    sub = perm[:k]
    sub.sort()
    return sub


def _midpoint(a: float, b: float) -> float:
    t = (a + b) * 0.5
    if not (t < b):
        t = a
    return t


def grow_tree(X, y, w, min_split, k_features, seed, record_subsets=False):
    """Grow a binary classification tree, returning flat node arrays.

    X: (n,d) float64 C-contiguous; y: (n,) int8 in {-1,+1}; w: (n,) float64
    nonnegative. Node ids are preorder (root 0, left subtree before right).
    Returns (feature, threshold, left, right, leaf_label, depth); leaves have
    feature -1 and leaf_label in {-1,+1}, internal nodes leaf_label 0.
    record_subsets additionally returns {node_id: sampled feature tuple} for
    every node that ran a split search (diagnostic; both backends).
    """
    n, d = X.shape
    cap = 2 * n
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    leaf_label = np.zeros(cap, dtype=np.int8)
    idx = np.arange(n, dtype=np.int64)
    wpos = np.where(y > 0, w, 0.0)
    rng = _Pcg32(seed) if k_features < d else None
    subsets = {} if record_subsets else None

    n_nodes = 1
    depth_max = 0
    stack = [(0, 0, n, 0)]
    while stack:
        node, lo, hi, dep = stack.pop()
        if dep > depth_max:
            depth_max = dep
        sl = idx[lo:hi].copy()
        m = hi - lo
        wn = w[sl]
        pn = wpos[sl]
        W = float(np.cumsum(wn)[-1])
        P = float(np.cumsum(pn)[-1])
        Q = W - P
        if m < min_split or P <= 0.0 or Q <= 0.0:
            leaf_label[node] = 1 if P >= Q else -1
            continue

        if rng is not None:
            feats = _sample_features(rng, d, k_features)
        else:
            feats = range(d)
        if subsets is not None:
            subsets[node] = tuple(feats)

        node_base = (P * P + Q * Q) / W
        best_s = node_base
        best_f = -1
        best_t = 0.0
        zero_f = -1
        zero_t = 0.0
        for f in feats:
            vals = X[sl, f]
            order = np.argsort(vals, kind="stable")
            vs = vals[order]
            boundary = vs[:-1] != vs[1:]
            if not boundary.any():
                continue
            cw = np.cumsum(wn[order])[:-1]
            cp = np.cumsum(pn[order])[:-1]
            ql = cw - cp
            wr = W - cw
            pr = P - cp
            qr = wr - pr
            ok = boundary & (cw > 0.0) & (wr > 0.0)
            if not ok.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (cp * cp + ql * ql) / cw + (pr * pr + qr * qr) / wr
            s = np.where(ok, s, -np.inf)
            i_best = int(np.argmax(s))
            s_best = float(s[i_best])
            if s_best > best_s:
                best_s = s_best
                best_f = f
                best_t = _midpoint(float(vs[i_best]), float(vs[i_best + 1]))
            if zero_f < 0:
                zero_mask = ok & (s == node_base)
                if zero_mask.any():
                    i_zero = int(np.argmax(zero_mask))
                    zero_f = f
                    zero_t = _midpoint(float(vs[i_zero]), float(vs[i_zero + 1]))

        if best_f < 0 and zero_f >= 0:
            best_f, best_t = zero_f, zero_t
        if best_f < 0:
            leaf_label[node] = 1 if P >= Q else -1
            continue

        mask = X[sl, best_f] <= best_t
        nl = int(np.count_nonzero(mask))
        if nl == 0 or nl == m:  # unreachable for boundary candidates; guard anyway
            leaf_label[node] = 1 if P >= Q else -1
            continue
        idx[lo:hi] = np.concatenate([sl[mask], sl[~mask]])
        feature[node] = best_f
        threshold[node] = best_t
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        stack.append((rid, lo + nl, hi, dep + 1))
        stack.append((lid, lo, lo + nl, dep + 1))

    out = (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        leaf_label[:n_nodes].copy(),
        depth_max,
    )
    if record_subsets:
        return out + (subsets,)
    return out


def best_stump(X, y, w):
    """Exhaustive depth-1 search minimizing weighted 0/1 error.

    Returns (feature, threshold, left_label, right_label, split_error,
    const_label, const_error); feature is -1 when no boundary exists anywhere.
    At each candidate the left=-1/right=+1 orientation is considered before
    its mirror, and only strict improvements replace the incumbent, so the
    lowest (feature, threshold) optimum wins.
    """
    n, d = X.shape
    wpos = np.where(y > 0, w, 0.0)
    W = float(np.cumsum(w)[-1])
    P = float(np.cumsum(wpos)[-1])
    Q = W - P
    const_label = 1 if P >= Q else -1
    const_error = Q if const_label == 1 else P

    best_err = np.inf
    best_f = -1
    best_t = 0.0
    best_left = 0
    best_right = 0
    for f in range(d):
        vals = X[:, f]
        order = np.argsort(vals, kind="stable")
        vs = vals[order]
        boundary = vs[:-1] != vs[1:]
        if not boundary.any():
            continue
        cw = np.cumsum(w[order])[:-1]
        cp = np.cumsum(wpos[order])[:-1]
        ql = cw - cp
        err_a = cp + (Q - ql)  # left -1, right +1
        err_b = ql + (P - cp)  # left +1, right -1
        flat = np.empty((n - 1) * 2, dtype=np.float64)
        flat[0::2] = err_a
        flat[1::2] = err_b
        ok = np.repeat(boundary, 2)
        flat = np.where(ok, flat, np.inf)
        j = int(np.argmin(flat))
        e = float(flat[j])
        if e < best_err:
            i = j >> 1
            best_err = e
            best_f = f
            best_t = _midpoint(float(vs[i]), float(vs[i + 1]))
            if j & 1:
                best_left, best_right = 1, -1
            else:
                best_left, best_right = -1, 1

    return (best_f, best_t, best_left, best_right, best_err, const_label, const_error)


def predict_tree(feature, threshold, left, right, leaf_label, X):
    """Route rows to leaves; returns (n,) int8 labels. Left on x <= threshold."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        sub = node[rows]
        xa = X[rows, f[rows]]
        go_left = xa <= threshold[sub]
        node[rows] = np.where(go_left, left[sub], right[sub])
    return leaf_label[node]

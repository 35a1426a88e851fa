# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree kernels; bit-for-bit mirror of _pytree (see its docstring).

Determinism notes: stable bottom-up merge sort == numpy stable argsort; prefix
sums accumulate left to right exactly like np.cumsum; score expressions keep
the same operation order (built with -O3 only, no fast-math, no FMA
contraction at baseline x86-64), so both backends produce identical bytes.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

ctypedef cnp.float64_t f8
ctypedef cnp.int64_t i8
ctypedef cnp.int32_t i4
ctypedef cnp.int8_t i1
ctypedef unsigned long long u8
ctypedef unsigned int u4

cdef u8 PCG_MULT = 6364136223846793005ULL
cdef u8 PCG_INC = (0xDA3E39CB94B95BDBULL << 1) | 1ULL


cdef inline u4 pcg_next(u8 *state) nogil:
    cdef u8 old = state[0]
    state[0] = old * PCG_MULT + PCG_INC
    cdef u4 xorshifted = <u4>(((old >> 18) ^ old) >> 27)
    cdef u4 rot = <u4>(old >> 59)
    return (xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))


cdef inline u8 pcg_seed(u8 seed) nogil:
    cdef u8 state = 0
    pcg_next(&state)
    state = state + seed
    pcg_next(&state)
    return state


cdef inline u4 pcg_bounded(u8 *state, u4 bound) nogil:
    cdef u4 threshold = (-bound) % bound
    cdef u4 r
    while True:
        r = pcg_next(state)
        if r >= threshold:
            return r % bound


cdef void sample_features(u8 *state, i4 *perm, int d, int k) nogil:
    cdef int i, j, t
    cdef i4 tmp
    for i in range(d):
        perm[i] = i
    for i in range(k):
        j = i + <int>pcg_bounded(state, <u4>(d - i))
        tmp = perm[i]; perm[i] = perm[j]; perm[j] = tmp
    # insertion sort of perm[0..k) ascending
    for i in range(1, k):
        tmp = perm[i]
        t = i - 1
        while t >= 0 and perm[t] > tmp:
            perm[t + 1] = perm[t]
            t -= 1
        perm[t + 1] = tmp


cdef inline f8 midpoint(f8 a, f8 b) nogil:
    cdef f8 t = (a + b) * 0.5
    if not (t < b):
        t = a
    return t


cdef void merge(f8 *vals, i4 *ord_, i4 *buf, int lo, int mid, int hi) nogil:
    cdef int i = lo, j = mid, k = lo
    while i < mid and j < hi:
        if vals[ord_[j]] < vals[ord_[i]]:
            buf[k] = ord_[j]; j += 1
        else:
            buf[k] = ord_[i]; i += 1
        k += 1
    while i < mid:
        buf[k] = ord_[i]; i += 1; k += 1
    while j < hi:
        buf[k] = ord_[j]; j += 1; k += 1
    for i in range(lo, hi):
        ord_[i] = buf[i]


cdef void stable_argsort(f8 *vals, i4 *ord_, i4 *buf, int n) nogil:
    # bottom-up stable merge sort of indices by vals; ties keep lower index first
    cdef int width = 1, lo, mid, hi
    for lo in range(n):
        ord_[lo] = lo
    while width < n:
        lo = 0
        while lo + width < n:
            mid = lo + width
            hi = lo + 2 * width
            if hi > n:
                hi = n
            merge(vals, ord_, buf, lo, mid, hi)
            lo = hi
        width *= 2


def grow_tree(cnp.ndarray[f8, ndim=2] X, cnp.ndarray[i1, ndim=1] y,
              cnp.ndarray[f8, ndim=1] w, int min_split, int k_features,
              unsigned long long seed, bint record_subsets=False):
    cdef int n = <int>X.shape[0]
    cdef int d = <int>X.shape[1]
    cdef int cap = 2 * n
    cdef cnp.ndarray[i4, ndim=1] feature = np.full(cap, -1, dtype=np.int32)
    cdef cnp.ndarray[f8, ndim=1] threshold = np.zeros(cap, dtype=np.float64)
    cdef cnp.ndarray[i4, ndim=1] left = np.full(cap, -1, dtype=np.int32)
    cdef cnp.ndarray[i4, ndim=1] right = np.full(cap, -1, dtype=np.int32)
    cdef cnp.ndarray[i1, ndim=1] leaf_label = np.zeros(cap, dtype=np.int8)
    cdef cnp.ndarray[i4, ndim=1] idx_arr = np.arange(n, dtype=np.int32)
    cdef cnp.ndarray[f8, ndim=1] wpos_arr = np.where(y > 0, w, 0.0)
    cdef cnp.ndarray[f8, ndim=1] svals_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[i4, ndim=1] sord_arr = np.empty(n, dtype=np.int32)
    cdef cnp.ndarray[i4, ndim=1] sbuf_arr = np.empty(n, dtype=np.int32)
    cdef cnp.ndarray[i4, ndim=1] tmpidx_arr = np.empty(n, dtype=np.int32)
    cdef cnp.ndarray[i4, ndim=1] perm_arr = np.empty(d, dtype=np.int32)
    # manual DFS stack: node, lo, hi, depth
    cdef cnp.ndarray[i4, ndim=2] stack_arr = np.empty((cap + 1, 4), dtype=np.int32)

    cdef i4 *idx = <i4 *>idx_arr.data
    cdef f8 *wp = <f8 *>wpos_arr.data
    cdef f8 *wv = <f8 *>w.data
    cdef f8 *svals = <f8 *>svals_arr.data
    cdef i4 *sord = <i4 *>sord_arr.data
    cdef i4 *sbuf = <i4 *>sbuf_arr.data
    cdef i4 *tmpidx = <i4 *>tmpidx_arr.data
    cdef i4 *perm = <i4 *>perm_arr.data

    cdef u8 state = 0
    cdef bint use_rng = k_features < d
    if use_rng:
        state = pcg_seed(seed)
    cdef dict subsets = {} if record_subsets else None

    cdef int n_nodes = 1, depth_max = 0, sp = 0
    cdef int node, lo, hi, dep, m, nf, fi, f, t, j
    cdef int best_f, zero_f, nl, lid, rid
    cdef f8 W, P, Q, node_base, best_s, best_t, zero_t
    cdef f8 wl, pl, wr, pr, ql_, qr, s, v_cur, v_nxt
    cdef bint boundary_any

    stack_arr[0, 0] = 0; stack_arr[0, 1] = 0; stack_arr[0, 2] = n; stack_arr[0, 3] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack_arr[sp, 0]; lo = stack_arr[sp, 1]
        hi = stack_arr[sp, 2]; dep = stack_arr[sp, 3]
        if dep > depth_max:
            depth_max = dep
        m = hi - lo
        W = 0.0
        P = 0.0
        for t in range(lo, hi):
            W += wv[idx[t]]
            P += wp[idx[t]]
        Q = W - P
        if m < min_split or P <= 0.0 or Q <= 0.0:
            leaf_label[node] = 1 if P >= Q else -1
            continue

        if use_rng:
            sample_features(&state, perm, d, k_features)
            nf = k_features
        else:
            nf = d
        if record_subsets:
            if use_rng:
                subsets[node] = tuple(perm[fi] for fi in range(nf))
            else:
                subsets[node] = tuple(range(d))

        node_base = (P * P + Q * Q) / W
        best_s = node_base
        best_f = -1
        best_t = 0.0
        zero_f = -1
        zero_t = 0.0
        for fi in range(nf):
            f = perm[fi] if use_rng else fi
            for t in range(m):
                svals[t] = X[idx[lo + t], f]
            stable_argsort(svals, sord, sbuf, m)
            wl = 0.0
            pl = 0.0
            for t in range(m - 1):
                j = sord[t]
                wl += wv[idx[lo + j]]
                pl += wp[idx[lo + j]]
                v_cur = svals[j]
                v_nxt = svals[sord[t + 1]]
                if v_cur != v_nxt:
                    wr = W - wl
                    if wl > 0.0 and wr > 0.0:
                        ql_ = wl - pl
                        pr = P - pl
                        qr = wr - pr
                        s = (pl * pl + ql_ * ql_) / wl + (pr * pr + qr * qr) / wr
                        if s > best_s:
                            best_s = s
                            best_f = f
                            best_t = midpoint(v_cur, v_nxt)
                        elif zero_f < 0 and s == node_base:
                            zero_f = f
                            zero_t = midpoint(v_cur, v_nxt)

        if best_f < 0 and zero_f >= 0:
            best_f = zero_f
            best_t = zero_t
        if best_f < 0:
            leaf_label[node] = 1 if P >= Q else -1
            continue

        nl = 0
        for t in range(lo, hi):
            if X[idx[t], best_f] <= best_t:
                tmpidx[nl] = idx[t]
                nl += 1
        if nl == 0 or nl == m:  # unreachable for boundary candidates; guard anyway
            leaf_label[node] = 1 if P >= Q else -1
            continue
        j = nl
        for t in range(lo, hi):
            if not (X[idx[t], best_f] <= best_t):
                tmpidx[j] = idx[t]
                j += 1
        for t in range(m):
            idx[lo + t] = tmpidx[t]

        feature[node] = best_f
        threshold[node] = best_t
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        stack_arr[sp, 0] = rid; stack_arr[sp, 1] = lo + nl
        stack_arr[sp, 2] = hi; stack_arr[sp, 3] = dep + 1
        sp += 1
        stack_arr[sp, 0] = lid; stack_arr[sp, 1] = lo
        stack_arr[sp, 2] = lo + nl; stack_arr[sp, 3] = dep + 1
        sp += 1

    out = (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
           left[:n_nodes].copy(), right[:n_nodes].copy(),
           leaf_label[:n_nodes].copy(), depth_max)
    if record_subsets:
        return out + (subsets,)
    return out


def best_stump(cnp.ndarray[f8, ndim=2] X, cnp.ndarray[i1, ndim=1] y,
               cnp.ndarray[f8, ndim=1] w):
    cdef int n = <int>X.shape[0]
    cdef int d = <int>X.shape[1]
    cdef cnp.ndarray[f8, ndim=1] wpos_arr = np.where(y > 0, w, 0.0)
    cdef cnp.ndarray[f8, ndim=1] svals_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[i4, ndim=1] sord_arr = np.empty(n, dtype=np.int32)
    cdef cnp.ndarray[i4, ndim=1] sbuf_arr = np.empty(n, dtype=np.int32)
    cdef f8 *wp = <f8 *>wpos_arr.data
    cdef f8 *wv = <f8 *>w.data
    cdef f8 *svals = <f8 *>svals_arr.data
    cdef i4 *sord = <i4 *>sord_arr.data
    cdef i4 *sbuf = <i4 *>sbuf_arr.data

    cdef f8 W = 0.0, P = 0.0
    cdef int t, f, j
    for t in range(n):
        W += wv[t]
        P += wp[t]
    cdef f8 Q = W - P
    cdef int const_label = 1 if P >= Q else -1
    cdef f8 const_error = Q if const_label == 1 else P

    cdef f8 best_err = np.inf
    cdef int best_f = -1
    cdef f8 best_t = 0.0
    cdef int best_left = 0, best_right = 0
    cdef f8 wl, pl, ql_, ea, eb, v_cur, v_nxt
    for f in range(d):
        for t in range(n):
            svals[t] = X[t, f]
        stable_argsort(svals, sord, sbuf, n)
        wl = 0.0
        pl = 0.0
        for t in range(n - 1):
            j = sord[t]
            wl += wv[j]
            pl += wp[j]
            v_cur = svals[j]
            v_nxt = svals[sord[t + 1]]
            if v_cur != v_nxt:
                ql_ = wl - pl
                ea = pl + (Q - ql_)
                if ea < best_err:
                    best_err = ea
                    best_f = f
                    best_t = midpoint(v_cur, v_nxt)
                    best_left = -1
                    best_right = 1
                eb = ql_ + (P - pl)
                if eb < best_err:
                    best_err = eb
                    best_f = f
                    best_t = midpoint(v_cur, v_nxt)
                    best_left = 1
                    best_right = -1

    return (best_f, best_t, best_left, best_right, best_err, const_label, const_error)


def predict_tree(cnp.ndarray[i4, ndim=1] feature, cnp.ndarray[f8, ndim=1] threshold,
                 cnp.ndarray[i4, ndim=1] left, cnp.ndarray[i4, ndim=1] right,
                 cnp.ndarray[i1, ndim=1] leaf_label, cnp.ndarray[f8, ndim=2] X):
    cdef int n = <int>X.shape[0]
    cdef cnp.ndarray[i1, ndim=1] out = np.empty(n, dtype=np.int8)
    cdef int i, node
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_label[node]
    return out

"""Compare the compiled tree kernels against the pure-Python reference.

Times grow_tree (full feature scan and random-subset mode), best_stump, and
predict_tree on a fixed synthetic problem, asserts that both backends return
bit-identical outputs, and prints per-op medians plus the speedup.

Usage: python benchmarks/bench_backends.py [--repeat N] [--n N] [--d D]
"""

import argparse
import math
import time

import numpy as np

from voteboost.data import SyntheticTask, gen_synthetic
from voteboost.rng import RandomSource
from voteboost._backend import _pytree

try:
    from voteboost._backend import _ctree
except ImportError:
    _ctree = None


def _check_equal(name, a, b):
    if isinstance(a, tuple):
        for i, (x, y) in enumerate(zip(a, b)):
            _check_equal(f"{name}[{i}]", x, y)
        return
    if isinstance(a, dict):
        assert sorted(a) == sorted(b), f"{name}: key mismatch"
        for k in a:
            _check_equal(f"{name}[{k}]", a[k], b[k])
        return
    ax = np.asarray(a)
    bx = np.asarray(b)
    assert ax.shape == bx.shape, f"{name}: shape {ax.shape} vs {bx.shape}"
    assert np.array_equal(ax, bx), f"{name}: values differ"


def _time(fn, repeat):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return sorted(samples)[len(samples) // 2]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=20)
    args = ap.parse_args()

    if _ctree is None:
        raise SystemExit("compiled backend not built; run pip install -e . first")

    data = gen_synthetic(SyntheticTask(kind="twonorm", dimension=args.d),
                         args.n, RandomSource(7))
    X, y = data.X, data.y
    w = np.full(args.n, 1.0 / args.n)
    k = int(math.ceil(math.sqrt(args.d)))

    ops = {
        "grow_tree(full)": lambda mod: mod.grow_tree(X, y, w, 2, args.d, 1234),
        "grow_tree(random-k)": lambda mod: mod.grow_tree(X, y, w, 2, k, 1234),
        "best_stump": lambda mod: mod.best_stump(X, y, w),
    }

    ref_tree = _pytree.grow_tree(X, y, w, 2, args.d, 1234)
    ops["predict_tree"] = lambda mod: mod.predict_tree(
        ref_tree[0], ref_tree[1], ref_tree[2], ref_tree[3], ref_tree[4], X)

    print(f"n={args.n} d={args.d} repeat={args.repeat} (median seconds)")
    print(f"{'op':<22}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, op in ops.items():
        _check_equal(name, op(_pytree), op(_ctree))
        t_py = _time(lambda: op(_pytree), args.repeat)
        t_c = _time(lambda: op(_ctree), args.repeat)
        print(f"{name:<22}{t_py:>12.6f}{t_c:>12.6f}{t_py / t_c:>9.1f}x")
    print("outputs bit-identical across backends")


if __name__ == "__main__":
    main()

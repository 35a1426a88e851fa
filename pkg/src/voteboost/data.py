"""Datasets: containers, CSV ingestion, synthetic generators, splitting,
resampling, and label noise.

The three synthetic tasks follow Breiman's (1996) definitions with D=20 by
default and a = 2/sqrt(D) throughout; the ringnorm scale was checked by
Monte-Carlo Bayes error against the published reference values (see
synthetic_manifest for the constants actually used).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError
from .rng import RandomSource

SYNTHETIC_KINDS = ("twonorm", "threenorm", "ringnorm")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Dataset:
    """Immutable binary classification sample: X (n,d) float64, y (n,) in {-1,+1}."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None
    name: str = ""

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int8)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DomainError("X must be a non-empty 2-D array")
        if y.shape != (X.shape[0],):
            raise DomainError("y length must match X rows")
        if not np.isfinite(X).all():
            raise DomainError("X contains non-finite values")
        if not np.isin(y, (-1, 1)).all():
            raise DomainError("labels must be -1 or +1")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DomainError("feature_names length must match X columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.name)


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative instance weights normalized to sum 1 (within 1e-12)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] < 1:
            raise DomainError("weights must be a non-empty 1-D vector")
        if not np.isfinite(v).all() or (v < 0).any():
            raise DomainError("weights must be finite and nonnegative")
        if abs(float(v.sum()) - 1.0) > 1e-12:
            raise DomainError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        if n < 1:
            raise DomainError("n must be >= 1")
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class SyntheticTask:
    kind: str
    dimension: int = 20

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise DomainError(f"unknown synthetic task {self.kind!r}")
        if self.dimension < 1:
            raise DomainError("dimension must be >= 1")


def synthetic_manifest(task: SyntheticTask, seed: int) -> dict:
    """Constants actually used by gen_synthetic, for the output manifest."""
    a = 2.0 / math.sqrt(task.dimension)
    constants = {"mean_scale": a}
    if task.kind == "ringnorm":
        constants["wide_class_cov_scale"] = 4.0
    return {
        "kind": task.kind,
        "dimension": task.dimension,
        "constants": constants,
        "seed": seed,
    }


def gen_synthetic(task: SyntheticTask, n: int, rng: RandomSource) -> Dataset:
    """Draw n i.i.d. labeled instances for one of the three Gaussian tasks.

    twonorm: class +-1 ~ N(+-a*1, I). threenorm: class +1 is an equal mixture
    of N(+a*1, I) and N(-a*1, I); class -1 ~ N((a,-a,a,-a,...), I). ringnorm:
    class +1 ~ N(0, 4I); class -1 ~ N(a*1, I). a = 2/sqrt(D) everywhere.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    gen = rng.generator()
    d = task.dimension
    a = 2.0 / math.sqrt(d)
    y = (gen.integers(0, 2, size=n).astype(np.int8) * 2 - 1).astype(np.int8)
    if task.kind == "twonorm":
        X = gen.standard_normal((n, d))
        X += (a * y.astype(np.float64))[:, None]
    elif task.kind == "threenorm":
        X = gen.standard_normal((n, d))
        mix = gen.integers(0, 2, size=n)
        pos = y == 1
        mu = np.empty((n, d))
        mu[pos] = np.where(mix[pos, None] == 1, a, -a)
        alt = a * np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
        mu[~pos] = alt
        X += mu
    else:  # ringnorm
        Z = gen.standard_normal((n, d))
        X = np.where((y == 1)[:, None], 2.0 * Z, Z + a)
    return Dataset(X=X, y=y, name=f"{task.kind}")


def load_csv(path, label_column=None, positive_label=None) -> Dataset:
    """Load a headered comma-separated file into a Dataset.

    label_column may be a header name or integer index (default: last column).
    String labels need an explicit positive_label; numeric labels 0/1 map to
    -1/+1 and -1/+1 pass through. Exactly two distinct label values required.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row plus at least one data row")
    header = [h.strip() for h in rows[0]]
    ncol = len(header)
    if label_column is None:
        label_idx = ncol - 1
    elif isinstance(label_column, int):
        if not (-ncol <= label_column < ncol):
            raise DataError(f"label column index {label_column} out of range")
        label_idx = label_column % ncol
    else:
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataError(f"label column {label_column!r} not in header") from None

    raw_labels = []
    feats = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != ncol:
            raise DataError(f"{path}: row {r} has {len(row)} cells, expected {ncol}")
        raw_labels.append(row[label_idx].strip())
        vec = []
        for c, cell in enumerate(row):
            if c == label_idx:
                continue
            try:
                vec.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: row {r}, column {header[c]!r}: "
                    f"cannot parse {cell!r} as a number"
                ) from None
        feats.append(vec)

    distinct = sorted(set(raw_labels))
    if len(distinct) != 2:
        raise DomainError(
            f"label column must have exactly two distinct values, got {distinct}"
        )
    if positive_label is not None:
        if positive_label not in distinct:
            raise DataError(
                f"positive label {positive_label!r} not among labels {distinct}"
            )
        pos = positive_label
    elif set(distinct) == {"0", "1"}:
        pos = "1"
    elif set(distinct) == {"-1", "1"} or set(distinct) == {"-1", "+1"}:
        pos = "1" if "1" in distinct else "+1"
    else:
        raise DataError(
            f"string labels {distinct} need an explicit positive label"
        )
    y = np.array([1 if lab == pos else -1 for lab in raw_labels], dtype=np.int8)
    names = tuple(h for i, h in enumerate(header) if i != label_idx)
    return Dataset(np.array(feats, dtype=np.float64), y, names, name=str(path))


def stratified_split(data: Dataset, train_fraction: float, rng: RandomSource):
    """Per-class split: round(train_fraction*n_c) instances to train, rest to test."""
    if not (0.0 < train_fraction < 1.0):
        raise DomainError("train_fraction must lie in (0,1)")
    gen = rng.generator()
    train_parts = []
    test_parts = []
    for cls in (-1, 1):
        cls_idx = np.nonzero(data.y == cls)[0]
        if cls_idx.shape[0] == 0:
            raise DomainError(f"class {cls} has no instances")
        perm = gen.permutation(cls_idx)
        k = _round_half_up(train_fraction * cls_idx.shape[0])
        if k == 0:
            raise DomainError(f"class {cls} would get no training instances")
        train_parts.append(perm[:k])
        test_parts.append(perm[k:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    if test_idx.shape[0] == 0:
        raise DomainError("split leaves an empty test set")
    return data.subset(train_idx), data.subset(test_idx)


def weighted_resample(data: Dataset, w: WeightVector, m: int, rng: RandomSource) -> Dataset:
    """m i.i.d. draws with replacement, instance i with probability w_i."""
    if len(w) != data.n:
        raise DomainError("weight length must match dataset size")
    if m < 1:
        raise DomainError("m must be >= 1")
    p = w.values
    total = float(np.cumsum(p)[-1])
    if total <= 0.0:
        raise DomainError("weights sum to zero; cannot resample")
    cum = np.cumsum(p)
    u = rng.generator().random(m) * total
    idx = np.searchsorted(cum, u, side="right")
    np.clip(idx, 0, data.n - 1, out=idx)
    return data.subset(idx)


def inject_label_noise(data: Dataset, rate: float, rng: RandomSource):
    """Flip round(rate*N) labels chosen uniformly; returns (noisy, flipped_idx)."""
    if not (0.0 <= rate <= 1.0):
        raise DomainError("rate must lie in [0,1]")
    k = _round_half_up(rate * data.n)
    if k == 0:
        return data, np.empty(0, dtype=np.int64)
    flipped = np.sort(rng.generator().choice(data.n, size=k, replace=False))
    y = data.y.copy()
    y[flipped] = -y[flipped]
    return Dataset(data.X, y, data.feature_names, data.name), flipped.astype(np.int64)

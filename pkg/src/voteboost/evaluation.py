"""Model selection, error measurement, and the statistical comparison battery
(paired t, win/draw/loss, average ranks with the Nemenyi critical difference,
rank-correlation and vote-histogram experiments)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .emphasis import BetaParams, beta_cdf
from .ensembles import (
    Ensemble,
    TrainConfig,
    TRAINERS,
    member_votes,
    predict_labels,
    train_adaboost,
    train_vote_boost,
)
from .errors import DomainError
from .rng import RandomSource
from .trees import LearnerSpec, predict_batch

DEFAULT_SHAPE_VALUES = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.5, 5.0, 10.0, 20.0, 40.0)

# Demsar (2006), two-tailed Nemenyi studentized-range constants q_alpha / sqrt(2),
# k = 2..10.
_NEMENYI_Q = {
    0.05: (1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920),
}


@dataclass(frozen=True)
class ShapeGrid:
    values: tuple = DEFAULT_SHAPE_VALUES

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 1:
            raise DomainError("grid must be non-empty")
        if any(v <= 0 for v in vals):
            raise DomainError("grid values must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise DomainError("grid values must be strictly increasing")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ErrorReport:
    """Per-replicate test errors of one method on one task."""

    errors: np.ndarray

    def __post_init__(self):
        e = np.ascontiguousarray(self.errors, dtype=np.float64)
        if e.ndim != 1 or e.shape[0] < 1:
            raise DomainError("need at least one replicate error")
        if (e < 0).any() or (e > 1).any():
            raise DomainError("errors must lie in [0,1]")
        object.__setattr__(self, "errors", e)

    @property
    def n_replicates(self) -> int:
        return self.errors.shape[0]

    @property
    def mean(self) -> float:
        return float(self.errors.mean())

    @property
    def sd(self) -> float:
        if self.errors.shape[0] < 2:
            return 0.0
        return float(self.errors.std(ddof=1))


def test_error(ens: Ensemble, data: Dataset) -> float:
    """Fraction of instances the ensemble mislabels."""
    return float(np.mean(predict_labels(ens, data.X) != data.y))


def _stratified_fold_ids(y, folds: int, rng: RandomSource):
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    gen = rng.generator()
    for cls in (-1, 1):
        members = np.nonzero(y == cls)[0]
        if members.shape[0] < folds:
            raise DomainError(
                f"class {cls} has {members.shape[0]} instances; needs >= {folds}"
            )
        perm = gen.permutation(members)
        fold_of[perm] = np.arange(perm.shape[0]) % folds
    return fold_of


def cv_select_shape(
    data: Dataset,
    grid: ShapeGrid,
    folds: int,
    cfg: TrainConfig,
    probe=None,
) -> BetaParams:
    """Pick a=b from the grid by stratified k-fold CV of vote-boost test error;
    ties break to the smallest (mildest) value. `probe(fold, train_idx,
    val_idx)` is a test hook observing the fold indices actually used."""
    if folds < 2:
        raise DomainError("folds must be >= 2")
    if len(grid.values) == 1:
        return BetaParams(grid.values[0], grid.values[0])
    fold_of = _stratified_fold_ids(data.y, folds, cfg.rng.derive("cv"))
    totals = np.zeros(len(grid.values))
    for fi in range(folds):
        val_idx = np.nonzero(fold_of == fi)[0]
        train_idx = np.nonzero(fold_of != fi)[0]
        if probe is not None:
            probe(fi, train_idx, val_idx)
        sub_train = data.subset(train_idx)
        sub_val = data.subset(val_idx)
        for gi, ab in enumerate(grid.values):
            sub_cfg = TrainConfig(
                T=cfg.T,
                base_spec=cfg.base_spec,
                rng=cfg.rng.derive("cv", fi, gi),
                emphasis=BetaParams(ab, ab),
            )
            ens = train_vote_boost(sub_train, sub_cfg)
            totals[gi] += test_error(ens, sub_val)
    best_gi = 0
    for gi in range(1, len(grid.values)):
        if totals[gi] < totals[best_gi]:
            best_gi = gi
    value = grid.values[best_gi]
    return BetaParams(value, value)


def learning_curve(method: str, cfg: TrainConfig, data_train: Dataset,
                   data_test: Dataset, checkpoints):
    """Train once to cfg.T; report prefix-ensemble train/test errors at each
    checkpoint. Returns a list of (size, train_error, test_error)."""
    cps = [int(c) for c in checkpoints]
    if not cps or any(b <= a for a, b in zip(cps, cps[1:])):
        raise DomainError("checkpoints must be non-empty and strictly increasing")
    if cps[0] < 1 or cps[-1] > cfg.T:
        raise DomainError("checkpoints must lie in [1, T]")
    if method not in TRAINERS:
        raise DomainError(f"unknown method {method!r}")
    ens = TRAINERS[method](data_train, cfg)
    rows = []
    s_train = np.zeros(data_train.n)
    s_test = np.zeros(data_test.n)
    next_cp = 0
    for t, (wgt, member) in enumerate(zip(ens.member_weights, ens.members), start=1):
        s_train += wgt * predict_batch(member, data_train.X)
        s_test += wgt * predict_batch(member, data_test.X)
        if next_cp < len(cps) and t == cps[next_cp]:
            lab_train = np.where(s_train >= 0.0, 1, -1)
            lab_test = np.where(s_test >= 0.0, 1, -1)
            rows.append(
                (
                    t,
                    float(np.mean(lab_train != data_train.y)),
                    float(np.mean(lab_test != data_test.y)),
                )
            )
            next_cp += 1
    return rows


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    p_value: float
    significant: bool


def _student_t_sf2(t: float, nu: int) -> float:
    # two-sided p-value: P(|T_nu| >= |t|) = I_{nu/(nu+t^2)}(nu/2, 1/2)
    x = nu / (nu + t * t)
    return beta_cdf(x, BetaParams(nu / 2.0, 0.5))


def paired_t_test(errors_a, errors_b, alpha: float = 0.05) -> TTestResult:
    """Two-sided paired t-test on per-replicate differences."""
    a = np.ascontiguousarray(errors_a, dtype=np.float64)
    b = np.ascontiguousarray(errors_b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape or a.shape[0] < 2:
        raise DomainError("need equal-length paired vectors with >= 2 entries")
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0,1)")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    n = d.shape[0]
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, False)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = mean / (sd / math.sqrt(n))
    p = _student_t_sf2(t, n - 1)
    return TTestResult(t, p, p < alpha)


def win_draw_loss(report_pairs, alpha: float = 0.05):
    """Significant-comparison tally for method A over datasets: (wins, draws,
    losses). Each pair is (ErrorReport_a, ErrorReport_b) or raw vectors."""
    wins = draws = losses = 0
    for pair_a, pair_b in report_pairs:
        ea = pair_a.errors if isinstance(pair_a, ErrorReport) else np.asarray(pair_a)
        eb = pair_b.errors if isinstance(pair_b, ErrorReport) else np.asarray(pair_b)
        res = paired_t_test(ea, eb, alpha)
        if not res.significant:
            draws += 1
        elif float(np.mean(ea)) < float(np.mean(eb)):
            wins += 1
        else:
            losses += 1
    return wins, draws, losses


def _rank_average_ties(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.shape[0])
    i = 0
    while i < v.shape[0]:
        j = i
        while j + 1 < v.shape[0] and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class NemenyiResult:
    avg_ranks: np.ndarray
    critical_difference: float
    groups: tuple


def average_ranks_nemenyi(error_matrix, alpha: float = 0.05) -> NemenyiResult:
    """Average ranks (1 = best) over datasets plus the Nemenyi critical
    difference; groups are the maximal sets of methods whose average ranks
    all lie within CD of the group's best."""
    m = np.asarray(error_matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise DomainError("need >= 2 methods and >= 2 datasets")
    if alpha not in _NEMENYI_Q:
        raise DomainError("alpha must be 0.05 or 0.10 (tabulated constants)")
    k, n_datasets = m.shape
    if k > 10:
        raise DomainError("q constants tabulated for k <= 10")
    ranks = np.empty_like(m)
    for j in range(n_datasets):
        ranks[:, j] = _rank_average_ties(m[:, j])
    avg = ranks.mean(axis=1)
    q = _NEMENYI_Q[alpha][k - 2]
    cd = q * math.sqrt(k * (k + 1) / (6.0 * n_datasets))
    order = np.argsort(avg, kind="stable")
    spans = []
    for i in range(k):
        j = i
        while j + 1 < k and avg[order[j + 1]] - avg[order[i]] <= cd:
            j += 1
        spans.append((i, j))
    groups = []
    for i, j in spans:
        if not any(i2 <= i and j <= j2 and (i2, j2) != (i, j) for i2, j2 in spans):
            groups.append(tuple(int(v) for v in order[i : j + 1]))
    return NemenyiResult(avg, cd, tuple(groups))


def _randomized_tie_ranks(values, rng: RandomSource) -> np.ndarray:
    """Ascending ranks 1..n; tied values get their rank block in random order."""
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    jitter = rng.generator().permutation(n)
    order = np.lexsort((jitter, v))
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    return ranks


def spearman_rho(a, b) -> float:
    """Spearman rank correlation (average-tie ranks, Pearson on ranks)."""
    ra = _rank_average_ties(a)
    rb = _rank_average_ties(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float((ra * ra).sum()) * float((rb * rb).sum()))
    if denom == 0.0:
        raise DomainError("rank correlation undefined for constant input")
    return float((ra * rb).sum() / denom)


@dataclass(frozen=True)
class WeightRankResult:
    """Per-shape rank tables (instance, vb_rank, ada_rank, flipped) and the
    Spearman correlation between the two rank vectors."""

    shapes: tuple
    tables: dict
    rho: dict


def weight_rank_experiment(
    data: Dataset,
    shapes,
    T: int,
    rng: RandomSource,
    flipped=None,
    base_spec: LearnerSpec | None = None,
) -> WeightRankResult:
    """Final-weight rank comparison: AdaBoost once, vote-boost per shape, on
    the same data with stump bases; ties in the weight vectors are ranked in
    random order. `flipped` marks noise-injected instances in the tables."""
    shapes = tuple(float(s) for s in shapes)
    if not shapes:
        raise DomainError("need at least one shape")
    if base_spec is None:
        base_spec = LearnerSpec(kind="stump")
    flipped_mask = np.zeros(data.n, dtype=bool)
    if flipped is not None:
        flipped_mask[np.asarray(flipped, dtype=np.int64)] = True

    ada_cfg = TrainConfig(T=T, base_spec=base_spec, rng=rng.derive("ada"))
    _, ada_state = train_adaboost(data, ada_cfg, return_state=True)
    ada_ranks = _randomized_tie_ranks(ada_state.final_weights, rng.derive("rank", "ada"))

    tables = {}
    rho = {}
    for si, ab in enumerate(shapes):
        cfg = TrainConfig(
            T=T,
            base_spec=base_spec,
            rng=rng.derive("vb", si),
            emphasis=BetaParams(ab, ab),
        )
        _, state = train_vote_boost(data, cfg, return_state=True)
        vb_ranks = _randomized_tie_ranks(state.final_weights, rng.derive("rank", "vb", si))
        tables[ab] = [
            (i, int(vb_ranks[i]), int(ada_ranks[i]), bool(flipped_mask[i]))
            for i in range(data.n)
        ]
        rho[ab] = spearman_rho(vb_ranks, ada_ranks)
    return WeightRankResult(shapes, tables, rho)


def vote_histogram(ens: Ensemble, data: Dataset, checkpoints, bins: int):
    """Raw positive-vote-fraction histograms of prefix ensembles, split by
    whether the prefix classifies each instance correctly. Returns rows
    (checkpoint, bin_low, bin_high, correct_count, incorrect_count)."""
    if bins < 2:
        raise DomainError("bins must be >= 2")
    if ens.kind == "adaboost":
        raise DomainError("raw vote fractions are undefined for adaboost")
    cps = [int(c) for c in checkpoints]
    if not cps or any(b <= a for a, b in zip(cps, cps[1:])):
        raise DomainError("checkpoints must be non-empty and strictly increasing")
    if cps[0] < 1 or cps[-1] > ens.T:
        raise DomainError("checkpoints must lie in [1, T]")
    votes = member_votes(ens, data.X)
    pos_cum = np.cumsum(votes == 1, axis=0)
    score = np.zeros(data.n)
    rows = []
    next_cp = 0
    for t in range(1, ens.T + 1):
        score += ens.member_weights[t - 1] * votes[t - 1]
        if next_cp < len(cps) and t == cps[next_cp]:
            frac = pos_cum[t - 1] / t
            correct = np.where(score >= 0.0, 1, -1) == data.y
            which = np.minimum((frac * bins).astype(np.int64), bins - 1)
            for bi in range(bins):
                in_bin = which == bi
                rows.append(
                    (
                        t,
                        bi / bins,
                        (bi + 1) / bins,
                        int(np.count_nonzero(in_bin & correct)),
                        int(np.count_nonzero(in_bin & ~correct)),
                    )
                )
            next_cp += 1
    return rows

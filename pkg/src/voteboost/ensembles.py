"""Ensemble trainers and aggregation.

Four trainers share one per-member stream scheme: member t derives
S_t = cfg.rng.derive(t), resamples with S_t.derive(0) (AdaBoost retry a uses
S_t.derive(0, a)) and seeds random-tree feature sampling from S_t.derive(1).
Because the scheme is identical everywhere, disagreement boosting with a=b=1
consumes exactly the same streams as bagging (and as random forest when the
base is a random tree), which makes those equivalences bit-exact.

All trainers follow the resampling protocol: each round draws a weighted
bootstrap of size N and fits the base learner on it with uniform weights;
instance weights only shape the resampling distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, WeightVector, weighted_resample
from .emphasis import BetaParams, VoteTally, compute_weights
from .errors import ConvergenceError, DomainError
from .rng import RandomSource
from .trees import (
    LearnerSpec,
    TreeModel,
    predict_batch,
    prune_cart,
    train_cart,
    train_random_tree,
    train_stump,
    tree_from_obj,
    tree_to_obj,
)

ENSEMBLE_KINDS = ("vote_boost", "bagging", "random_forest", "adaboost")


@dataclass(frozen=True)
class TrainConfig:
    T: int
    base_spec: LearnerSpec
    rng: RandomSource
    emphasis: BetaParams | None = None

    def __post_init__(self):
        if self.T < 1:
            raise DomainError("ensemble size T must be >= 1")


@dataclass(frozen=True)
class Ensemble:
    members: tuple
    member_weights: np.ndarray
    kind: str
    base_spec: LearnerSpec
    emphasis: BetaParams | None = None

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise DomainError(f"unknown ensemble kind {self.kind!r}")
        members = tuple(self.members)
        if len(members) < 1:
            raise DomainError("ensemble needs at least one member")
        wv = np.ascontiguousarray(self.member_weights, dtype=np.float64)
        if wv.shape != (len(members),):
            raise DomainError("member_weights length must match members")
        if (wv < 0).any() or not np.isfinite(wv).all():
            raise DomainError("member_weights must be finite and nonnegative")
        if abs(float(wv.sum()) - 1.0) > 1e-12:
            raise DomainError("member_weights must sum to 1")
        if (self.emphasis is not None) != (self.kind == "vote_boost"):
            raise DomainError("emphasis is present exactly for vote_boost ensembles")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "member_weights", wv)

    @property
    def T(self) -> int:
        return len(self.members)

    @property
    def n_features(self) -> int:
        return self.members[0].n_features


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float


@dataclass(frozen=True)
class VoteBoostState:
    """Diagnostics: the tally after T rounds, plus the final per-instance
    weights (what round T+1 would have trained on)."""

    tally: VoteTally
    final_weights: np.ndarray


@dataclass(frozen=True)
class AdaBoostState:
    """Diagnostics: final per-instance weights, accepted-round errors and
    member coefficients, and how many rounds were discarded."""

    final_weights: np.ndarray
    epsilons: tuple
    alphas: tuple
    resets: int


def _fit_base(sample: Dataset, spec: LearnerSpec, member_rng: RandomSource) -> TreeModel:
    uniform = WeightVector.uniform(sample.n)
    if spec.kind == "stump":
        return train_stump(sample, uniform)
    if spec.kind == "cart_unpruned":
        return train_cart(sample, uniform, spec)
    if spec.kind == "cart_pruned":
        tree = train_cart(sample, uniform, spec)
        return prune_cart(tree, sample, uniform, spec)
    return train_random_tree(sample, uniform, spec, member_rng.derive(1))


def train_vote_boost(data: Dataset, cfg: TrainConfig, return_state: bool = False):
    """Boost by prediction disagreement: each round resamples with weights set
    by the emphasis density evaluated at every instance's Laplace-corrected
    positive-vote fraction, then tallies the new member's votes on the
    original training set. Member weights are uniform.
    """
    if cfg.emphasis is None:
        raise DomainError("vote boosting needs emphasis parameters")
    n = data.n
    t_plus = np.zeros(n, dtype=np.int64)
    members = []
    for t in range(cfg.T):
        s_t = cfg.rng.derive(t)
        if t == 0:
            w = WeightVector.uniform(n)
        else:
            w = compute_weights(VoteTally(t, t_plus), cfg.emphasis)
        sample = weighted_resample(data, w, n, s_t.derive(0))
        member = _fit_base(sample, cfg.base_spec, s_t)
        t_plus += predict_batch(member, data.X) == 1
        members.append(member)
    ens = Ensemble(
        members=tuple(members),
        member_weights=np.full(cfg.T, 1.0 / cfg.T),
        kind="vote_boost",
        base_spec=cfg.base_spec,
        emphasis=cfg.emphasis,
    )
    if not return_state:
        return ens
    tally = VoteTally(cfg.T, t_plus)
    return ens, VoteBoostState(tally, compute_weights(tally, cfg.emphasis).values)


def _bootstrap_members(data: Dataset, cfg: TrainConfig):
    uniform = WeightVector.uniform(data.n)
    members = []
    for t in range(cfg.T):
        s_t = cfg.rng.derive(t)
        sample = weighted_resample(data, uniform, data.n, s_t.derive(0))
        members.append(_fit_base(sample, cfg.base_spec, s_t))
    return tuple(members)


def train_bagging(data: Dataset, cfg: TrainConfig) -> Ensemble:
    """Independent uniform bootstraps, majority vote."""
    return Ensemble(
        members=_bootstrap_members(data, cfg),
        member_weights=np.full(cfg.T, 1.0 / cfg.T),
        kind="bagging",
        base_spec=cfg.base_spec,
    )


def train_random_forest(data: Dataset, cfg: TrainConfig) -> Ensemble:
    """Bagging of random trees."""
    if cfg.base_spec.kind != "random_tree":
        raise DomainError("random forest requires a random_tree base")
    return Ensemble(
        members=_bootstrap_members(data, cfg),
        member_weights=np.full(cfg.T, 1.0 / cfg.T),
        kind="random_forest",
        base_spec=cfg.base_spec,
    )


def train_adaboost(data: Dataset, cfg: TrainConfig, return_state: bool = False):
    """Discrete AdaBoost with resampling.

    epsilon_t is measured on the original weighted set; epsilon=0 is clamped
    to 1e-10 (alpha stays finite); epsilon >= 0.5 discards the member, resets
    the weights to uniform and redraws, aborting after 25 consecutive resets.
    For 0 < epsilon < 0.5 the update leaves the new member at weighted error
    exactly 1/2 under the updated weights.
    """
    if cfg.base_spec.kind not in ("cart_pruned", "stump"):
        raise DomainError("adaboost requires a cart_pruned or stump base")
    n = data.n
    w = np.full(n, 1.0 / n)
    members = []
    alphas = []
    epsilons = []
    resets = 0
    yf = data.y.astype(np.float64)
    for t in range(cfg.T):
        s_t = cfg.rng.derive(t)
        attempt = 0
        while True:
            sample = weighted_resample(data, WeightVector(w), n, s_t.derive(0, attempt))
            member = _fit_base(sample, cfg.base_spec, s_t)
            preds = predict_batch(member, data.X)
            eps = float(w[preds != data.y].sum())
            if eps < 0.5:
                break
            attempt += 1
            resets += 1
            if attempt >= 25:
                raise ConvergenceError(
                    f"round {t}: 25 consecutive members at error >= 0.5"
                )
            w = np.full(n, 1.0 / n)
        eps_c = max(eps, 1e-10)
        alpha = 0.5 * math.log((1.0 - eps_c) / eps_c)
        w = w * np.exp(-alpha * yf * preds)
        w /= w.sum()
        members.append(member)
        alphas.append(alpha)
        epsilons.append(eps)
    weights = np.array(alphas, dtype=np.float64)
    ens = Ensemble(
        members=tuple(members),
        member_weights=weights / weights.sum(),
        kind="adaboost",
        base_spec=cfg.base_spec,
    )
    if not return_state:
        return ens
    return ens, AdaBoostState(w.copy(), tuple(epsilons), tuple(alphas), resets)


TRAINERS = {
    "vote_boost": train_vote_boost,
    "bagging": train_bagging,
    "random_forest": train_random_forest,
    "adaboost": train_adaboost,
}


# ---------------------------------------------------------------------------
# aggregation


def _check_matrix(ens: Ensemble, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != ens.n_features:
        raise DomainError(f"expected {ens.n_features} features")
    return X


def member_votes(ens: Ensemble, X) -> np.ndarray:
    """(T, n) int8 matrix of member predictions."""
    X = _check_matrix(ens, X)
    return np.stack([predict_batch(m, X) for m in ens.members])


def decision_scores(ens: Ensemble, X) -> np.ndarray:
    """Weighted vote scores in [-1, 1] for every row."""
    X = _check_matrix(ens, X)
    s = np.zeros(X.shape[0])
    for wgt, member in zip(ens.member_weights, ens.members):
        s += wgt * predict_batch(member, X)
    return np.clip(s, -1.0, 1.0)


def predict_labels(ens: Ensemble, X) -> np.ndarray:
    """Sign of the score per row; ties (score 0) go to +1."""
    return np.where(decision_scores(ens, X) >= 0.0, 1, -1).astype(np.int8)


def predict_ensemble(ens: Ensemble, x) -> Prediction:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != ens.n_features:
        raise DomainError(f"expected {ens.n_features} attributes")
    score = float(decision_scores(ens, x[None, :])[0])
    return Prediction(label=1 if score >= 0.0 else -1, score=score)


def vote_fraction_profile(ens: Ensemble, data: Dataset, corrected: bool = False) -> np.ndarray:
    """Per-instance fraction of members voting +1; Laplace-corrected when
    requested. The raw count form is meaningless for weighted-vote ensembles,
    so it is rejected for adaboost."""
    if ens.kind == "adaboost" and not corrected:
        raise DomainError("raw vote fractions are undefined for adaboost; "
                          "use corrected=True or a uniform-vote ensemble")
    counts = (member_votes(ens, data.X) == 1).sum(axis=0)
    if corrected:
        return (counts + 1) / (ens.T + 2)
    return counts / ens.T


def margin(ens: Ensemble, x, y: int) -> float:
    """Signed vote margin y*score; negative exactly when misclassified."""
    if y not in (-1, 1):
        raise DomainError("label must be -1 or +1")
    return float(y * predict_ensemble(ens, x).score)


# ---------------------------------------------------------------------------
# serialization


def ensemble_to_obj(ens: Ensemble) -> dict:
    spec = ens.base_spec
    return {
        "kind": ens.kind,
        "base_spec": {
            "kind": spec.kind,
            "min_split": spec.min_split,
            "k_features": spec.k_features,
        },
        "emphasis": (
            None if ens.emphasis is None else {"a": ens.emphasis.a, "b": ens.emphasis.b}
        ),
        "member_weights": [float(v) for v in ens.member_weights],
        "members": [tree_to_obj(m) for m in ens.members],
        "n_features": ens.n_features,
    }


def ensemble_from_obj(obj: dict) -> Ensemble:
    spec = LearnerSpec(
        kind=obj["base_spec"]["kind"],
        min_split=obj["base_spec"]["min_split"],
        k_features=obj["base_spec"]["k_features"],
    )
    emphasis = None
    if obj.get("emphasis") is not None:
        emphasis = BetaParams(obj["emphasis"]["a"], obj["emphasis"]["b"])
    nf = obj["n_features"]
    return Ensemble(
        members=tuple(tree_from_obj(nodes, nf) for nodes in obj["members"]),
        member_weights=np.array(obj["member_weights"], dtype=np.float64),
        kind=obj["kind"],
        base_spec=spec,
        emphasis=emphasis,
    )


def ensemble_to_json(ens: Ensemble) -> str:
    return json.dumps(ensemble_to_obj(ens), sort_keys=True, separators=(",", ":"))


def ensemble_from_json(text: str) -> Ensemble:
    return ensemble_from_obj(json.loads(text))

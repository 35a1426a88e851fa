import math

import numpy as np
import pytest
from util import dset

from voteboost.data import (
    Dataset,
    SyntheticTask,
    WeightVector,
    gen_synthetic,
    weighted_resample,
)
from voteboost.emphasis import BetaParams, VoteTally, compute_weights
from voteboost.ensembles import (
    AdaBoostState,
    Ensemble,
    TrainConfig,
    decision_scores,
    ensemble_from_json,
    ensemble_to_json,
    ensemble_to_obj,
    margin,
    member_votes,
    predict_ensemble,
    predict_labels,
    train_adaboost,
    train_bagging,
    train_random_forest,
    train_vote_boost,
    vote_fraction_profile,
)
from voteboost.errors import ConvergenceError, DomainError
from voteboost.evaluation import test_error as measured_error
from voteboost.rng import RandomSource
from voteboost.trees import LearnerSpec, predict_batch, tree_from_obj, tree_to_json


def leaf(label, d=2):
    return tree_from_obj([{"label": label}], d)


def leaf_ensemble(labels, weights=None, kind="bagging", d=2):
    T = len(labels)
    w = np.full(T, 1.0 / T) if weights is None else np.asarray(weights, float)
    return Ensemble(
        members=tuple(leaf(l, d) for l in labels),
        member_weights=w,
        kind=kind,
        base_spec=LearnerSpec("cart_unpruned"),
    )


def twonorm(n, seed, tag=0):
    return gen_synthetic(SyntheticTask("twonorm"), n, RandomSource(seed).derive("d", tag))


def cfg_for(kind, T, seed, base="cart_unpruned", ab=None, k=None):
    return TrainConfig(
        T=T,
        base_spec=LearnerSpec(base, k_features=k),
        rng=RandomSource(seed).derive("train"),
        emphasis=None if ab is None else BetaParams(ab, ab),
    )


def member_projection(ens):
    """The comparison key for the shared-stream equivalences: everything
    except the ensemble's own kind/emphasis tag."""
    return (
        ens.base_spec,
        ens.member_weights.tobytes(),
        [tree_to_json(m) for m in ens.members],
    )


class TestTrainConfig:
    def test_t_floor(self):
        with pytest.raises(DomainError):
            TrainConfig(T=0, base_spec=LearnerSpec("stump"), rng=RandomSource(0))


class TestEnsembleInvariants:
    def test_emphasis_exactly_for_vote_boost(self):
        with pytest.raises(DomainError):
            Ensemble(
                members=(leaf(1),),
                member_weights=np.ones(1),
                kind="bagging",
                base_spec=LearnerSpec("cart_unpruned"),
                emphasis=BetaParams(2, 2),
            )
        with pytest.raises(DomainError):
            Ensemble(
                members=(leaf(1),),
                member_weights=np.ones(1),
                kind="vote_boost",
                base_spec=LearnerSpec("cart_unpruned"),
            )

    def test_weights_normalized(self):
        with pytest.raises(DomainError):
            leaf_ensemble([1, -1], weights=[0.6, 0.6])

    def test_weights_nonnegative(self):
        with pytest.raises(DomainError):
            leaf_ensemble([1, -1], weights=[1.5, -0.5])

    def test_weight_length(self):
        with pytest.raises(DomainError):
            leaf_ensemble([1, -1], weights=[1.0])

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            leaf_ensemble([1], kind="stacking")

    def test_properties(self):
        ens = leaf_ensemble([1, -1, 1], d=7)
        assert ens.T == 3
        assert ens.n_features == 7


class TestEquivalences:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_uniform_emphasis_equals_bagging(self, seed):
        data = twonorm(60, seed)
        vb = train_vote_boost(data, cfg_for("vb", 10, seed, ab=1.0))
        bg = train_bagging(data, cfg_for("bag", 10, seed))
        assert member_projection(vb) == member_projection(bg)

    @pytest.mark.parametrize("seed", [3, 4])
    def test_uniform_emphasis_random_trees_equals_forest(self, seed):
        data = twonorm(60, seed)
        vb = train_vote_boost(data, cfg_for("vb", 10, seed, base="random_tree", ab=1.0))
        rf = train_random_forest(data, cfg_for("rf", 10, seed, base="random_tree"))
        assert member_projection(vb) == member_projection(rf)

    def test_full_subset_forest_equals_bagging_members(self):
        data = twonorm(50, 11)
        rf = train_random_forest(data, cfg_for("rf", 8, 11, base="random_tree", k=20))
        bg = train_bagging(data, cfg_for("bag", 8, 11))
        assert [tree_to_json(m) for m in rf.members] == [
            tree_to_json(m) for m in bg.members
        ]

    def test_first_round_ignores_emphasis(self):
        data = twonorm(50, 12)
        vb = train_vote_boost(data, cfg_for("vb", 1, 12, ab=30.0))
        bg = train_bagging(data, cfg_for("bag", 1, 12))
        assert tree_to_json(vb.members[0]) == tree_to_json(bg.members[0])


class TestVoteBoost:
    def test_requires_emphasis(self):
        data = twonorm(30, 20)
        with pytest.raises(DomainError):
            train_vote_boost(data, cfg_for("vb", 3, 20))

    def test_tally_matches_member_replay(self):
        data = twonorm(80, 21)
        ens, state = train_vote_boost(
            data, cfg_for("vb", 15, 21, ab=2.0), return_state=True
        )
        replay = (member_votes(ens, data.X) == 1).sum(axis=0)
        assert state.tally.t == 15
        assert np.array_equal(state.tally.t_plus, replay)

    def test_final_weights_are_emphasis_of_tally(self):
        data = twonorm(40, 22)
        ens, state = train_vote_boost(
            data, cfg_for("vb", 8, 22, ab=5.0), return_state=True
        )
        expect = compute_weights(state.tally, BetaParams(5, 5)).values
        assert np.array_equal(state.final_weights, expect)

    def test_uniform_member_weights(self):
        data = twonorm(30, 23)
        ens = train_vote_boost(data, cfg_for("vb", 7, 23, ab=2.0))
        assert np.array_equal(ens.member_weights, np.full(7, 1.0 / 7.0))
        assert ens.kind == "vote_boost"
        assert ens.emphasis == BetaParams(2, 2)

    def test_reproducible_and_seed_sensitive(self):
        data = twonorm(40, 24)
        a = train_vote_boost(data, cfg_for("vb", 6, 24, ab=2.0))
        b = train_vote_boost(data, cfg_for("vb", 6, 24, ab=2.0))
        c = train_vote_boost(data, cfg_for("vb", 6, 25, ab=2.0))
        assert ensemble_to_json(a) == ensemble_to_json(b)
        assert ensemble_to_json(a) != ensemble_to_json(c)


class TestAdaBoost:
    def separable(self):
        return dset([[1], [2], [3], [4]], [-1, -1, 1, 1])

    def test_base_kind_guard(self):
        data = self.separable()
        for base in ("cart_unpruned", "random_tree"):
            with pytest.raises(DomainError):
                train_adaboost(data, cfg_for("ada", 3, 0, base=base))

    def test_separable_reaches_zero_error(self):
        data = self.separable()
        ens = train_adaboost(data, cfg_for("ada", 10, 1, base="stump"))
        assert measured_error(ens, data) == 0.0

    def test_epsilon_zero_clamp(self):
        data = self.separable()
        ens, state = train_adaboost(
            data, cfg_for("ada", 3, 2, base="stump"), return_state=True
        )
        assert state.epsilons[0] == 0.0
        expect_alpha = 0.5 * math.log((1.0 - 1e-10) / 1e-10)
        assert state.alphas[0] == pytest.approx(expect_alpha, rel=1e-12)

    def test_quarter_error_alpha(self):
        # alternating labels: every stump evaluates to error 0.25, 0.5 or
        # 0.75 on the original set, so the first accepted round has 0.25
        data = dset([[1], [2], [3], [4]], [1, -1, 1, -1])
        ens, state = train_adaboost(
            data, cfg_for("ada", 1, 3, base="stump"), return_state=True
        )
        assert state.epsilons[0] == 0.25
        assert state.alphas[0] == pytest.approx(0.5 * math.log(3.0), rel=1e-15)
        assert state.alphas[0] == pytest.approx(0.549306, abs=1e-6)

    def test_fixed_point_and_weight_replay(self):
        gen = np.random.default_rng(77)
        X = gen.normal(size=(60, 3))
        y = np.where(X[:, 0] + 0.3 * gen.normal(size=60) > 0, 1, -1).astype(np.int8)
        data = dset(X, y)
        ens, state = train_adaboost(
            data, cfg_for("ada", 12, 4, base="stump"), return_state=True
        )
        assert state.resets == 0  # replay below assumes no discarded rounds
        w = np.full(60, 1.0 / 60.0)
        for t, member in enumerate(ens.members):
            preds = predict_batch(member, X)
            eps = float(w[preds != y].sum())
            assert eps == state.epsilons[t]
            alpha = 0.5 * math.log((1.0 - max(eps, 1e-10)) / max(eps, 1e-10))
            assert alpha == state.alphas[t]
            w = w * np.exp(-alpha * y.astype(float) * preds)
            w /= w.sum()
            if 0.0 < eps < 0.5:
                assert abs(float(w[preds != y].sum()) - 0.5) <= 1e-10
        assert np.array_equal(w, state.final_weights)

    def test_member_weights_proportional_to_alphas(self):
        gen = np.random.default_rng(78)
        X = gen.normal(size=(40, 2))
        y = np.where(X[:, 1] > 0.1, 1, -1).astype(np.int8)
        y[::7] = -y[::7]
        data = dset(X, y)
        ens, state = train_adaboost(
            data, cfg_for("ada", 8, 5, base="stump"), return_state=True
        )
        alphas = np.array(state.alphas)
        assert np.allclose(ens.member_weights, alphas / alphas.sum(), rtol=1e-14)

    def test_single_round_vote_is_member(self):
        data = self.separable()
        ens = train_adaboost(data, cfg_for("ada", 1, 6, base="stump"))
        assert np.array_equal(predict_labels(ens, data.X), predict_batch(ens.members[0], data.X))

    def test_unlearnable_data_aborts(self):
        # XOR: every stump and every constant sits at error exactly 0.5
        data = dset([[0, 0], [0, 1], [1, 0], [1, 1]], [-1, 1, 1, -1])
        with pytest.raises(ConvergenceError):
            train_adaboost(data, cfg_for("ada", 2, 7, base="stump"))

    def test_pruned_cart_base_runs(self):
        data = twonorm(60, 79)
        ens = train_adaboost(data, cfg_for("ada", 3, 8, base="cart_pruned"))
        assert ens.T == 3
        assert ens.kind == "adaboost"


class TestAggregation:
    def test_majority_score(self):
        ens = leaf_ensemble([1, 1, -1])
        p = predict_ensemble(ens, [0.0, 0.0])
        assert p.label == 1
        assert p.score == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_unanimous_negative(self):
        ens = leaf_ensemble([-1, -1, -1])
        p = predict_ensemble(ens, [5.0, -1.0])
        assert p.label == -1
        assert p.score == -1.0

    def test_even_split_tie_positive(self):
        ens = leaf_ensemble([1, -1])
        p = predict_ensemble(ens, [0.0, 0.0])
        assert p.score == 0.0
        assert p.label == 1

    def test_dimension_mismatch(self):
        ens = leaf_ensemble([1], d=3)
        with pytest.raises(DomainError):
            predict_ensemble(ens, [1.0, 2.0])
        with pytest.raises(DomainError):
            decision_scores(ens, np.zeros((2, 2)))

    def test_label_invariant_under_weight_rescaling(self):
        data = twonorm(50, 30)
        ens = train_adaboost(
            Dataset(data.X[:, :2], data.y, name="2d"),
            cfg_for("ada", 5, 9, base="stump"),
        )
        alphas = ens.member_weights
        rescaled = Ensemble(
            members=ens.members,
            member_weights=(alphas * 7.0) / float((alphas * 7.0).sum()),
            kind=ens.kind,
            base_spec=ens.base_spec,
        )
        probe = np.ascontiguousarray(twonorm(80, 31).X[:, :2])
        assert np.array_equal(predict_labels(ens, probe), predict_labels(rescaled, probe))

    def test_margin_examples(self):
        ens5 = leaf_ensemble([1, 1, 1, -1, -1])
        assert margin(ens5, [0.0, 0.0], 1) == pytest.approx(0.2, rel=1e-12)
        unanimous = leaf_ensemble([1, 1, 1])
        assert margin(unanimous, [0.0, 0.0], 1) == 1.0
        assert margin(unanimous, [0.0, 0.0], -1) == -1.0
        with pytest.raises(DomainError):
            margin(unanimous, [0.0, 0.0], 0)

    def test_scores_clipped_range(self):
        data = twonorm(40, 32)
        ens = train_bagging(data, cfg_for("bag", 9, 10))
        s = decision_scores(ens, data.X)
        assert (s >= -1.0).all() and (s <= 1.0).all()


class TestVoteFractionProfile:
    def test_unanimous_positive(self):
        ens = leaf_ensemble([1, 1, 1, 1, 1])
        data = dset([[0.0, 0.0], [1.0, 1.0]], [1, -1])
        raw = vote_fraction_profile(ens, data)
        cor = vote_fraction_profile(ens, data, corrected=True)
        assert np.array_equal(raw, np.ones(2))
        assert np.allclose(cor, np.full(2, 6.0 / 7.0), rtol=1e-15)

    def test_raw_relates_to_score(self):
        data = twonorm(60, 33)
        ens = train_vote_boost(data, cfg_for("vb", 9, 11, ab=2.0))
        raw = vote_fraction_profile(ens, data)
        F = decision_scores(ens, data.X)
        assert np.allclose(raw, (1.0 + F) / 2.0, atol=1e-12)

    def test_single_member_binary(self):
        data = twonorm(30, 34)
        ens = train_bagging(data, cfg_for("bag", 1, 12))
        raw = vote_fraction_profile(ens, data)
        assert set(np.unique(raw)) <= {0.0, 1.0}

    def test_adaboost_raw_rejected(self):
        data = dset([[1], [2], [3], [4]], [-1, -1, 1, 1])
        ens = train_adaboost(data, cfg_for("ada", 3, 13, base="stump"))
        with pytest.raises(DomainError):
            vote_fraction_profile(ens, data)
        cor = vote_fraction_profile(ens, data, corrected=True)
        assert ((0 < cor) & (cor < 1)).all()


class TestBootstrapCoverage:
    def test_out_of_bag_fraction(self):
        n = 500
        data = twonorm(n, 35)
        w = WeightVector.uniform(n)
        root = RandomSource(99).derive("oob")
        fracs = []
        for t in range(100):
            sample = weighted_resample(data, w, n, root.derive(t))
            oob = n - np.unique(sample.X[:, 0]).shape[0]
            fracs.append(oob / n)
        assert abs(float(np.mean(fracs)) - math.exp(-1.0)) <= 0.03


class TestSerialization:
    def test_round_trip_vote_boost(self):
        data = twonorm(50, 36)
        ens = train_vote_boost(data, cfg_for("vb", 6, 14, base="random_tree", ab=2.5))
        back = ensemble_from_json(ensemble_to_json(ens))
        assert back.kind == "vote_boost"
        assert back.base_spec == ens.base_spec
        assert back.emphasis == BetaParams(2.5, 2.5)
        assert back.n_features == 20
        assert np.array_equal(back.member_weights, ens.member_weights)
        assert ensemble_to_json(back) == ensemble_to_json(ens)
        assert np.array_equal(predict_labels(back, data.X), predict_labels(ens, data.X))

    def test_round_trip_adaboost_weights(self):
        gen = np.random.default_rng(80)
        X = gen.normal(size=(40, 2))
        y = np.where(X[:, 0] > 0, 1, -1).astype(np.int8)
        y[::5] = -y[::5]
        data = dset(X, y)
        ens = train_adaboost(data, cfg_for("ada", 5, 15, base="stump"))
        back = ensemble_from_json(ensemble_to_json(ens))
        assert back.emphasis is None
        assert np.array_equal(back.member_weights, ens.member_weights)

    def test_obj_schema(self):
        ens = leaf_ensemble([1, -1])
        obj = ensemble_to_obj(ens)
        assert set(obj) == {
            "kind", "base_spec", "emphasis", "member_weights", "members", "n_features",
        }
        assert obj["emphasis"] is None
        assert obj["n_features"] == 2


@pytest.mark.slow
class TestBoostingImproves:
    def test_stump_ensemble_beats_single_stump(self):
        root = RandomSource(4242)
        errs_T, errs_1 = [], []
        cfg_base = LearnerSpec("stump")
        for r in range(50):
            train = gen_synthetic(SyntheticTask("twonorm"), 300, root.derive("tr", r))
            test = gen_synthetic(SyntheticTask("twonorm"), 2000, root.derive("te", r))
            big = train_vote_boost(
                train,
                TrainConfig(T=100, base_spec=cfg_base,
                            rng=root.derive("fit", r), emphasis=BetaParams(30, 30)),
            )
            one = train_vote_boost(
                train,
                TrainConfig(T=1, base_spec=cfg_base,
                            rng=root.derive("fit1", r), emphasis=BetaParams(30, 30)),
            )
            errs_T.append(measured_error(big, test))
            errs_1.append(measured_error(one, test))
        assert float(np.mean(errs_T)) < float(np.mean(errs_1))

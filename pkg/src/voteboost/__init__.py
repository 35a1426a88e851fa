"""Vote-boosting ensembles for binary classification.

Emphasis is placed on training instances according to how much the current
ensemble disagrees about them, through a symmetric (or asymmetric) beta
density of each instance's Laplace-corrected positive-vote fraction.
Bagging, AdaBoost with weighted resampling, and random forests are included
as baselines sharing the same base learners and random streams.
"""

__version__ = "0.1.0"

from ._backend import BACKEND_NAME
from .data import (
    Dataset,
    SyntheticTask,
    SYNTHETIC_KINDS,
    WeightVector,
    gen_synthetic,
    inject_label_noise,
    load_csv,
    stratified_split,
    synthetic_manifest,
    weighted_resample,
)
from .emphasis import (
    BetaParams,
    VoteTally,
    beta_cdf,
    beta_pdf,
    compute_weights,
    cost_functional,
    laplace_fraction,
    log_gamma,
    snapshot_rows,
)
from .ensembles import (
    ENSEMBLE_KINDS,
    Ensemble,
    Prediction,
    TrainConfig,
    decision_scores,
    ensemble_from_json,
    ensemble_to_json,
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
from .errors import (
    ConvergenceError,
    DataError,
    DomainError,
    InternalError,
    VoteBoostError,
)
from .evaluation import (
    DEFAULT_SHAPE_VALUES,
    ErrorReport,
    NemenyiResult,
    ShapeGrid,
    TTestResult,
    average_ranks_nemenyi,
    cv_select_shape,
    learning_curve,
    paired_t_test,
    spearman_rho,
    test_error,
    vote_histogram,
    weight_rank_experiment,
    win_draw_loss,
)
from .rng import RandomSource
from .trees import (
    LEARNER_KINDS,
    LearnerSpec,
    TreeModel,
    cost_complexity_sequence,
    predict_batch,
    prune_cart,
    train_cart,
    train_random_tree,
    train_stump,
    tree_from_json,
    tree_predict,
    tree_to_json,
)

__all__ = [
    "BACKEND_NAME",
    "BetaParams",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "DEFAULT_SHAPE_VALUES",
    "DomainError",
    "Ensemble",
    "ENSEMBLE_KINDS",
    "ErrorReport",
    "InternalError",
    "LEARNER_KINDS",
    "LearnerSpec",
    "NemenyiResult",
    "Prediction",
    "RandomSource",
    "ShapeGrid",
    "SyntheticTask",
    "SYNTHETIC_KINDS",
    "TrainConfig",
    "TreeModel",
    "TTestResult",
    "VoteBoostError",
    "VoteTally",
    "WeightVector",
    "average_ranks_nemenyi",
    "beta_cdf",
    "beta_pdf",
    "compute_weights",
    "cost_complexity_sequence",
    "cost_functional",
    "cv_select_shape",
    "decision_scores",
    "ensemble_from_json",
    "ensemble_to_json",
    "gen_synthetic",
    "inject_label_noise",
    "laplace_fraction",
    "learning_curve",
    "load_csv",
    "log_gamma",
    "margin",
    "member_votes",
    "paired_t_test",
    "predict_batch",
    "predict_ensemble",
    "predict_labels",
    "prune_cart",
    "snapshot_rows",
    "spearman_rho",
    "stratified_split",
    "synthetic_manifest",
    "test_error",
    "train_adaboost",
    "train_bagging",
    "train_cart",
    "train_random_forest",
    "train_random_tree",
    "train_stump",
    "train_vote_boost",
    "tree_from_json",
    "tree_predict",
    "tree_to_json",
    "vote_fraction_profile",
    "vote_histogram",
    "weight_rank_experiment",
    "weighted_resample",
    "win_draw_loss",
]

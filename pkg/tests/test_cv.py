import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randomlab.cv import (
    CVError,
    CvDiffStatistic,
    CvStatConfig,
    FoldPlan,
    cv_diff_statistic,
    cv_loss,
    make_fold_plan,
    sobol_index,
)
from randomlab.dataset import ExperimentData
from randomlab.models import PredictorSpec


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 200), st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_fold_plan_partitions_evenly(n, k, seed):
    if k > n:
        with pytest.raises(CVError):
            make_fold_plan(n, k, seed)
        return
    sizes = make_fold_plan(n, k, seed).sizes()
    assert sizes.sum() == n and sizes.max() - sizes.min() <= 1


def test_fold_plan_validation():
    with pytest.raises(CVError):
        FoldPlan(2, [0, 0, 0])
    with pytest.raises(CVError):
        FoldPlan(1, [0, 0])


def test_linear_cv_loss_matches_hand_computed_folds():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2))
    y = X @ [1.0, -2.0] + rng.normal(0, 1, 30)
    plan = make_fold_plan(30, 3, 1)
    losses = []
    for j in range(3):
        te = plan.membership == j
        A = np.column_stack([np.ones((~te).sum()), X[~te]])
        coef = np.linalg.lstsq(A, y[~te], rcond=None)[0]
        pred = coef[0] + X[te] @ coef[1:]
        losses.append(np.mean((y[te] - pred) ** 2))
    assert cv_loss(PredictorSpec("linear"), y, X, plan) == pytest.approx(np.mean(losses), rel=1e-12)


def test_constant_cv_loss_is_leave_fold_out_variance():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    plan = FoldPlan(2, [0, 0, 1, 1])
    # fold 0 predicted by mean 3.5, fold 1 by mean 1.5
    expected = ((2.5**2 + 1.5**2) / 2 + (1.5**2 + 2.5**2) / 2) / 2
    assert cv_loss(PredictorSpec("constant"), y, np.empty((4, 0)), plan) == pytest.approx(expected)


def _data(n=80, signal=1.0, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    z = rng.integers(0, 2, n)
    return ExperimentData(X[:, 0] + signal * z + rng.normal(0, 0.1, n), z, X)


def test_identical_models_give_exact_zero():
    data = _data()
    spec = PredictorSpec("random_forest", "covariates_treatment", trees=10)
    cfg = CvStatConfig(spec, spec, make_fold_plan(data.n, 5, 0), 3)
    assert cv_diff_statistic(cfg, data, data.treatments) == 0.0


def test_noise_free_outcome_equal_to_treatment():
    rng = np.random.default_rng(1)
    z = rng.integers(0, 2, 100)
    data = ExperimentData(z.astype(float), z, rng.normal(size=(100, 1)))
    cfg = CvStatConfig(PredictorSpec("linear", "covariates"),
                       PredictorSpec("linear", "covariates_treatment"), make_fold_plan(100, 5, 0))
    stat = cv_diff_statistic(cfg, data, z)
    assert stat == pytest.approx(np.var(z, ddof=1), rel=0.1)
    assert 0.9 < sobol_index(stat, data.outcomes) <= 1.1


def test_statistic_is_deterministic_and_picklable():
    data = _data()
    cfg = CvStatConfig(PredictorSpec("random_forest", "covariates", trees=10),
                       PredictorSpec("random_forest", "covariates_treatment", trees=10),
                       make_fold_plan(data.n, 5, 0), 7)
    stat = CvDiffStatistic(cfg)
    first = stat(data, data.treatments)
    clone = pickle.loads(pickle.dumps(stat))
    assert clone._cache == {}
    assert clone(data, data.treatments) == first
    assert CvDiffStatistic(cfg)(data, data.treatments) == first


def test_sobol_rejects_constant_outcome():
    with pytest.raises(CVError):
        sobol_index(1.0, [2.0, 2.0, 2.0])

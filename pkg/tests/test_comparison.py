import numpy as np
import pytest
import statsmodels.api as sm

from randomlab.dataset import Adjacency
from randomlab.frt import (
    StatisticError,
    edge_level_contrast,
    lin_t,
    neyman_t,
    shifted_ks,
    variance_ratio,
)


def test_variance_ratio():
    z = np.array([1, 1, 0, 0])
    with pytest.raises(StatisticError, match="zero control variance"):
        variance_ratio([0.0, 2.0, 1.0, 1.0], z)
    assert variance_ratio([0.0, 2.0, 0.0, 2.0], z) == 1.0


def test_shifted_ks_zero_for_exact_shift():
    rng = np.random.default_rng(0)
    # integer data keeps the estimated shift exact
    base = rng.integers(-10, 10, 20).astype(float)
    y = np.concatenate([base + 20.0, base])
    z = np.repeat([1, 0], 20)
    assert shifted_ks(y, z, 20.0) == 0.0
    assert shifted_ks(y, z, "dim") == pytest.approx(0.0)
    assert shifted_ks(y, z, 0.0) > 0.5


def test_ks_matches_scipy():
    from scipy.stats import ks_2samp

    rng = np.random.default_rng(1)
    y = rng.normal(size=50)
    z = np.repeat([1, 0], 25)
    assert shifted_ks(y, z, 0.0) == pytest.approx(ks_2samp(y[z == 1], y[z == 0]).statistic)


def test_edge_level_contrast():
    adj = Adjacency(6, [(0, 4), (1, 4), (2, 5), (3, 5)])
    z = np.array([0, 0, 0, 0, 1, 0])
    y = np.array([2.0, 4.0, 1.0, 3.0, 9.0, 9.0])
    assert edge_level_contrast(y, z, adj, [0, 1, 2, 3]) == 1.0
    with pytest.raises(StatisticError):
        edge_level_contrast(y, z, adj, [0, 1])


def test_neyman_t_formula():
    y = np.array([3.0, 5.0, 4.0, 1.0, 2.0, 0.0])
    z = np.array([1, 1, 1, 0, 0, 0])
    se = np.sqrt(1.0 / 3 + 1.0 / 3)
    assert neyman_t(y, z) == pytest.approx(3.0 / se)


def test_lin_t_matches_statsmodels_hc2():
    rng = np.random.default_rng(2)
    n = 80
    X = rng.normal(size=(n, 2))
    z = rng.integers(0, 2, n)
    y = X[:, 0] + z * (1 + X[:, 1]) + rng.normal(size=n) * (1 + z)
    Xc = X - X.mean(axis=0)
    A = np.column_stack([np.ones(n), z, Xc, Xc * z[:, None]])
    ref = sm.OLS(y, A).fit(cov_type="HC2")
    assert lin_t(y, z, X) == pytest.approx(ref.tvalues[1], rel=1e-9)

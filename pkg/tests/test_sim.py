import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from randomlab._rng import stream
from randomlab.sim import (
    CSV_COLUMNS,
    DgpError,
    DgpSpec,
    Method,
    SimulationError,
    fig1_effect_modifier,
    generate,
    random_correlation,
    run_study,
)


def test_correlation_scalar_case():
    assert random_correlation(1, np.random.default_rng(0)).tolist() == [[1.0]]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_correlation_matrix_is_valid(p, seed):
    C = random_correlation(p, np.random.default_rng(seed))
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) == 1.0)
    assert np.linalg.eigvalsh(C).min() > 0


def test_correlation_two_dimensional_spans_both_signs():
    rng = np.random.default_rng(1)
    r = np.array([random_correlation(2, rng)[0, 1] for _ in range(1000)])
    assert np.all(np.abs(r) < 1) and r.min() < -0.5 and r.max() > 0.5


def test_correlation_two_dimensional_is_uniform():
    # with p = 2 the off-diagonal entry of a uniform correlation matrix is U(-1, 1)
    rng = np.random.default_rng(2)
    r = np.array([random_correlation(2, rng)[0, 1] for _ in range(4000)])
    assert stats.kstest(r, stats.uniform(-1, 2).cdf).pvalue > 0.001


def test_fig1_effect_modifier_clipping():
    assert fig1_effect_modifier([0.1], 1.0)[0] == 11.0
    assert fig1_effect_modifier([-0.1], 1.0)[0] == -9.0
    assert fig1_effect_modifier([0.0], 1.0)[0] == 1.0
    assert fig1_effect_modifier([4.0], 2.0)[0] == 3.0
    assert np.all(fig1_effect_modifier(np.linspace(-3, 3, 7), 0.0) == 0.0)


def test_fig1_null_has_no_treatment_coefficient():
    small = 0
    for rep in range(100):
        data, _ = generate(DgpSpec("fig1_heterog"), 0.0, stream(3, rep))
        A = np.column_stack([np.ones(data.n), data.covariates, data.treatments])
        fit = np.linalg.lstsq(A, data.outcomes, rcond=None)
        resid = data.outcomes - A @ fit[0]
        s2 = resid @ resid / (data.n - A.shape[1])
        se = np.sqrt(s2 * np.linalg.inv(A.T @ A)[-1, -1])
        small += abs(fit[0][-1] / se) < 4
    assert small >= 95


def test_spill_const_group_means():
    groups = {"control": [], "spill": [], "treated": []}
    for rep in range(60):
        data, _ = generate(DgpSpec("spill_const"), 1.0, stream(4, rep))
        exposed = data.adjacency.exposure(data.treatments) > 0
        z = data.treatments == 1
        groups["treated"].append(data.outcomes[z])
        groups["spill"].append(data.outcomes[~z & exposed])
        groups["control"].append(data.outcomes[~z & ~exposed])
    means = {k: np.concatenate(v).mean() for k, v in groups.items()}
    assert means["control"] == pytest.approx(2.0, abs=0.05)
    assert means["spill"] == pytest.approx(3.0, abs=0.05)
    assert means["treated"] == pytest.approx(3.5, abs=0.05)


@pytest.mark.parametrize("name", ["spill_const", "spill_nonlinear"])
def test_spillover_dgp_structure(name):
    data, design = generate(DgpSpec(name), 0.4, stream(5, name))
    ids = data.cluster_ids
    assert data.n == 300 and np.unique(ids).size == 20 and np.bincount(ids.astype(int)).min() >= 2
    expected = (ids[:, None] == ids[None, :]).astype(int) - np.eye(data.n, dtype=int)
    assert np.array_equal(data.adjacency.dense(), expected)
    assert data.treatments.sum() == 10


def test_het_linear_null_interactions_not_significant():
    ok = 0
    reps = 100
    for rep in range(reps):
        data, _ = generate(DgpSpec("het_linear"), 0.0, stream(6, rep))
        X, z, y = data.covariates, data.treatments[:, None], data.outcomes
        small = np.column_stack([np.ones(data.n), X, z])
        big = np.column_stack([small, X * z])
        rss = [np.sum((y - A @ np.linalg.lstsq(A, y, rcond=None)[0]) ** 2) for A in (small, big)]
        q, df = X.shape[1], data.n - big.shape[1]
        F = (rss[0] - rss[1]) / q / (rss[1] / df)
        ok += stats.f.sf(F, q, df) > 0.01
    assert ok >= 0.95 * reps


@pytest.mark.parametrize("name", ["fig1_heterog", "het_linear", "het_nonlinear", "const_linear",
                                  "const_piecewise", "const_cosine", "linear_h", "zero_ate"])
def test_every_dgp_yields_valid_data(name):
    spec = DgpSpec(name)
    data, design = generate(spec, spec.effects[-1], stream(7, name))
    assert data.n == spec.n and data.p == spec.p and design.n == data.n


def test_dgp_spec_validation():
    with pytest.raises(DgpError):
        DgpSpec("nope")
    with pytest.raises(DgpError):
        DgpSpec("fig1_heterog", effects=())
    with pytest.raises(DgpError):
        DgpSpec("const_piecewise", p=1)


def test_out_of_range_effect_warns():
    with pytest.warns(UserWarning):
        generate(DgpSpec("spill_const"), 5.0, stream(0))


def _quick_methods():
    return [Method("LM", family="linear"), Method("Neyman", statistic="neyman_t")]


def test_run_study_report_shape_and_worker_determinism():
    dgp = DgpSpec("const_cosine", n=60, effects=(0.0, 1.0))
    a = run_study(dgp, _quick_methods(), reps=6, R=19, rng=3, workers=1)
    b = run_study(dgp, _quick_methods(), reps=6, R=19, rng=3, workers=2)
    assert a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS) and len(lines) == 5
    for rec in a.records:
        assert 0.0 <= rec["rejection_rate"] <= 1.0 and rec["reps"] == 6
    assert np.isnan(a.mean_delta_hat("Neyman", 0.0))
    assert np.isfinite(a.mean_delta_hat("LM", 1.0))


def test_run_study_rejects_spillover_on_plain_dgp():
    with pytest.raises(SimulationError, match="network"):
        run_study(DgpSpec("fig1_heterog"), [Method("ELC", "spillover", statistic="ELC")], 2, 5)


def test_run_study_reports_failing_replicate():
    # n=4 leaves too few units per arm, so every replicate fails
    dgp = DgpSpec("const_cosine", n=4, effects=(0.0,))
    with pytest.raises(SimulationError, match="rep=0"):
        run_study(dgp, [Method("VR", "heterogeneity", statistic="VR", het_points=1)], 3, 5)

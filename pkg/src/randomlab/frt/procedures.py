"""Randomization tests for global, heterogeneous, spillover and imbalance hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .._rng import as_seed, stream, subseed
from ..cv import CvDiffStatistic, CvStatConfig, make_fold_plan, sobol_index
from ..dataset import ExperimentData
from ..design import FocalConditional
from ..models import PredictorSpec, fit, predict
from .engine import (
    TestResult,
    evaluate_randomizations,
    randomization_pvalue,
    result_from_statistics,
    tiebreak_pvalue,
    uniform_draw,
)


class TestSetupError(ValueError):
    __test__ = False


def forest_spec(recipe: str = "covariates", trees: int = 100, grid=None) -> PredictorSpec:
    if grid is None:
        return PredictorSpec("random_forest", recipe, trees=trees)
    return PredictorSpec("random_forest", recipe, trees=trees, grid=tuple(grid))


def global_specs(family: str = "random_forest", trees: int = 100, grid=None):
    """(M0, M1) pair for the global null: Y ~ X against Y ~ Z + X.

    ``family="linear_interaction"`` keeps M0 linear in X and gives M1 the
    treatment-by-covariate interactions.
    """
    if family == "random_forest":
        return forest_spec("covariates", trees, grid), forest_spec("covariates_treatment", trees, grid)
    if family == "linear_interaction":
        return PredictorSpec("linear", "covariates"), PredictorSpec("linear_interaction", "interaction")
    return PredictorSpec(family, "covariates"), PredictorSpec(family, "covariates_treatment")


def _cv_statistic(data: ExperimentData, null_spec, full_spec, k: int, seed: int, rows=None):
    n_rows = data.n if rows is None else len(rows)
    plan = make_fold_plan(n_rows, k, stream(seed, "folds"))
    cfg = CvStatConfig(null_spec, full_spec, plan, subseed(seed, "models") % (2**31), rows)
    return CvDiffStatistic(cfg)


def _cv_extras(stat: CvDiffStatistic, data: ExperimentData, z, outcomes) -> dict:
    l0, l1 = stat.losses(data, z)
    extras = {"delta_hat": l0 - l1, "cv_null": l0, "cv_full": l1}
    try:
        extras["sobol_index"] = sobol_index(l0 - l1, outcomes)
    except ValueError:
        extras["sobol_index"] = float("nan")
    return extras


def test_global(data: ExperimentData, design, null_spec: PredictorSpec | None = None,
                full_spec: PredictorSpec | None = None, R: int = 1000, k: int = 5, rng=0,
                workers: int = 1) -> TestResult:
    """Global-null test with the CV-difference statistic (default: random forests)."""
    if null_spec is None or full_spec is None:
        d0, d1 = global_specs()
        null_spec, full_spec = null_spec or d0, full_spec or d1
    seed = as_seed(rng)
    stat = _cv_statistic(data, null_spec, full_spec, k, seed)
    res = randomization_pvalue(stat, data, design, R, seed, workers)
    res.extras.update(_cv_extras(stat, data, data.treatments, data.outcomes))
    res.extras.update(k=k, test="global")
    return res


def test_residualized(data: ExperimentData, design, covariate_spec: PredictorSpec | None = None,
                      R: int = 1000, k: int = 5, rng=0, workers: int = 1) -> TestResult:
    """Fit Y ~ X once, then test residuals with CV(e ~ 1) - CV(e ~ 1 + Z)."""
    seed = as_seed(rng)
    if covariate_spec is None:
        covariate_spec = PredictorSpec("linear", "covariates")
    F = data.covariates
    model = fit(covariate_spec, F, data.outcomes, subseed(seed, "residual-model") % (2**31))
    resid = data.outcomes - predict(model, F)
    rdata = data.replace(outcomes=resid)
    stat = _cv_statistic(rdata, PredictorSpec("constant", "intercept"),
                         PredictorSpec("linear", "treatment"), k, seed)
    res = randomization_pvalue(stat, rdata, design, R, seed, workers)
    res.extras.update(_cv_extras(stat, rdata, data.treatments, data.outcomes))
    res.extras.update(k=k, test="residualized")
    return res


def difference_in_means(y, z) -> tuple[float, float]:
    """Difference in means and its Neyman standard error."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z).astype(bool)
    y1, y0 = y[z], y[~z]
    if y1.size < 2 or y0.size < 2:
        raise TestSetupError("difference in means needs two units per arm")
    est = y1.mean() - y0.mean()
    se = np.sqrt(np.var(y1, ddof=1) / y1.size + np.var(y0, ddof=1) / y0.size)
    return float(est), float(se)


@dataclass(frozen=True, eq=False)
class HetGrid:
    """Grid of constant-effect values; ``gamma > 0`` means Berger-Boos mode."""

    tau0_values: np.ndarray
    mode: str = "full_grid"
    gamma: float = 0.0
    ci: tuple[float, float] | None = None

    def __post_init__(self):
        vals = np.asarray(self.tau0_values, dtype=float).reshape(-1)
        if vals.size == 0:
            raise TestSetupError("heterogeneity grid is empty")
        object.__setattr__(self, "tau0_values", vals)
        if self.mode not in ("full_grid", "berger_boos"):
            raise TestSetupError(f"unknown grid mode {self.mode!r}")
        if self.mode == "berger_boos" and not 0.0 < self.gamma < 1.0:
            raise TestSetupError("Berger-Boos gamma must lie in (0, 1)")

    @classmethod
    def around_estimate(cls, data: ExperimentData, points: int = 41, width: float = 5.0) -> "HetGrid":
        """Equispaced grid over difference-in-means +/- ``width`` standard errors.

        A single point sits at the estimate itself.
        """
        est, se = difference_in_means(data.outcomes, data.treatments)
        if points == 1:
            return cls(np.array([est]))
        return cls(np.linspace(est - width * se, est + width * se, points))

    @classmethod
    def berger_boos(cls, data: ExperimentData, gamma: float = 0.01, points: int = 41,
                    ci: tuple[float, float] | None = None) -> "HetGrid":
        """Grid over a (1 - gamma) interval; default is the normal-theory Neyman interval."""
        if ci is None:
            est, se = difference_in_means(data.outcomes, data.treatments)
            q = stats.norm.ppf(1.0 - gamma / 2.0)
            ci = (est - q * se, est + q * se)
        lo, hi = ci
        return cls(np.linspace(lo, hi, points), "berger_boos", gamma, (float(lo), float(hi)))


def test_heterogeneity(data: ExperimentData, design, null_spec: PredictorSpec | None = None,
                       full_spec: PredictorSpec | None = None, grid: HetGrid | None = None,
                       R: int = 1000, k: int = 5, rng=0, workers: int = 1,
                       statistic=None) -> TestResult:
    """Sup over tau0 of the p-values for Y - tau0 * Z, with one shared U.

    All grid points use the same replicate assignments. ``statistic`` replaces
    the CV-difference statistic (e.g. a :class:`ComparisonStatistic`).
    """
    seed = as_seed(rng)
    if grid is None:
        grid = HetGrid.around_estimate(data)
    if statistic is None:
        if null_spec is None or full_spec is None:
            d0, d1 = global_specs()
            null_spec, full_spec = null_spec or d0, full_spec or d1
        statistic = _cv_statistic(data, null_spec, full_spec, k, seed)
    z = data.treatments
    adjusted = [data.replace(outcomes=data.outcomes - t0 * z) for t0 in grid.tau0_values]
    pairs = [(statistic, d) for d in adjusted]
    observed = np.array([statistic(d, z) for d in adjusted])
    randomized = evaluate_randomizations(pairs, design, R, seed, workers)
    u = uniform_draw(seed)
    pvals = np.array([tiebreak_pvalue(observed[g], randomized[:, g], u)
                      for g in range(observed.size)])
    best = int(np.argmax(pvals))
    correction = grid.gamma if grid.mode == "berger_boos" else 0.0
    res = result_from_statistics(observed[best], randomized[:, best], u)
    res.p_value = min(1.0, float(pvals[best]) + correction)
    res.extras.update(
        test="heterogeneity",
        mode=grid.mode,
        correction=correction,
        tau0_grid=grid.tau0_values.tolist(),
        tau0_pvalues=pvals.tolist(),
        tau0_observed=observed.tolist(),
        tau0_at_max=float(grid.tau0_values[best]),
        k=k,
    )
    if isinstance(statistic, CvDiffStatistic):
        res.extras["delta_hat"] = float(observed[best])
    if grid.ci is not None:
        res.extras["ci"] = list(grid.ci)
    return res


def spillover_specs(family: str = "random_forest", trees: int = 100, grid=None):
    """(M0, M1): Y ~ Z + X against Y ~ Z + exposure + X."""
    if family == "random_forest":
        return (forest_spec("covariates_treatment", trees, grid),
                forest_spec("covariates_treatment_exposure", trees, grid))
    return (PredictorSpec(family, "covariates_treatment"),
            PredictorSpec(family, "covariates_treatment_exposure"))


def test_spillover(data: ExperimentData, design, focal, null_spec: PredictorSpec | None = None,
                   full_spec: PredictorSpec | None = None, R: int = 1000, k: int = 5, rng=0,
                   workers: int = 1, statistic=None) -> TestResult:
    """Conditional test fixing focal treatments; models are fit on focal rows only."""
    if data.adjacency is None:
        raise TestSetupError("spillover test requires an adjacency")
    focal = np.unique(np.asarray(focal, dtype=np.int64))
    if focal.size == 0:
        raise TestSetupError("focal set is empty")
    seed = as_seed(rng)
    cond = design if isinstance(design, FocalConditional) else FocalConditional(design, focal, data.treatments)
    if statistic is None:
        if null_spec is None or full_spec is None:
            d0, d1 = spillover_specs()
            null_spec, full_spec = null_spec or d0, full_spec or d1
        statistic = _cv_statistic(data, null_spec, full_spec, k, seed, rows=focal)
        res = randomization_pvalue(statistic, data, cond, R, seed, workers)
        res.extras.update(_cv_extras(statistic, data, data.treatments, data.outcomes[focal]))
    else:
        res = randomization_pvalue(statistic, data, cond, R, seed, workers)
    res.extras.update(test="spillover", focal=focal.tolist(), k=k)
    return res


def imbalance_data(data: ExperimentData, j: int) -> ExperimentData:
    """Covariate j as the outcome and the remaining covariates as predictors."""
    if not 0 <= j < data.p:
        raise TestSetupError(f"covariate index {j} out of range for p={data.p}")
    rest = np.delete(data.covariates, j, axis=1)
    names = tuple(nm for i, nm in enumerate(data.covariate_names) if i != j)
    return data.replace(outcomes=data.covariates[:, j], covariates=rest, covariate_names=names)


def test_imbalance(data: ExperimentData, design, j: int, family: str = "random_forest",
                   R: int = 1000, k: int = 5, rng=0, workers: int = 1, trees: int = 100,
                   grid=None) -> TestResult:
    """X^j ~ X^{-j} against X^j ~ Z + X^{-j}; with p = 1 the null model is the mean."""
    idata = imbalance_data(data, j)
    null_spec, full_spec = global_specs(family, trees, grid)
    if idata.p == 0:
        null_spec = PredictorSpec("constant", "intercept")
    seed = as_seed(rng)
    stat = _cv_statistic(idata, null_spec, full_spec, k, seed)
    res = randomization_pvalue(stat, idata, design, R, seed, workers)
    res.extras.update(_cv_extras(stat, idata, data.treatments, idata.outcomes))
    res.extras.update(test="imbalance", covariate_index=j, k=k)
    return res


@dataclass(eq=False)
class ImbalancePvalue:
    """Deterministic map ``assignment -> imbalance p-value`` for conditional designs."""

    data: ExperimentData
    design: object
    j: int
    family: str = "linear"
    R: int = 100
    k: int = 5
    seed: int = 0
    trees: int = 50
    _memo: dict = field(default_factory=dict, repr=False)

    def __call__(self, assignment) -> float:
        z = np.asarray(assignment, dtype=np.int8)
        key = z.tobytes()
        if key not in self._memo:
            res = test_imbalance(self.data.replace(treatments=z), self.design, self.j,
                                 self.family, self.R, self.k, self.seed, trees=self.trees)
            self._memo[key] = res.p_value
        return self._memo[key]


def bonferroni(pvalues) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float)
    return np.minimum(1.0, p * p.size)


# keep pytest from collecting the public test_* procedures when imported
for _fn in (test_global, test_residualized, test_heterogeneity, test_spillover, test_imbalance):
    _fn.__test__ = False
del _fn

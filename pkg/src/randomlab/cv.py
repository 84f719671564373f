"""k-fold cross-validated squared loss and the CV-difference test statistic."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._rng import as_seed
from .dataset import ExperimentData
from .models import PredictorSpec, _cart, assemble_features, fit, predict


class CVError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Partition of ``n`` rows into ``k`` folds (``membership[i]`` is row i's fold)."""

    k: int
    membership: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.membership, dtype=np.int64).reshape(-1)
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)
        if self.k < 2:
            raise CVError("need at least 2 folds")
        if m.size < self.k:
            raise CVError(f"cannot split {m.size} rows into {self.k} folds")
        if m.min() < 0 or m.max() >= self.k:
            raise CVError("fold labels must lie in [0, k)")
        counts = np.bincount(m, minlength=self.k)
        if np.any(counts == 0):
            raise CVError("every fold must be nonempty")
        if np.any(counts == m.size):
            raise CVError("fold with empty training complement")

    @property
    def n(self) -> int:
        return self.membership.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.membership, minlength=self.k)


def make_fold_plan(n: int, k: int, rng) -> FoldPlan:
    """Random permutation followed by round-robin, so fold sizes differ by at most one."""
    if not 2 <= k <= n:
        raise CVError(f"need 2 <= k <= n, got k={k}, n={n}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(as_seed(rng))
    perm = rng.permutation(n)
    membership = np.empty(n, dtype=np.int64)
    membership[perm] = np.arange(n) % k
    return FoldPlan(k, membership)


def _grid_loss(spec: PredictorSpec, y, F, plan: FoldPlan, seed: int, hp) -> float:
    if spec.family == "random_forest" and F.shape[1] > 0:
        return float(_cart.forest_cv_loss(
            F, y, plan.membership, plan.k, spec.trees, hp.resolve_mtry(F.shape[1]),
            hp.min_node_size, spec.bootstrap, seed % (2**31 - 1 - plan.k),
        ))
    total = 0.0
    for j in range(plan.k):
        test = plan.membership == j
        model = fit(spec, F[~test], y[~test], seed, hyper=hp)
        resid = y[test] - predict(model, F[test])
        total += float(np.mean(resid * resid))
    return total / plan.k


def cv_loss(spec: PredictorSpec, targets, features, fold_plan: FoldPlan, rng=0) -> float:
    """Mean held-out MSE over folds; minimised over the forest grid when present."""
    y = np.asarray(targets, dtype=float).reshape(-1)
    F = np.asarray(features, dtype=float)
    if F.ndim == 1:
        F = F.reshape(-1, 1)
    F = np.ascontiguousarray(F)
    if y.size != fold_plan.n or F.shape[0] != y.size:
        raise CVError("targets, features and fold plan disagree on the number of rows")
    seed = as_seed(rng)
    return min(_grid_loss(spec, y, F, fold_plan, seed, hp) for hp in spec.grid_points())


@dataclass(frozen=True, eq=False)
class CvStatConfig:
    """Null model M0, full model M1, a fixed fold plan, and the model seed.

    ``rows`` restricts model fitting to a subset of units (the focal set for
    spillover tests); the fold plan is then over those rows.
    """

    null_spec: PredictorSpec
    full_spec: PredictorSpec
    fold_plan: FoldPlan
    seed: int = 0
    rows: np.ndarray | None = None


def _digest(F: np.ndarray, y: np.ndarray) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    h.update(np.asarray(F.shape, dtype=np.int64).tobytes())
    h.update(F.tobytes())
    h.update(y.tobytes())
    return h.digest()


@dataclass(eq=False)
class CvDiffStatistic:
    """Callable ``(data, assignment) -> CV(M0) - CV(M1)``.

    Losses are memoised on the exact bytes of (features, targets); since model
    fitting is deterministic given the seed, a cache hit equals a recomputation.
    This makes the assignment-free null model cost one evaluation per test.
    """

    config: CvStatConfig
    _cache: dict = field(default_factory=dict, repr=False)

    def _side_loss(self, spec: PredictorSpec, data: ExperimentData, z) -> float:
        rows = self.config.rows
        F = assemble_features(data, z, spec.recipe, rows)
        y = data.outcomes if rows is None else data.outcomes[rows]
        key = (spec, _digest(F, y))
        hit = self._cache.get(key)
        if hit is None:
            hit = cv_loss(spec, y, F, self.config.fold_plan, self.config.seed)
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def losses(self, data: ExperimentData, assignment) -> tuple[float, float]:
        cfg = self.config
        return (self._side_loss(cfg.null_spec, data, assignment),
                self._side_loss(cfg.full_spec, data, assignment))

    def __call__(self, data: ExperimentData, assignment) -> float:
        l0, l1 = self.losses(data, assignment)
        return l0 - l1

    def __getstate__(self):
        return {"config": self.config, "_cache": {}}


def cv_diff_statistic(config: CvStatConfig, data: ExperimentData, assignment) -> float:
    """CV(M0) - CV(M1) with M1's features built from ``assignment``."""
    return CvDiffStatistic(config)(data, assignment)


def sobol_index(statistic_value: float, outcomes) -> float:
    """Statistic divided by the (n-1)-normalised outcome variance; not clamped."""
    y = np.asarray(outcomes, dtype=float)
    var = float(np.var(y, ddof=1))
    if not var > 0.0:
        raise CVError("zero outcome variance")
    return float(statistic_value) / var

"""Prediction models used inside the cross-validation statistic.

Families: ``constant`` (sample mean), ``linear`` (least squares with an
intercept), ``linear_interaction`` (linear on the interaction recipe), and
``random_forest`` (bagged CART regression trees, variance-reduction splits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .._rng import as_seed
from ..dataset import ExperimentData
from . import _cart

FAMILIES = ("constant", "linear", "linear_interaction", "random_forest")

# column layout is always [covariates | treatment | exposure | interactions]
RECIPES = {
    "intercept": (False, False, False, False),
    "treatment": (False, True, False, False),
    "covariates": (True, False, False, False),
    "covariates_treatment": (True, True, False, False),
    "covariates_treatment_exposure": (True, True, True, False),
    "interaction": (True, True, False, True),
}

SPLIT_RULES = ("variance",)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    mtry: int | str = "all"
    min_node_size: int = 5
    split_rule: str = "variance"

    def resolve_mtry(self, width: int) -> int:
        m = self.mtry
        if m == "all":
            return width
        if m == "third":
            return max(1, math.ceil(width / 3))
        if m == "sqrt":
            return max(1, int(math.floor(math.sqrt(width))))
        m = int(m)
        if not 1 <= m <= width:
            raise ModelError(f"mtry={m} outside [1, {width}] features")
        return m


def default_forest_grid() -> tuple[HyperParams, ...]:
    return (HyperParams("third", 5), HyperParams("all", 5))


@dataclass(frozen=True)
class PredictorSpec:
    """Declarative model choice: family, feature recipe and forest settings."""

    family: str
    recipe: str = "covariates"
    trees: int = 100
    bootstrap: bool = True
    grid: tuple[HyperParams, ...] = field(default_factory=default_forest_grid)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown model family {self.family!r}")
        if self.recipe not in RECIPES:
            raise ModelError(f"unknown feature recipe {self.recipe!r}")
        if self.family == "random_forest":
            if not self.grid:
                raise ModelError("random forest needs a nonempty hyper grid")
            if self.trees < 1:
                raise ModelError("trees must be >= 1")
            for hp in self.grid:
                if hp.split_rule not in SPLIT_RULES:
                    raise ModelError(f"unsupported split rule {hp.split_rule!r}")
                if hp.min_node_size < 1:
                    raise ModelError("min_node_size must be >= 1")

    def grid_points(self) -> tuple[HyperParams | None, ...]:
        return self.grid if self.family == "random_forest" else (None,)

    def with_recipe(self, recipe: str) -> "PredictorSpec":
        return PredictorSpec(self.family, recipe, self.trees, self.bootstrap, self.grid)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"family": self.family, "recipe": self.recipe}
        if self.family == "random_forest":
            out["trees"] = self.trees
            out["bootstrap"] = self.bootstrap
            # dict.fromkeys dedupes while keeping grid order (fit uses the first point)
            out["grid"] = {
                "mtry": list(dict.fromkeys(hp.mtry for hp in self.grid)),
                "min_node_size": list(dict.fromkeys(hp.min_node_size for hp in self.grid)),
                "split_rule": list(dict.fromkeys(hp.split_rule for hp in self.grid)),
            }
        return out

    @classmethod
    def from_dict(cls, d: dict, default_recipe: str = "covariates") -> "PredictorSpec":
        family = d["family"]
        kwargs: dict[str, Any] = {"recipe": d.get("recipe", default_recipe)}
        if family == "random_forest":
            kwargs["trees"] = int(d.get("trees", 100))
            kwargs["bootstrap"] = bool(d.get("bootstrap", True))
            g = d.get("grid")
            if g is not None:
                mtrys = g.get("mtry", ["third", "all"])
                nodes = g.get("min_node_size", [5])
                rules = g.get("split_rule", ["variance"])
                kwargs["grid"] = tuple(
                    HyperParams(m if isinstance(m, str) else int(m), int(s), r)
                    for m in mtrys for s in nodes for r in rules
                )
        return cls(family, **kwargs)


@dataclass(frozen=True, eq=False)
class FittedModel:
    family: str
    width: int
    params: Any

    def predict(self, features) -> np.ndarray:
        return predict(self, features)


def _as_features(features, n=None) -> np.ndarray:
    F = np.asarray(features, dtype=float)
    if F.ndim == 1:
        F = F.reshape(-1, 1)
    return F


def _lstsq_with_intercept(F: np.ndarray, y: np.ndarray) -> np.ndarray:
    A = np.column_stack([np.ones(F.shape[0]), F])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def fit(spec: PredictorSpec, features, targets, rng=None, hyper: HyperParams | None = None) -> FittedModel:
    """Fit ``spec`` by empirical risk minimisation (squared loss).

    For forests, ``hyper`` picks the grid point (default: first in the grid)
    and ``rng`` (seed or Generator) drives bootstrap and feature sampling.
    """
    F = _as_features(features)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if y.size == 0:
        raise ModelError("empty training set")
    if F.shape[0] != y.size:
        raise ModelError(f"features have {F.shape[0]} rows but targets {y.size}")
    width = F.shape[1]
    # no features: every family reduces to the sample mean
    if spec.family == "constant" or width == 0:
        return FittedModel("constant", width, float(y.mean()))
    if spec.family in ("linear", "linear_interaction"):
        return FittedModel("linear", width, _lstsq_with_intercept(F, y))
    hp = hyper if hyper is not None else spec.grid[0]
    mtry = hp.resolve_mtry(width)
    seed = as_seed(rng) % (2**31 - 1)
    arrays = _cart.fit_forest(np.ascontiguousarray(F), y, spec.trees, mtry, hp.min_node_size,
                              spec.bootstrap, seed)
    return FittedModel("random_forest", width, arrays)


def predict(model: FittedModel, features) -> np.ndarray:
    F = _as_features(features)
    if F.shape[1] != model.width:
        raise ModelError(f"feature width {F.shape[1]} does not match fitted width {model.width}")
    if model.family == "constant":
        return np.full(F.shape[0], model.params)
    if model.family == "linear":
        return model.params[0] + F @ model.params[1:]
    return _cart.predict_forest(*model.params, np.ascontiguousarray(F))


def assemble_features(data: ExperimentData, assignment, recipe: str, rows=None) -> np.ndarray:
    """Feature matrix for ``recipe`` under ``assignment``, optionally restricted to ``rows``.

    The exposure column is the number of treated neighbours, computed over
    the full population before row restriction.
    """
    if recipe not in RECIPES:
        raise ModelError(f"unknown feature recipe {recipe!r}")
    use_x, use_z, use_exp, use_int = RECIPES[recipe]
    z = np.asarray(assignment, dtype=float).reshape(-1)
    if z.size != data.n:
        raise ModelError("assignment length does not match data")
    cols = []
    X = data.covariates
    if use_x:
        cols.append(X)
    if use_z:
        cols.append(z[:, None])
    if use_exp:
        if data.adjacency is None:
            raise ModelError("exposure recipe requires an adjacency")
        cols.append(data.adjacency.exposure(z)[:, None])
    if use_int:
        cols.append(X * z[:, None])
    F = np.hstack(cols) if cols else np.empty((data.n, 0))
    if rows is not None:
        F = F[np.asarray(rows)]
    return np.ascontiguousarray(F)


__all__ = [
    "FAMILIES", "RECIPES", "HyperParams", "PredictorSpec", "FittedModel", "ModelError",
    "fit", "predict", "assemble_features", "default_forest_grid",
]

"""Data-generating processes for the simulation studies."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..dataset import Adjacency, ExperimentData
from ..design import Bernoulli, TwoStageCluster
from .correlation import random_correlation


class DgpError(ValueError):
    pass


# name -> (n, p, default effect grid, needs adjacency)
_SETUPS = {
    "fig1_heterog": (100, 2, (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5, 2.0), False),
    "het_linear": (100, 5, tuple(np.round(np.arange(0, 11) * 0.1, 10)), False),
    "het_nonlinear": (100, 5, tuple(np.round(np.arange(0, 7) * 0.5, 10)), False),
    "spill_const": (300, 2, tuple(np.round(np.arange(0, 11) * 0.1, 10)), True),
    "spill_nonlinear": (300, 2, tuple(np.round(np.arange(0, 11) * 0.2, 10)), True),
    "const_linear": (200, 5, tuple(float(t) for t in range(11)), False),
    # the piecewise baseline reads X1 and X2, so two covariates are drawn
    "const_piecewise": (200, 2, tuple(np.round(np.arange(0, 6) * 0.2, 10)), False),
    "const_cosine": (200, 1, tuple(np.round(np.arange(0, 6) * 0.2, 10)), False),
    # linear effect modifier: truth lies inside the interaction class
    "linear_h": (2000, 2, (0.0, 0.5, 1.0), False),
    # effect modifier with mean zero: no average effect, strong heterogeneity
    "zero_ate": (200, 2, (0.0, 0.5, 1.0), False),
}

DGP_NAMES = tuple(_SETUPS)


@dataclass(frozen=True)
class DgpSpec:
    name: str
    n: int | None = None
    p: int | None = None
    effects: tuple[float, ...] | None = None
    pi: float = 0.5
    n_clusters: int = 20

    def __post_init__(self):
        if self.name not in _SETUPS:
            raise DgpError(f"unknown DGP {self.name!r}")
        n0, p0, grid, _ = _SETUPS[self.name]
        object.__setattr__(self, "n", int(self.n or n0))
        object.__setattr__(self, "p", int(self.p or p0))
        eff = grid if self.effects is None else tuple(float(e) for e in self.effects)
        if not eff:
            raise DgpError("effect grid is empty")
        object.__setattr__(self, "effects", eff)
        if not 0.0 < self.pi < 1.0:
            raise DgpError("pi must lie in (0, 1)")
        if self.name in ("const_piecewise", "het_nonlinear", "spill_nonlinear") and self.p < 2:
            raise DgpError(f"{self.name} needs p >= 2")
        if self.uses_adjacency:
            if self.n_clusters < 2 or self.n < 2 * self.n_clusters:
                raise DgpError("need at least two clusters of size >= 2")
        elif self.n < 4:
            raise DgpError("n must be >= 4")

    @property
    def uses_adjacency(self) -> bool:
        return _SETUPS[self.name][3]

    @property
    def default_effects(self) -> tuple[float, ...]:
        return _SETUPS[self.name][2]

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "p": self.p, "effects": list(self.effects),
                "pi": self.pi, "n_clusters": self.n_clusters}


def fig1_effect_modifier(x1, tau: float) -> np.ndarray:
    """tau + tau * clip(2 / x1, -10, 10), and tau where x1 == 0."""
    x1 = np.asarray(x1, dtype=float)
    ratio = np.divide(2.0, x1, out=np.zeros_like(x1), where=x1 != 0)
    return tau + tau * np.clip(ratio, -10.0, 10.0)


def random_clusters(n: int, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """Cluster labels with random sizes, every cluster holding at least two units."""
    sizes = 2 + rng.multinomial(n - 2 * n_clusters, np.full(n_clusters, 1.0 / n_clusters))
    return np.repeat(np.arange(n_clusters), sizes)


def _correlated_normals(n, p, rng):
    sigma = random_correlation(p, rng)
    return rng.multivariate_normal(np.zeros(p), sigma, size=n, method="cholesky")


def generate(dgp: DgpSpec, effect: float, rng: np.random.Generator):
    """One dataset and the design that produced its assignment."""
    lo, hi = min(dgp.default_effects), max(dgp.default_effects)
    if not lo <= effect <= hi:
        warnings.warn(f"effect {effect} outside the usual range for {dgp.name}", stacklevel=2)
    if dgp.uses_adjacency:
        return _generate_spillover(dgp, float(effect), rng)

    n, p, name = dgp.n, dgp.p, dgp.name
    design = Bernoulli(n, dgp.pi)
    if name in ("fig1_heterog", "het_linear", "het_nonlinear", "const_linear"):
        X = _correlated_normals(n, p, rng)
    elif name in ("const_piecewise", "const_cosine"):
        X = rng.normal(0.0, 2.0, size=(n, p))
    else:
        X = rng.normal(size=(n, p))

    if name == "fig1_heterog":
        beta = rng.uniform(1.0, 5.0, p)
        base = 0.1 * X @ beta
        h = fig1_effect_modifier(X[:, 0], effect)
        sd = 0.1
    elif name == "het_linear":
        beta0 = rng.uniform(1.0, 30.0, p)
        beta1 = rng.uniform(1.0, 30.0, p)
        base = -0.05 * X @ beta0
        h = 0.5 * effect * X @ beta1
        sd = 1.0
    elif name == "het_nonlinear":
        a = (X[:, 0] < 0.5).astype(float)
        b = (X[:, 1] > -0.5).astype(float)
        base = a - 1.5 * b
        h = effect * (2.0 * a - 3.0 * b)
        sd = 1.0
    elif name == "const_linear":
        beta = rng.uniform(1.0, 30.0, p)
        base = 0.5 * X @ beta
        h = np.full(n, effect)
        sd = 2.0
    elif name == "const_piecewise":
        base = 2.0 * (X[:, 0] < 0.5) - 3.0 * (X[:, 1] > -0.5)
        h = np.full(n, effect)
        sd = 0.1
    elif name == "const_cosine":
        base = 2.0 * np.cos(X[:, 0])
        h = np.full(n, effect)
        sd = 0.1
    elif name == "linear_h":
        base = X @ np.ones(p)
        gamma = np.zeros(p)
        gamma[0], gamma[1:] = 1.0, 0.5
        h = effect * (1.0 + X @ gamma)
        sd = 1.0
    else:  # zero_ate
        base = X @ np.ones(p)
        h = 2.0 * effect * X[:, 0]
        sd = 1.0

    z = design.draw(rng)
    y = base + z * h + rng.normal(0.0, sd, n)
    return ExperimentData(y, z, X), design


def _generate_spillover(dgp: DgpSpec, tau: float, rng: np.random.Generator):
    n, C = dgp.n, dgp.n_clusters
    clusters = random_clusters(n, C, rng)
    adjacency = Adjacency.from_clusters(clusters)
    design = TwoStageCluster(clusters, 0.5, 1)
    X = rng.normal(size=(n, dgp.p))
    z = design.draw(rng)
    zf = z.astype(float)
    exposed = (adjacency.exposure(z) > 0).astype(float)
    e_c0 = rng.normal(0.0, 0.1, C)[clusters]
    e_c1 = rng.normal(0.0, 0.1, C)[clusters]
    if dgp.name == "spill_const":
        spill = tau * (1.0 - zf) * exposed
        noise = e_c0 + zf * e_c1 + rng.normal(0.0, 0.5, n)
    else:
        x1, x2 = X[:, 0], X[:, 1]
        modifier = 3.0 * (x2 > -0.5) - 2.0 * (x1 < 0.5)
        spill = 0.5 * tau * (1.0 - zf) * exposed * modifier
        e_i0 = rng.normal(0.0, 1.0, n) * np.abs(x1) / 3.0
        # treated-unit noise is centred at X2; the source leaves this mean undefined
        e_i1 = x2 + rng.normal(0.0, 1.0, n) * 0.5 * np.abs(x2)
        noise = e_c0 + zf * e_c1 + (1.0 - zf) * e_i0 + zf * e_i1
    y = 2.0 + 1.5 * zf + spill + noise
    return ExperimentData(y, z, X, cluster_ids=clusters, adjacency=adjacency), design

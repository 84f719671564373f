"""Known randomization designs and their conditional variants.

Every design exposes ``draw(rng) -> np.ndarray`` returning a 0/1 ``int8``
assignment vector. Designs are immutable; the caller owns the generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np


class DesignError(ValueError):
    """Invalid design parameters or an unsatisfiable conditioning event."""


class DrawBudgetExceeded(RuntimeError):
    """Rejection sampling ran out of attempts."""


def as_assignment(values, n: int | None = None) -> np.ndarray:
    z = np.asarray(values)
    if z.ndim != 1:
        raise DesignError("assignment must be a vector")
    if not np.all(np.isin(z, (0, 1))):
        raise DesignError("assignment entries must be 0 or 1")
    if n is not None and z.size != n:
        raise DesignError(f"assignment length {z.size} does not match n={n}")
    return z.astype(np.int8)


@dataclass(frozen=True)
class Bernoulli:
    """Independent treatment with probability ``pi`` for each of ``n`` units."""

    n: int
    pi: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.pi < 1.0:
            raise DesignError("bernoulli pi must lie in (0, 1)")
        if self.n < 1:
            raise DesignError("n must be positive")

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return (rng.random(self.n) < self.pi).astype(np.int8)

    def log_prob(self, z) -> float:
        z = as_assignment(z, self.n)
        k = int(z.sum())
        return k * np.log(self.pi) + (self.n - k) * np.log1p(-self.pi)

    def to_dict(self):
        return {"kind": "bernoulli", "pi": self.pi}


@dataclass(frozen=True)
class Complete:
    """Exactly ``m`` of ``n`` units treated, uniformly at random."""

    n: int
    m: int

    def __post_init__(self):
        if not 0 < self.m < self.n:
            raise DesignError("complete design requires 0 < m < n")

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        z = np.zeros(self.n, dtype=np.int8)
        z[rng.permutation(self.n)[: self.m]] = 1
        return z

    def log_prob(self, z) -> float:
        z = as_assignment(z, self.n)
        if int(z.sum()) != self.m:
            return -np.inf
        return -np.log(comb(self.n, self.m))

    def to_dict(self):
        return {"kind": "complete", "m": self.m}


@dataclass(frozen=True, eq=False)
class TwoStageCluster:
    """Select a fraction of clusters, then treat ``per_cluster`` units in each.

    The number of selected clusters is ``round(cluster_fraction * n_clusters)``
    (at least one).
    """

    cluster_ids: np.ndarray
    cluster_fraction: float = 0.5
    per_cluster: int = 1
    _members: tuple = field(init=False, repr=False)

    def __post_init__(self):
        ids = np.asarray(self.cluster_ids).astype(np.int64)
        ids.setflags(write=False)
        object.__setattr__(self, "cluster_ids", ids)
        if not 0.0 < self.cluster_fraction <= 1.0:
            raise DesignError("cluster fraction must lie in (0, 1]")
        labels = np.unique(ids)
        members = tuple(np.flatnonzero(ids == c) for c in labels)
        if self.per_cluster < 1 or self.per_cluster > min(m.size for m in members):
            raise DesignError("per-cluster treated count exceeds the smallest cluster size")
        object.__setattr__(self, "_members", members)

    @property
    def n(self) -> int:
        return self.cluster_ids.size

    @property
    def n_clusters(self) -> int:
        return len(self._members)

    @property
    def n_selected(self) -> int:
        return max(1, int(round(self.cluster_fraction * self.n_clusters)))

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        z = np.zeros(self.n, dtype=np.int8)
        chosen = rng.permutation(self.n_clusters)[: self.n_selected]
        for c in np.sort(chosen):
            members = self._members[c]
            z[members[rng.permutation(members.size)[: self.per_cluster]]] = 1
        return z

    def log_prob(self, z) -> float:
        z = as_assignment(z, self.n)
        selected = 0
        logp = -np.log(comb(self.n_clusters, self.n_selected))
        for members in self._members:
            t = int(z[members].sum())
            if t == 0:
                continue
            if t != self.per_cluster:
                return -np.inf
            selected += 1
            logp -= np.log(comb(members.size, self.per_cluster))
        return logp if selected == self.n_selected else -np.inf

    def to_dict(self):
        return {
            "kind": "two_stage_cluster",
            "cluster_fraction": self.cluster_fraction,
            "per_cluster": self.per_cluster,
        }


def _rejection_draw(base, accept: Callable[[np.ndarray], bool], rng, max_draws: int) -> np.ndarray:
    for _ in range(max_draws):
        z = base.draw(rng)
        if accept(z):
            return z
    raise DrawBudgetExceeded(f"no acceptable assignment in {max_draws} draws")


@dataclass(frozen=True, eq=False)
class FocalConditional:
    """Base design conditioned on focal units keeping their realized treatments."""

    base: object
    focal: np.ndarray
    realized: np.ndarray
    max_rejection_draws: int = 1000

    def __post_init__(self):
        n = self.base.n
        focal = np.unique(np.asarray(self.focal, dtype=np.int64))
        if focal.size == 0:
            raise DesignError("focal set is empty")
        if focal[0] < 0 or focal[-1] >= n:
            raise DesignError("focal index out of range")
        realized = as_assignment(self.realized, n)
        focal.setflags(write=False)
        realized.setflags(write=False)
        object.__setattr__(self, "focal", focal)
        object.__setattr__(self, "realized", realized)
        self._check_feasible()

    @property
    def n(self) -> int:
        return self.base.n

    def _check_feasible(self):
        base = self.base
        fz = self.realized[self.focal]
        if isinstance(base, Complete):
            free = base.n - self.focal.size
            need = base.m - int(fz.sum())
            if need < 0 or need > free:
                raise DesignError("conditioning event has probability zero under the complete design")
        elif isinstance(base, TwoStageCluster):
            self._cluster_weights()

    def _cluster_weights(self):
        base = self.base
        is_focal = np.zeros(base.n, dtype=bool)
        is_focal[self.focal] = True
        m = base.per_cluster
        w_sel = np.empty(base.n_clusters)
        w_not = np.empty(base.n_clusters)
        for c, members in enumerate(base._members):
            f = is_focal[members]
            f1 = int(self.realized[members][f].sum())
            f0 = int(f.sum()) - f1
            free = members.size - f1 - f0
            w_not[c] = 1.0 if f1 == 0 else 0.0
            w_sel[c] = comb(free, m - f1) / comb(members.size, m) if 0 <= m - f1 <= free else 0.0
        # table[c, j]: total weight of picking j selected clusters among c..end
        K = base.n_selected
        C = base.n_clusters
        table = np.zeros((C + 1, K + 1))
        table[C, 0] = 1.0
        for c in range(C - 1, -1, -1):
            table[c, 0] = w_not[c] * table[c + 1, 0]
            for j in range(1, K + 1):
                table[c, j] = w_sel[c] * table[c + 1, j - 1] + w_not[c] * table[c + 1, j]
        if table[0, K] <= 0.0:
            raise DesignError("conditioning event has probability zero under the cluster design")
        return w_sel, w_not, table, is_focal

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        base = self.base
        if isinstance(base, Bernoulli):
            z = base.draw(rng)
            z[self.focal] = self.realized[self.focal]
            return z
        if isinstance(base, Complete):
            z = np.zeros(base.n, dtype=np.int8)
            z[self.focal] = self.realized[self.focal]
            free = np.setdiff1d(np.arange(base.n), self.focal)
            need = base.m - int(z.sum())
            z[free[rng.permutation(free.size)[:need]]] = 1
            return z
        if isinstance(base, TwoStageCluster):
            return self._draw_cluster(rng)
        focal, fz = self.focal, self.realized[self.focal]
        return _rejection_draw(base, lambda z: np.array_equal(z[focal], fz), rng,
                               self.max_rejection_draws)

    def _draw_cluster(self, rng):
        base = self.base
        w_sel, w_not, table, is_focal = self._cluster_weights()
        z = np.zeros(base.n, dtype=np.int8)
        remaining = base.n_selected
        for c, members in enumerate(base._members):
            total = table[c, remaining]
            take = w_sel[c] * table[c + 1, remaining - 1] if remaining > 0 else 0.0
            if remaining > 0 and rng.random() * total < take:
                remaining -= 1
                fixed = members[is_focal[members] & (self.realized[members] == 1)]
                free = members[~is_focal[members]]
                extra = base.per_cluster - fixed.size
                z[fixed] = 1
                z[free[rng.permutation(free.size)[:extra]]] = 1
        return z

    def to_dict(self):
        return {"kind": "focal_conditional", "base": self.base.to_dict(),
                "focal": self.focal.tolist()}


@dataclass(frozen=True, eq=False)
class ImbalanceConditional:
    """Base design restricted to assignments whose imbalance p-value is <= ``threshold``.

    ``pvalue`` maps an assignment to the covariate-imbalance p-value and must
    be deterministic in its argument.
    """

    base: object
    pvalue: Callable[[np.ndarray], float]
    threshold: float
    max_rejection_draws: int = 1000

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise DesignError("imbalance threshold must lie in (0, 1]")

    @property
    def n(self) -> int:
        return self.base.n

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return _rejection_draw(self.base, lambda z: self.pvalue(z) <= self.threshold, rng,
                               self.max_rejection_draws)

    def to_dict(self):
        return {"kind": "imbalance_conditional", "base": self.base.to_dict(),
                "threshold": self.threshold}


def draw(design, rng: np.random.Generator) -> np.ndarray:
    """Draw one assignment from ``design``."""
    return design.draw(rng)


def focal_conditional_draw(base, focal: Sequence[int], realized, rng: np.random.Generator) -> np.ndarray:
    """Draw from ``base`` conditioned on ``z[focal] == realized[focal]``."""
    return FocalConditional(base, np.asarray(focal), realized).draw(rng)


def design_from_config(cfg: dict, n: int, cluster_ids=None):
    """Build a design from its JSON description, e.g. ``{"kind": "bernoulli", "pi": 0.5}``."""
    kind = cfg.get("kind")
    if kind == "bernoulli":
        return Bernoulli(n, float(cfg.get("pi", 0.5)))
    if kind == "complete":
        return Complete(n, int(cfg["m"]))
    if kind == "two_stage_cluster":
        if cluster_ids is None:
            raise DesignError("two_stage_cluster design needs cluster ids")
        return TwoStageCluster(cluster_ids, float(cfg.get("cluster_fraction", 0.5)),
                               int(cfg.get("per_cluster", 1)))
    raise DesignError(f"unknown design kind {kind!r}")


def focal_half_controls_per_cluster(cluster_ids, assignment, rng: np.random.Generator) -> np.ndarray:
    """Random half (rounded down) of the control units within each cluster."""
    cluster_ids = np.asarray(cluster_ids)
    z = np.asarray(assignment)
    chosen = []
    for c in np.unique(cluster_ids):
        controls = np.flatnonzero((cluster_ids == c) & (z == 0))
        chosen.append(rng.permutation(controls)[: controls.size // 2])
    return np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=np.int64)


def focal_random_half(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random half (rounded down) of all units."""
    return np.sort(rng.permutation(n)[: n // 2])

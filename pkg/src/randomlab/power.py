"""Signal-strength estimation, closed-form oracles, and sample-size planning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._rng import as_seed, stream, subseed
from .cv import CvDiffStatistic, CvStatConfig, make_fold_plan
from .dataset import ExperimentData


class PowerError(ValueError):
    pass


@dataclass(frozen=True)
class DeltaEstimate:
    delta_hat: float
    L_hat: float
    M0_hat: float
    k: int
    cv_null: float
    cv_full: float

    def to_dict(self) -> dict:
        return {
            "delta_hat": self.delta_hat,
            "L_hat": self.L_hat,
            "M0_hat": self.M0_hat,
            "k": self.k,
            "cv_null": self.cv_null,
            "cv_full": self.cv_full,
        }


def estimate_delta(data: ExperimentData, assignment=None, specs=None, k: int = 5, rng=0) -> DeltaEstimate:
    """CV(M0) - CV(M1) on the observed data, with M0_hat the larger CV loss."""
    from .frt.procedures import global_specs

    null_spec, full_spec = specs if specs is not None else global_specs()
    seed = as_seed(rng)
    z = data.treatments if assignment is None else np.asarray(assignment)
    plan = make_fold_plan(data.n, k, stream(seed, "folds"))
    stat = CvDiffStatistic(CvStatConfig(null_spec, full_spec, plan, subseed(seed, "models") % (2**31)))
    l0, l1 = stat.losses(data, z)
    return DeltaEstimate(l0 - l1, l0 - l1, max(l0, l1), k, l0, l1)


def delta_oracle(kind: str, pi: float, h_moments: tuple[float, float]) -> float:
    """pi(1-pi)[E h]^2 for ``kind="res"``; pi(1-pi) E[h^2] for ``kind="ml"``."""
    if not 0.0 < pi < 1.0:
        raise PowerError("pi must lie in (0, 1)")
    m1, m2 = h_moments
    if m2 < m1 * m1 - 1e-12 * max(1.0, m1 * m1):
        raise PowerError("inconsistent moments: E h^2 < (E h)^2")
    scale = pi * (1.0 - pi)
    if kind == "res":
        return scale * m1 * m1
    if kind == "ml":
        return scale * m2
    raise PowerError(f"unknown kind {kind!r}")


def example_cstar(example: int, pi: float, mu1: float = 0.0, mu2: float = 1.0, B: float = 0.0) -> float:
    """Population treatment coefficient of the randomized-treatment best predictor.

    Example 1 (Y = BX + Z + e, class bx + cz): pi(1 - r) / (1 - pi r), r = mu1^2 / mu2.
    Example 2 (Y = BX + XZ + e, same class): 0.
    Example 3 (Y = BX + Z + e, class cz only): B mu1 + pi.
    """
    if not 0.0 < pi < 1.0:
        raise PowerError("pi must lie in (0, 1)")
    if example in (1, 2):
        if mu2 <= 0.0:
            raise PowerError("mu2 must be positive")
        r = mu1 * mu1 / mu2
        if not 0.0 <= r <= 1.0 or pi * r >= 1.0:
            raise PowerError("invalid moments: need mu1^2 <= mu2")
        if example == 2:
            return 0.0
        return pi * (1.0 - r) / (1.0 - pi * r)
    if example == 3:
        return B * mu1 + pi
    raise PowerError("example must be 1, 2 or 3")


def log_type2_bound(n: float, L: float, M0: float, k: int, R: int | None = None) -> float:
    """Log of 4R(2k exp(-nL^2/(32kM0^2)) + exp(-(k-1)nL^2/(128kM0^2))); R omitted when None."""
    a = n * L * L / (k * M0 * M0)
    terms = [math.log(2 * k) - a / 32.0, -(k - 1) * a / 128.0]
    out = math.log(4.0) + float(logsumexp(terms))
    if R is not None:
        out += math.log(R)
    return out


def sample_size(L: float, M0: float, k: int, target_type2: float = 0.2, include_R: int | None = None,
                n_max: int = 10**9) -> int:
    """Smallest integer n whose type-II bound is at most ``target_type2``.

    A target of 1 is met by any n (probabilities never exceed 1), so returns 1.
    """
    if not L > 0.0:
        raise PowerError("L must be positive; the bound never reaches the target")
    if not M0 > 0.0:
        raise PowerError("M0 must be positive")
    if k < 2:
        raise PowerError("k must be >= 2")
    if not 0.0 < target_type2 <= 1.0:
        raise PowerError("target must lie in (0, 1]")
    if target_type2 >= 1.0:
        return 1
    log_target = math.log(target_type2)

    def ok(n):
        return log_type2_bound(n, L, M0, k, include_R) <= log_target

    lo, hi = 1, n_max
    if not ok(hi):
        raise PowerError(f"required n exceeds {n_max}")
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo

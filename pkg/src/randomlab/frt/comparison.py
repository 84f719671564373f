"""Classical randomization-test statistics used as baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import Adjacency, ExperimentData


class StatisticError(ValueError):
    pass


def _groups(y, z):
    y = np.asarray(y, dtype=float)
    z = np.asarray(z).astype(bool)
    y1, y0 = y[z], y[~z]
    if y1.size == 0 or y0.size == 0:
        raise StatisticError("empty treatment group")
    return y1, y0


def variance_ratio(y, z) -> float:
    """Treated sample variance over control sample variance."""
    y1, y0 = _groups(y, z)
    if y1.size < 2 or y0.size < 2:
        raise StatisticError("variance ratio needs two units per arm")
    v0 = np.var(y0, ddof=1)
    if v0 == 0.0:
        raise StatisticError("zero control variance")
    return float(np.var(y1, ddof=1) / v0)


def _ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.sort(a)
    b = np.sort(b)
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def shifted_ks(y, z, shift: float | str = 0.0) -> float:
    """Sup-distance between the treated ECDF and the control ECDF shifted by ``shift``.

    ``shift="dim"`` uses the difference in means of the given assignment, which
    makes the statistic insensitive to a pure location shift.
    """
    y1, y0 = _groups(y, z)
    if isinstance(shift, str):
        if shift != "dim":
            raise StatisticError(f"unknown shift {shift!r}")
        shift = y1.mean() - y0.mean()
    return _ks_distance(y1, y0 + float(shift))


def edge_level_contrast(y, z, adjacency: Adjacency, focal) -> float:
    """Mean outcome of exposed focal units minus that of unexposed focal units.

    A focal unit is exposed when at least one neighbour is treated.
    """
    y = np.asarray(y, dtype=float)
    focal = np.asarray(focal)
    exposed = adjacency.exposure(z)[focal] > 0
    if exposed.all() or not exposed.any():
        raise StatisticError("empty exposed or unexposed focal group")
    yf = y[focal]
    return float(yf[exposed].mean() - yf[~exposed].mean())


def neyman_t(y, z) -> float:
    """Difference in means over the Neyman standard error."""
    y1, y0 = _groups(y, z)
    if y1.size < 2 or y0.size < 2:
        raise StatisticError("studentization needs two units per arm")
    se2 = np.var(y1, ddof=1) / y1.size + np.var(y0, ddof=1) / y0.size
    if se2 <= 0.0:
        raise StatisticError("zero variance in studentization")
    return float((y1.mean() - y0.mean()) / np.sqrt(se2))


def lin_t(y, z, X) -> float:
    """HC2-studentized treatment coefficient of the fully interacted regression.

    Regresses y on (1, z, Xc, z * Xc) with Xc the column-centred covariates.
    """
    y = np.asarray(y, dtype=float)
    zf = np.asarray(z, dtype=float)
    _groups(y, zf)
    X = np.asarray(X, dtype=float).reshape(y.size, -1)
    Xc = X - X.mean(axis=0)
    A = np.column_stack([np.ones(y.size), zf, Xc, Xc * zf[:, None]])
    Q, Rm = np.linalg.qr(A)
    if np.min(np.abs(np.diag(Rm))) < 1e-10 * np.max(np.abs(np.diag(Rm))):
        raise StatisticError("rank-deficient design in Lin regression")
    coef = np.linalg.solve(Rm, Q.T @ y)
    resid = y - A @ coef
    lev = np.sum(Q * Q, axis=1)
    if np.any(lev >= 1.0 - 1e-12):
        raise StatisticError("unit with leverage one in Lin regression")
    w = resid * resid / (1.0 - lev)
    Rinv = np.linalg.inv(Rm)
    # (A'A)^{-1} A' = Rinv Q'
    B = Rinv @ Q.T
    var_z = float(np.sum(B[1] * B[1] * w))
    if var_z <= 0.0:
        raise StatisticError("zero variance in studentization")
    return float(coef[1] / np.sqrt(var_z))


@dataclass(frozen=True, eq=False)
class ComparisonStatistic:
    """Picklable ``(data, assignment) -> float`` wrapper around a baseline statistic.

    ``which`` is one of ``VR``, ``SKS``, ``ELC``, ``neyman_t``, ``lin_t``.
    ``shift`` feeds SKS; ``focal`` feeds ELC.
    """

    which: str
    shift: float | str = "dim"
    focal: np.ndarray | None = field(default=None)

    def __call__(self, data: ExperimentData, assignment) -> float:
        return comparison_statistic(data, assignment, self.which, shift=self.shift, focal=self.focal)


def comparison_statistic(data: ExperimentData, assignment, which: str, shift: float | str = "dim",
                         focal=None) -> float:
    y = data.outcomes
    if which == "VR":
        return variance_ratio(y, assignment)
    if which == "SKS":
        return shifted_ks(y, assignment, shift)
    if which == "ELC":
        if data.adjacency is None or focal is None:
            raise StatisticError("ELC needs an adjacency and a focal set")
        return edge_level_contrast(y, assignment, data.adjacency, focal)
    if which == "neyman_t":
        return neyman_t(y, assignment)
    if which == "lin_t":
        return lin_t(y, assignment, data.covariates)
    raise StatisticError(f"unknown statistic {which!r}")

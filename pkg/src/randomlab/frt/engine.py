"""Randomization p-value engine with randomized tie-breaking."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Sequence

import numpy as np

from .._rng import as_seed, stream
from ..dataset import ExperimentData
from ..parallel import chunk_indices, parallel_map

Statistic = Callable[[ExperimentData, np.ndarray], float]


@dataclass(eq=False)
class TestResult:
    """Outcome of one randomization test.

    ``p_value`` equals ``(#{t_r > T} + U (1 + m_R)) / (1 + R)`` plus any
    ``extras["correction"]`` (Berger-Boos), capped at 1.
    """

    __test__ = False  # not a pytest class

    observed_statistic: float
    randomized_statistics: np.ndarray
    tie_count: int
    uniform_draw: float
    p_value: float
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def R(self) -> int:
        return int(self.randomized_statistics.size)

    def recompute_pvalue(self) -> float:
        p = tiebreak_pvalue(self.observed_statistic, self.randomized_statistics, self.uniform_draw)
        return min(1.0, p + self.extras.get("correction", 0.0))

    def to_dict(self, include_null: bool = True) -> dict:
        out = {
            "p_value": self.p_value,
            "observed_statistic": self.observed_statistic,
            "R": self.R,
            "tie_count": self.tie_count,
            "uniform_draw": self.uniform_draw,
        }
        for key, val in self.extras.items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        if include_null:
            out["randomized_statistics"] = self.randomized_statistics.tolist()
        return out


def tiebreak_pvalue(observed: float, randomized, u: float) -> float:
    t = np.asarray(randomized, dtype=float)
    greater = int(np.sum(t > observed))
    ties = int(np.sum(t == observed))
    return (greater + u * (1 + ties)) / (1 + t.size)


def result_from_statistics(observed: float, randomized, u: float, **extras) -> TestResult:
    t = np.asarray(randomized, dtype=float)
    return TestResult(
        observed_statistic=float(observed),
        randomized_statistics=t,
        tie_count=int(np.sum(t == observed)),
        uniform_draw=float(u),
        p_value=tiebreak_pvalue(observed, t, u),
        extras=dict(extras),
    )


def randomization_draw(design, seed: int, r: int) -> np.ndarray:
    """The r-th replicate assignment; depends only on (seed, r)."""
    return design.draw(stream(seed, "randomization", r))


def uniform_draw(seed: int) -> float:
    return float(stream(seed, "tiebreak").random())


def _evaluate_chunk(pairs, design, seed: int, indices: range) -> np.ndarray:
    out = np.empty((len(indices), len(pairs)))
    for row, r in enumerate(indices):
        z = randomization_draw(design, seed, r)
        for col, (stat, data) in enumerate(pairs):
            out[row, col] = stat(data, z)
    return out


def evaluate_randomizations(pairs: Sequence[tuple[Statistic, ExperimentData]], design, R: int,
                            seed: int, workers: int = 1) -> np.ndarray:
    """Matrix ``(R, len(pairs))`` of statistics on shared replicate assignments."""
    chunks = chunk_indices(R, max(1, workers) * 4 if workers > 1 else 1)
    job = partial(_evaluate_chunk, list(pairs), design, seed)
    parts = parallel_map(job, chunks, workers)
    return np.vstack(parts) if parts else np.empty((0, len(pairs)))


def randomization_pvalue(statistic: Statistic, data: ExperimentData, design, R: int, rng=0,
                         workers: int = 1, observed_assignment=None) -> TestResult:
    """Procedure 1: observed statistic, R design draws, one uniform tie-breaker.

    Outcomes and covariates are held fixed; only the assignment is redrawn.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    seed = as_seed(rng)
    z_obs = data.treatments if observed_assignment is None else np.asarray(observed_assignment)
    observed = statistic(data, z_obs)
    randomized = evaluate_randomizations([(statistic, data)], design, R, seed, workers)[:, 0]
    return result_from_statistics(observed, randomized, uniform_draw(seed))

"""Replication harness: rejection rates and mean signal strength per cell."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .._rng import stream, subseed
from ..design import focal_half_controls_per_cluster
from ..frt import (
    ComparisonStatistic,
    HetGrid,
    global_specs,
    randomization_pvalue,
    spillover_specs,
    test_global,
    test_heterogeneity,
    test_residualized,
    test_spillover,
)
from ..models import HyperParams, PredictorSpec
from ..parallel import chunk_indices, parallel_map
from .dgp import DgpSpec, generate

KINDS = ("global", "residualized", "heterogeneity", "spillover")
COMPARISONS = ("VR", "SKS", "ELC", "neyman_t", "lin_t")
CSV_COLUMNS = ("study", "method", "effect", "rejection_rate", "mean_delta_hat", "reps", "R", "seed")


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Method:
    """One test configuration run on every replicate dataset.

    ``family`` picks the CV model class (random_forest, linear,
    linear_interaction); ``statistic`` selects a classical comparison
    statistic instead. ``het_points`` is the size of the constant-effect grid.
    """

    name: str
    kind: str = "global"
    family: str = "random_forest"
    statistic: str | None = None
    trees: int = 100
    k: int = 5
    het_points: int = 41
    het_width: float = 5.0
    forest_grid: tuple[HyperParams, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SimulationError(f"unknown method kind {self.kind!r}")
        if self.statistic is not None and self.statistic not in COMPARISONS:
            raise SimulationError(f"unknown comparison statistic {self.statistic!r}")
        if self.statistic == "ELC" and self.kind != "spillover":
            raise SimulationError("ELC is a spillover statistic")

    def to_dict(self) -> dict:
        out = {
            "name": self.name, "kind": self.kind, "family": self.family,
            "statistic": self.statistic, "trees": self.trees, "k": self.k,
            "het_points": self.het_points, "het_width": self.het_width,
        }
        if self.forest_grid is not None:
            out["forest_grid"] = [[h.mtry, h.min_node_size] for h in self.forest_grid]
        return out


def run_method(method: Method, data, design, R: int, seed: int, focal=None):
    """Run one method on one dataset and return its TestResult."""
    stat = None
    if method.statistic is not None:
        shift = "dim" if method.statistic == "SKS" else 0.0
        stat = ComparisonStatistic(method.statistic, shift=shift, focal=focal)

    if method.kind == "spillover":
        if focal is None:
            raise SimulationError("spillover method needs a focal set")
        if stat is not None:
            return test_spillover(data, design, focal, R=R, k=method.k, rng=seed, statistic=stat)
        null, full = spillover_specs(method.family, method.trees, method.forest_grid)
        return test_spillover(data, design, focal, null, full, R=R, k=method.k, rng=seed)

    if method.kind == "heterogeneity":
        grid = HetGrid.around_estimate(data, method.het_points, method.het_width)
        if stat is not None:
            return test_heterogeneity(data, design, grid=grid, R=R, k=method.k, rng=seed,
                                      statistic=stat)
        null, full = global_specs(method.family, method.trees, method.forest_grid)
        return test_heterogeneity(data, design, null, full, grid, R=R, k=method.k, rng=seed)

    if method.kind == "residualized":
        cov = PredictorSpec("linear", "covariates") if method.family != "random_forest" else \
            PredictorSpec("random_forest", "covariates", trees=method.trees,
                          **({"grid": method.forest_grid} if method.forest_grid else {}))
        return test_residualized(data, design, cov, R=R, k=method.k, rng=seed)

    if stat is not None:
        return randomization_pvalue(stat, data, design, R, seed)
    null, full = global_specs(method.family, method.trees, method.forest_grid)
    return test_global(data, design, null, full, R=R, k=method.k, rng=seed)


def _replicate(dgp: DgpSpec, methods, R: int, seed: int, effect_index: int, rep: int):
    effect = dgp.effects[effect_index]
    data, design = generate(dgp, effect, stream(seed, "data", effect_index, rep))
    focal = None
    if any(m.kind == "spillover" for m in methods):
        focal = focal_half_controls_per_cluster(
            data.cluster_ids, data.treatments, stream(seed, "focal", effect_index, rep))
    test_seed = subseed(seed, "test", effect_index, rep)
    out = []
    for m in methods:
        try:
            res = run_method(m, data, design, R, test_seed, focal)
        except Exception as exc:
            raise SimulationError(
                f"{dgp.name} effect={effect} rep={rep} method={m.name}: {exc}") from exc
        out.append((res.p_value, float(res.extras.get("delta_hat", math.nan))))
    return out


def _run_jobs(dgp, methods, R, seed, jobs):
    return [_replicate(dgp, methods, R, seed, e, r) for e, r in jobs]


@dataclass
class SimReport:
    """Per-cell rejection rates; raw p-values and Delta-hats kept for inspection."""

    study: str
    R: int
    seed: int
    alpha: float
    records: list[dict] = field(default_factory=list)
    pvalues: dict[tuple[str, float], np.ndarray] = field(default_factory=dict)
    delta_hats: dict[tuple[str, float], np.ndarray] = field(default_factory=dict)

    def cell(self, method: str, effect: float) -> dict:
        for rec in self.records:
            if rec["method"] == method and rec["effect"] == effect:
                return rec
        raise KeyError((method, effect))

    def rejection_rate(self, method: str, effect: float) -> float:
        return self.cell(method, effect)["rejection_rate"]

    def mean_delta_hat(self, method: str, effect: float) -> float:
        return self.cell(method, effect)["mean_delta_hat"]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.records:
            writer.writerow([rec[c] if not isinstance(rec[c], float) else repr(rec[c])
                             for c in CSV_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def run_study(dgp: DgpSpec, methods, reps: int, R: int, alpha: float = 0.05, rng=0,
              workers: int = 1, study: str | None = None) -> SimReport:
    """Replicate every (effect, method) cell ``reps`` times.

    Each replicate's data, focal set and test randomness derive from
    (seed, effect index, rep), so the report is the same for any worker count.
    All methods in a replicate see the same dataset.
    """
    methods = list(methods)
    if not methods:
        raise SimulationError("no methods given")
    if len({m.name for m in methods}) != len(methods):
        raise SimulationError("method names must be unique")
    if reps < 1 or R < 1:
        raise SimulationError("reps and R must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise SimulationError("alpha must lie in (0, 1)")
    if any(m.kind == "spillover" for m in methods) and not dgp.uses_adjacency:
        raise SimulationError(f"spillover methods need a network DGP, got {dgp.name}")
    seed = int(rng)

    jobs = [(e, r) for e in range(len(dgp.effects)) for r in range(reps)]
    pieces = 1 if workers <= 1 else workers * 4
    chunks = [jobs[c.start:c.stop] for c in chunk_indices(len(jobs), pieces)]
    results = parallel_map(partial(_run_jobs, dgp, methods, R, seed), chunks, workers)
    flat = [row for part in results for row in part]

    report = SimReport(study or dgp.name, R, seed, alpha)
    for e, effect in enumerate(dgp.effects):
        rows = flat[e * reps:(e + 1) * reps]
        for j, m in enumerate(methods):
            p = np.array([row[j][0] for row in rows])
            d = np.array([row[j][1] for row in rows])
            report.pvalues[(m.name, effect)] = p
            report.delta_hats[(m.name, effect)] = d
            report.records.append({
                "study": report.study,
                "method": m.name,
                "effect": float(effect),
                "rejection_rate": float(np.mean(p <= alpha)),
                "mean_delta_hat": float(np.mean(d)) if np.all(np.isfinite(d)) else math.nan,
                "reps": reps,
                "R": R,
                "seed": seed,
            })
    return report


def study_methods(study: str, trees: int = 100, het_points: int = 41) -> tuple[DgpSpec, list[Method]]:
    """Default DGP and method roster for a named study."""
    if study in ("fig1", "fig1_heterog"):
        return DgpSpec("fig1_heterog"), [
            Method("RF", trees=trees),
            Method("INT", family="linear_interaction"),
            Method("LM", family="linear"),
        ]
    if study in ("het_linear", "het_nonlinear"):
        return DgpSpec(study), [
            Method("ML-FRT", "heterogeneity", trees=trees, het_points=het_points),
            Method("LM-FRT", "heterogeneity", family="linear_interaction", het_points=het_points),
            Method("VR", "heterogeneity", statistic="VR", het_points=1),
            Method("SKS", "heterogeneity", statistic="SKS", het_points=1),
        ]
    if study in ("spill_const", "spill_nonlinear"):
        return DgpSpec(study), [
            Method("ML-FRT", "spillover", trees=trees),
            Method("LM-FRT", "spillover", family="linear"),
            Method("ELC", "spillover", statistic="ELC"),
        ]
    if study in ("const_linear", "const_piecewise", "const_cosine"):
        return DgpSpec(study), [
            Method("ML-FRT", trees=trees),
            Method("LM-FRT", family="linear"),
            Method("Neyman", statistic="neyman_t"),
            Method("Lin", statistic="lin_t"),
        ]
    if study in ("linear_h", "zero_ate"):
        return DgpSpec(study), [
            Method("ML-FRT", family="linear_interaction"),
            Method("RES", "residualized", family="linear"),
        ]
    raise SimulationError(f"unknown study {study!r}")


STUDIES = ("fig1", "het_linear", "het_nonlinear", "spill_const", "spill_nonlinear",
           "const_linear", "const_piecewise", "const_cosine", "linear_h", "zero_ate")

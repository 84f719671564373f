"""Command-line front end: ``randomlab test|simulate|power|samplesize``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import power as pw
from .dataset import DataError, Schema, load_csv, load_edges
from .design import (
    Bernoulli,
    DesignError,
    TwoStageCluster,
    design_from_config,
    focal_half_controls_per_cluster,
    focal_random_half,
)
from .frt import (
    HetGrid,
    bonferroni,
    global_specs,
    spillover_specs,
    test_global,
    test_heterogeneity,
    test_imbalance,
    test_residualized,
    test_spillover,
)
from .models import HyperParams
from ._rng import stream

TEST_KINDS = ("global", "het", "spillover", "imbalance")

DEFAULTS = {
    "R": 1000,
    "folds": 5,
    "alpha": 0.05,
    "seed": 0,
    "workers": 1,
    "index_base": 0,
    "model": {"family": "random_forest", "trees": 100},
}


class UsageError(Exception):
    pass


def _shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--data", help="CSV with a header row")
    parser.add_argument("--edges", help="edge-list CSV (two integer columns)")
    parser.add_argument("--index-base", type=int, choices=(0, 1), dest="index_base")
    parser.add_argument("--R", type=int, help="number of randomizations")
    parser.add_argument("--folds", type=int, help="cross-validation folds k")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="result file (default: stdout)")
    parser.add_argument("--emit-null-dist", dest="emit_null_dist",
                        help="also write the randomized statistics to this CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randomlab",
                                     description="Randomization tests with cross-validated statistics.")
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="run a randomization test on a dataset")
    test.add_argument("kind", choices=TEST_KINDS)
    _shared(test)
    test.add_argument("--family", choices=("random_forest", "linear", "linear_interaction"))
    test.add_argument("--trees", type=int)
    test.add_argument("--residualized", action="store_true", default=None,
                      help="global test on residuals of Y ~ X")
    test.add_argument("--covariate", help="imbalance: covariate name or index (default: all)")

    sim = sub.add_parser("simulate", help="run a simulation study and write a CSV")
    _shared(sim)
    sim.add_argument("--study")
    sim.add_argument("--reps", type=int)
    sim.add_argument("--trees", type=int)
    sim.add_argument("--effects", help="comma-separated effect values")
    sim.add_argument("--het-points", type=int, dest="het_points")

    powr = sub.add_parser("power", help="estimate Delta on pilot data and size a study")
    _shared(powr)
    powr.add_argument("--family", choices=("random_forest", "linear", "linear_interaction"))
    powr.add_argument("--trees", type=int)
    powr.add_argument("--target", type=float)

    ss = sub.add_parser("samplesize", help="smallest n meeting a type-II error target")
    _shared(ss)
    ss.add_argument("--L", type=float, dest="L")
    ss.add_argument("--M0", type=float, dest="M0")
    ss.add_argument("--k", type=int)
    ss.add_argument("--target", type=float)
    ss.add_argument("--include-R", type=int, dest="include_R")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults < config file < command-line flags."""
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        for key, val in loaded.items():
            if isinstance(val, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(val)
            else:
                cfg[key] = val
    for key, val in vars(args).items():
        if key in ("config", "command") or val is None:
            continue
        if key in ("family", "trees"):
            cfg.setdefault("model", {})[key] = val
        else:
            cfg[key] = val
    cfg["command"] = args.command
    return cfg


def _check_positive(cfg, *keys):
    for key in keys:
        if key in cfg and cfg[key] is not None and cfg[key] < 1:
            raise UsageError(f"--{key} must be >= 1")


def _schema(cfg: dict, path: str) -> Schema:
    given = cfg.get("schema", {})
    with open(path, newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    outcome = given.get("outcome", "y")
    treatment = given.get("treatment", "z")
    cluster = given.get("cluster", "cluster" if "cluster" in header else None)
    if "covariates" in given:
        covs = tuple(given["covariates"])
    else:
        covs = tuple(h for h in header if h not in (outcome, treatment, cluster))
    return Schema(outcome, treatment, covs, cluster)


def _load_data(cfg: dict, need_edges: bool = False):
    path = cfg.get("data")
    if not path:
        raise UsageError("--data is required")
    if need_edges and not cfg.get("edges"):
        raise UsageError("adjacency required: pass --edges")
    if not Path(path).exists():
        raise DataError(f"data file not found: {path}")
    data = load_csv(path, _schema(cfg, path))
    if cfg.get("edges"):
        adjacency = load_edges(cfg["edges"], data.n, int(cfg.get("index_base", 0)))
        data = data.replace(adjacency=adjacency)
    return data


def _design(cfg: dict, data):
    if "design" in cfg:
        return design_from_config(cfg["design"], data.n, data.cluster_ids)
    if cfg["command"] == "test" and cfg.get("kind") == "spillover" and data.cluster_ids is not None:
        return TwoStageCluster(data.cluster_ids, 0.5, 1)
    return Bernoulli(data.n, 0.5)


def _forest_grid(model: dict):
    grid = model.get("grid")
    if grid is None:
        return None
    return tuple(HyperParams(m, int(s)) for m, s in grid)


def _model_specs(cfg: dict, which: str = "global"):
    model = cfg.get("model", {})
    family = model.get("family", "random_forest")
    trees = int(model.get("trees", 100))
    grid = _forest_grid(model)
    if which == "spillover":
        return spillover_specs(family, trees, grid)
    return global_specs(family, trees, grid)


def _het_grid(cfg: dict, data) -> HetGrid:
    het = cfg.get("het", {})
    mode = het.get("mode", "full_grid")
    points = int(het.get("points", 41))
    if "values" in het:
        return HetGrid(np.asarray(het["values"], dtype=float))
    if mode == "berger_boos":
        ci = tuple(het["ci"]) if "ci" in het else None
        return HetGrid.berger_boos(data, float(het.get("gamma", 0.01)), points, ci)
    return HetGrid.around_estimate(data, points, float(het.get("width", 5.0)))


def _focal(cfg: dict, data, seed: int) -> np.ndarray:
    rule = cfg.get("focal", "half_controls_per_cluster" if data.cluster_ids is not None else "random_half")
    if isinstance(rule, list):
        return np.asarray(rule, dtype=np.int64)
    rng = stream(seed, "focal")
    if rule == "half_controls_per_cluster":
        if data.cluster_ids is None:
            raise UsageError("focal rule half_controls_per_cluster needs a cluster column")
        return focal_half_controls_per_cluster(data.cluster_ids, data.treatments, rng)
    if rule == "random_half":
        return focal_random_half(data.n, rng)
    raise UsageError(f"unknown focal rule {rule!r}")


def _covariate_indices(cfg: dict, data) -> list[int]:
    cov = cfg.get("covariate")
    if cov is None:
        return list(range(data.p))
    if str(cov).lstrip("-").isdigit():
        return [int(cov)]
    if cov not in data.covariate_names:
        raise UsageError(f"unknown covariate {cov!r}")
    return [data.covariate_names.index(cov)]


def run_test(cfg: dict) -> tuple[dict, np.ndarray | None]:
    kind = cfg["kind"]
    _check_positive(cfg, "R", "workers")
    data = _load_data(cfg, need_edges=kind == "spillover")
    design = _design(cfg, data)
    R, k, seed, workers = int(cfg["R"]), int(cfg["folds"]), int(cfg["seed"]), int(cfg["workers"])
    common = dict(R=R, k=k, rng=seed, workers=workers)

    if kind == "global":
        if cfg.get("residualized"):
            res = test_residualized(data, design, **common)
        else:
            null, full = _model_specs(cfg)
            res = test_global(data, design, null, full, **common)
    elif kind == "het":
        null, full = _model_specs(cfg)
        res = test_heterogeneity(data, design, null, full, _het_grid(cfg, data), **common)
    elif kind == "spillover":
        focal = _focal(cfg, data, seed)
        null, full = _model_specs(cfg, "spillover")
        res = test_spillover(data, design, focal, null, full, **common)
    else:
        model = cfg.get("model", {})
        indices = _covariate_indices(cfg, data)
        results = [test_imbalance(data, design, j, model.get("family", "random_forest"),
                                  trees=int(model.get("trees", 100)), grid=_forest_grid(model),
                                  **common) for j in indices]
        adjusted = bonferroni([r.p_value for r in results])
        per = []
        for j, r, adj in zip(indices, results, adjusted):
            entry = r.to_dict(include_null=False)
            entry["covariate"] = data.covariate_names[j] if data.covariate_names else j
            entry["bonferroni_p_value"] = float(adj)
            per.append(entry)
        out = {"covariates": per, "p_value": float(min(adjusted)), "R": R, "k": k, "seed": seed,
               "reject": bool(min(adjusted) <= cfg["alpha"])}
        null_dist = np.column_stack([r.randomized_statistics for r in results])
        return out, null_dist

    out = res.to_dict(include_null=False)
    out.setdefault("sobol_index", None)
    out.setdefault("delta_hat", None)
    out.update(k=k, seed=seed, reject=bool(res.p_value <= cfg["alpha"]))
    return out, res.randomized_statistics


def run_simulate(cfg: dict) -> tuple[str, dict]:
    from .sim import DgpSpec, STUDIES, run_study, study_methods

    study = cfg.get("study")
    if not study:
        raise UsageError("--study is required")
    if study not in STUDIES:
        raise UsageError(f"unknown study {study!r}; choose from {', '.join(STUDIES)}")
    _check_positive(cfg, "R", "workers", "reps")
    model = cfg.get("model", {})
    dgp, methods = study_methods(study, int(model.get("trees", 100)), int(cfg.get("het_points", 41)))
    effects = cfg.get("effects")
    if isinstance(effects, str):
        try:
            effects = [float(e) for e in effects.split(",") if e.strip()]
        except ValueError:
            raise UsageError("--effects must be comma-separated numbers") from None
    if effects:
        dgp = DgpSpec(dgp.name, effects=tuple(effects))
    report = run_study(dgp, methods, int(cfg.get("reps", 200)), int(cfg["R"]), float(cfg["alpha"]),
                       int(cfg["seed"]), int(cfg["workers"]), study=study)
    meta = {"dgp": dgp.to_dict(), "methods": [m.to_dict() for m in methods]}
    return report.to_csv(), meta


def run_power(cfg: dict) -> dict:
    data = _load_data(cfg)
    specs = _model_specs(cfg)
    est = pw.estimate_delta(data, None, specs, int(cfg["folds"]), int(cfg["seed"]))
    target = float(cfg.get("target", 0.2))
    out = est.to_dict()
    out["target"] = target
    if est.L_hat > 0:
        out["sample_size"] = pw.sample_size(est.L_hat, est.M0_hat, est.k, target)
    else:
        out["sample_size"] = None
        out["note"] = "estimated signal is not positive; the bound cannot reach the target"
    var_y = float(np.var(data.outcomes, ddof=1))
    out["sobol_index"] = est.delta_hat / var_y if var_y > 0 else None
    return out


def run_samplesize(cfg: dict) -> dict:
    missing = [f"--{k}" for k in ("L", "M0", "k") if cfg.get(k) is None]
    if missing:
        raise UsageError(f"missing {' '.join(missing)}")
    target = float(cfg.get("target", 0.2))
    n = pw.sample_size(float(cfg["L"]), float(cfg["M0"]), int(cfg["k"]), target, cfg.get("include_R"))
    return {"sample_size": n, "L": cfg["L"], "M0": cfg["M0"], "k": cfg["k"], "target": target,
            "include_R": cfg.get("include_R")}


def _echo(cfg: dict) -> dict:
    # worker count never changes results, so it stays out of result files
    return {k: v for k, v in cfg.items() if k not in ("workers", "out", "emit_null_dist")}


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg["command"] == "test":
            out, null_dist = run_test(cfg)
            out["config"] = _echo(cfg)
            _write(json.dumps(out, indent=2, sort_keys=True) + "\n", cfg.get("out"))
            if cfg.get("emit_null_dist") and null_dist is not None:
                with open(cfg["emit_null_dist"], "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    arr = np.asarray(null_dist).reshape(len(null_dist), -1)
                    w.writerow(["randomized_statistic"] if arr.shape[1] == 1 else
                               [f"randomized_statistic_{j}" for j in range(arr.shape[1])])
                    for row in arr:
                        w.writerow([repr(float(v)) for v in row])
        elif cfg["command"] == "simulate":
            text, meta = run_simulate(cfg)
            _write(text, cfg.get("out"))
            if cfg.get("out"):
                meta["config"] = _echo(cfg)
                Path(cfg["out"] + ".config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        elif cfg["command"] == "power":
            out = run_power(cfg)
            out["config"] = _echo(cfg)
            _write(json.dumps(out, indent=2, sort_keys=True) + "\n", cfg.get("out"))
        else:
            out = run_samplesize(cfg)
            if cfg.get("out"):
                out["config"] = _echo(cfg)
                Path(cfg["out"]).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
            print(out["sample_size"])
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"randomlab: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, DesignError, ValueError, OSError, RuntimeError) as exc:
        print(f"randomlab: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

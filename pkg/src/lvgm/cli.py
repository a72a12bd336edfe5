"""Command line entry point: ``lvgm {generate,estimate,run,calibrate}``.

Exit status is 0 on success, 2 when a run detects an invariant violation,
and 1 on I/O errors or invalid model parameters.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import linalg
from .errors import LvgmError
from .estimator import EstimatorConfig, estimate
from .harness import ExperimentPlan, calibrate_constants, load_calibration, run_plan
from .model import STREAM_SAMPLE, ModelSpec, assemble_model, make_rng, sample_covariance, save_model

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _load_spec(path, seed):
    spec = ModelSpec.from_dict(json.loads(Path(path).read_text()))
    return spec if seed is None else replace(spec, seed=seed)


def cmd_generate(args) -> int:
    spec = _load_spec(args.spec, args.seed)
    model = assemble_model(spec)
    out = Path(args.out or "model")
    save_model(model, out)
    sigma_n = sample_covariance(model, spec.n, make_rng(spec.seed, STREAM_SAMPLE))
    linalg.write_matrix(out / "Sigma_n.txt", sigma_n)
    print(f"wrote model (p={spec.p}, rank={model.true_rank}) and Sigma_n (n={spec.n}) to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    sigma_n = linalg.read_matrix(args.sigma)
    if args.config:
        text = json.loads(Path(args.config).read_text())
        cfg = load_calibration(args.config) if "estimator_cfg" in text else EstimatorConfig.from_dict(text)
    else:
        cfg = EstimatorConfig()
    res = estimate(sigma_n, args.n, cfg)
    out = Path(args.out or "estimate")
    res.save(out)
    if args.format == "csv":
        with open(out / "estimate.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            for k, v in res.summary().items():
                w.writerow([k, json.dumps(v)])
    print(f"rank_estimate={res.rank_estimate} tau_n={res.tau_n:.6g} "
          f"feasibility_slack={res.feasibility_slack:.3g}")
    if res.feasibility_slack > res.tau_n + 1e-8:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_run(args) -> int:
    plan = ExperimentPlan.load(args.plan)
    if args.seed is not None:
        plan.base_spec = replace(plan.base_spec, seed=args.seed)
    report = run_plan(plan, threads=args.threads, out_dir=args.out, fmt=args.format or "both")
    for cell in report["cells"]:
        print(json.dumps(cell["params"]), f"sign={cell['sign_recovery_rate']}",
              f"rank={cell['rank_recovery_rate']}", f"failures={cell['failures']}")
    if report["invariant_violations"]:
        print(f"{report['invariant_violations']} invariant violation(s)", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_calibrate(args) -> int:
    spec = _load_spec(args.spec, args.seed)
    cal = calibrate_constants(spec, args.pilots)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "calibration.json").write_text(json.dumps(cal.to_dict(), indent=2) + "\n")
    print(f"C2={cal.C2:.6g} C1={cal.C1:.6g} C3={cal.C3:.6g} -> {out / 'calibration.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lvgm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=False):
        p.add_argument("--seed", type=int, default=None, help="override the 64-bit seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="restrict output to one format (default: all)")
        if threads:
            p.add_argument("--threads", type=int, default=1, help="worker processes")

    g = sub.add_parser("generate", help="draw a model and a sample covariance from a spec")
    g.add_argument("--spec", required=True, help="ModelSpec JSON file")
    common(g)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="run the estimator on a sample covariance file")
    e.add_argument("--sigma", required=True, help="sample covariance in matrix text format")
    e.add_argument("--n", type=int, required=True, help="sample size behind --sigma")
    e.add_argument("--config", help="EstimatorConfig or calibration JSON")
    common(e)
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("run", help="execute an experiment plan")
    r.add_argument("--plan", required=True, help="ExperimentPlan JSON file")
    common(r, threads=True)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("calibrate", help="pilot calibration of C2/C1 and C3")
    c.add_argument("--spec", required=True, help="ModelSpec JSON file")
    c.add_argument("--pilots", type=int, default=50)
    common(c)
    c.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LvgmError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: run a suite, validate a model, certify a report."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bench import certify_report, run_suite
from .geometry import ProxSetup
from .oracles import ModelOracle, ModelParams, exact_oracle, validate_model
from .problems import problem_from_json


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="inexactopt",
                                     description="benchmark harness for inexact-model first-order methods")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a suite config")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", type=Path,
                       default=Path(os.environ.get("INEXACTOPT_OUT", "out")))
    p_run.add_argument("--jobs", type=int, default=1)

    p_val = sub.add_parser("validate", help="check declared model parameters on a problem file")
    p_val.add_argument("--problem", required=True, type=Path)
    p_val.add_argument("--params", required=True,
                       help="delta,Delta,L,mu (comma separated)")
    p_val.add_argument("--samples", type=int, default=1000)
    p_val.add_argument("--seed", type=int, default=0)

    p_cert = sub.add_parser("certify", help="recheck a stored run report")
    p_cert.add_argument("--report", required=True, type=Path)

    args = parser.parse_args(argv)

    if args.command == "run":
        code = run_suite(args.config, args.out, jobs=args.jobs)
        summary = json.loads((Path(args.out) / "summary.json").read_text())
        for r in summary["runs"]:
            status = "pass" if r["all_passed"] else "FAIL"
            print(f"[{status}] {r['name']}")
        print("suite:", "all checks passed" if code == 0 else "CHECK FAILURES")
        return code

    if args.command == "validate":
        delta, Delta, L, mu = (float(v) for v in args.params.split(","))
        problem = problem_from_json(args.problem.read_text())
        setup = ProxSetup.euclidean(problem.domain)
        base = exact_oracle(problem, L=L, mu=mu)
        oracle = ModelOracle(value_fn=base.value_fn, model_at=base.model_at,
                             params=ModelParams(delta=delta, Delta=Delta, L=L, mu=mu),
                             exact_value_fn=problem.value)
        x_star = problem.reference.x_star if problem.reference is not None else None
        rep = validate_model(setup, oracle, problem.value, sample_count=args.samples,
                             seed=args.seed, x_star=x_star)
        print(f"checked {rep.checked_pairs} pairs, "
              f"{len(rep.violations)} violations, worst residual {rep.worst_residual:.3e}")
        return 0 if rep.ok else 1

    if args.command == "certify":
        code = certify_report(args.report)
        print("report consistent" if code == 0 else "report INCONSISTENT")
        return code

    return 2


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven benchmark harness: seeded problems, solver runs, artifacts.

A suite config lists runs; each run names a generated problem, a solver and
its parameters.  Execution writes one CSV trace and one JSON report per run
plus a suite summary.  Every theorem check recomputed along the trace lands
in the report; the process exit code is nonzero iff any check fails.
Artifacts are byte-deterministic given the config (timing goes to a
separate sidecar file).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import equilibrium, fast_gradient, gradient, nonsmooth, switching
from .geometry import FeasibleSet, ProxSetup, bregman
from .oracles import exact_oracle, perturbed_oracle, validate_model
from .problems import (MatrixGame, ProblemSpec, generate_problem, problem_from_json,
                       problem_to_json)

GD_COLUMNS = ["k", "L", "Delta", "delta", "f", "best_f", "inner_loops", "bound_rhs",
              "displacement"]
FGM_COLUMNS = ["k", "alpha", "A", "L", "Delta", "delta", "f", "bound_rhs",
               "xy_displacement"]
SWITCH_COLUMNS = ["k", "productive", "h", "f", "g", "dualnorm", "running_stop_lhs",
                  "running_stop_rhs"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def emit_trace(columns: list[str], rows: list[list], path: Path) -> None:
    """Write a CSV trace; floats carry 17 significant digits for lossless round trips."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def read_trace(path: Path) -> tuple[list[str], np.ndarray]:
    text = path.read_text().strip().splitlines()
    cols = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]]) \
        if len(text) > 1 else np.empty((0, len(cols)))
    return cols, data


def _dump_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not serializable: {type(v)}")


def _build_problem(pd: dict) -> ProblemSpec:
    kind = pd["kind"]
    opts = {k: v for k, v in pd.items() if k not in ("kind", "dim", "seed")}
    return generate_problem(kind, int(pd.get("dim", 2)), int(pd["seed"]), **opts)


def _gd_rows(report: gradient.GDReport) -> list[list]:
    rows = []
    for rec, best, b in zip(report.trace, report.best_f, report.bound_sequence):
        rows.append([rec.k, rec.L, rec.Delta, rec.delta, rec.f, best,
                     rec.inner_loops, b, rec.displacement])
    return rows


def _fgm_rows(report: fast_gradient.FGMReport) -> list[list]:
    rows = []
    for rec, b in zip(report.trace, report.bound_sequence):
        rows.append([rec.k, rec.alpha, rec.A, rec.L, rec.Delta, rec.delta, rec.f, b,
                     rec.xy_displacement])
    return rows


def _switch_rows(report: switching.SwitchReport, cfg: switching.SwitchConfig) -> list[list]:
    rows = []
    sum_inv = 0.0
    n_unprod = n_prod = 0
    for st in report.steps:
        if st.productive:
            n_prod += 1
            if np.isfinite(st.h) and st.dualnorm > 0:
                sum_inv += 1.0 / st.dualnorm ** 2
        else:
            n_unprod += 1
        _, lhs, rhs = switching._stop_reached(cfg, sum_inv, n_unprod, n_prod)
        rows.append([st.k, st.productive, st.h, st.f, st.g, st.dualnorm, lhs, rhs])
    return rows


def execute_run(run_cfg: dict, out_dir: Path) -> dict:
    """Execute one configured run; returns the report dict (also written to disk)."""
    name = run_cfg["name"]
    problem = _build_problem(run_cfg["problem"])
    solver = run_cfg["solver"]
    method = solver["method"]
    checks: list[dict] = []
    report: dict = {"name": name, "method": method, "config": run_cfg}
    trace_path = out_dir / f"{name}.trace.csv"

    def check(label: str, passed: bool, lhs: float | None = None,
              rhs: float | None = None):
        entry: dict = {"check": label, "passed": bool(passed)}
        if lhs is not None:
            entry["lhs"] = float(lhs)
        if rhs is not None:
            entry["rhs"] = float(rhs)
        checks.append(entry)

    if method in ("gd", "fgm"):
        setup = ProxSetup.euclidean(problem.domain)
        L = float(solver.get("L", _default_L(problem)))
        mu = float(solver.get("mu", 0.0))
        delta = float(solver.get("delta", 0.0))
        Delta = float(solver.get("Delta", 0.0))
        seed = int(solver.get("seed", problem.seed or 0))
        if delta == 0.0 and Delta == 0.0:
            oracle = exact_oracle(problem, L=L, mu=mu)
        else:
            oracle = perturbed_oracle(problem, L=L, delta=delta, Delta=Delta,
                                      seed=seed, mu=mu)
        cfg = gradient.GDConfig(L0=float(solver.get("L0", 2 * L)),
                                Delta0=float(solver.get("Delta0", max(2 * Delta, 1e-12))),
                                delta0=float(solver.get("delta0", max(2 * delta, 1e-12))),
                                mu=mu, N=int(solver.get("N", 100)))
        x0 = np.asarray(solver["x0"], dtype=float) if "x0" in solver \
            else setup.prox_center()
        ref = problem.reference
        R2 = bregman(setup, ref.x_star, x0) if ref is not None else np.nan
        if method == "gd":
            rep = gradient.run_adaptive_gd(problem, setup, oracle, cfg, x0=x0, R2=R2)
            emit_trace(GD_COLUMNS, _gd_rows(rep), trace_path)
            gaps = np.array([r.f for r in rep.trace]) - ref.f_star
            bound_ok = bool(np.all(np.minimum.accumulate(gaps) <= rep.bound_sequence
                                   * (1 + 1e-8) + 1e-12))
            check("trace_bound", bound_ok)
            ok, slack = gradient.check_oracle_budget(rep, cfg, L, delta, Delta)
            check("oracle_budget", ok, rep.oracle_calls, rep.oracle_calls + slack)
            C = gradient.param_growth_constant(delta, Delta, cfg.delta0, cfg.Delta0)
            check("accepted_L_cap", max(r.L for r in rep.trace) <= 2 * C * L * (1 + 1e-12))
            report["achieved_gap"] = rep.f_out - ref.f_star
            report["oracle_calls"] = rep.oracle_calls
        else:
            rep_f = fast_gradient.run_adaptive_fgm(problem, setup, oracle, cfg,
                                                   x0=x0, R2=R2)
            emit_trace(FGM_COLUMNS, _fgm_rows(rep_f), trace_path)
            gaps = np.array([r.f for r in rep_f.trace]) - ref.f_star
            check("trace_bound", bool(np.all(gaps <= rep_f.bound_sequence * (1 + 1e-8)
                                             + 1e-12)))
            C = gradient.param_growth_constant(delta, Delta, cfg.delta0, cfg.Delta0)
            check("A_growth", fast_gradient.check_Ak_growth(rep_f.trace, L, C))
            ok, slack = fast_gradient.check_fgm_budget(rep_f, cfg, L, delta, Delta)
            check("oracle_budget", ok, rep_f.oracle_calls, rep_f.oracle_calls + slack)
            report["achieved_gap"] = rep_f.f_out - ref.f_star
            report["oracle_calls"] = rep_f.oracle_calls
        report["R2"] = R2

    elif method in ("restarted-gd", "restarted-fgm"):
        setup = ProxSetup.euclidean(problem.domain)
        eps = float(solver["epsilon"])
        obj = problem.objective
        Delta = float(solver.get("Delta", obj.jump_bound()))
        L = float(solver.get("L", 16.0 * Delta ** 2 / eps if Delta > 0 else 1.0))
        x0 = setup.prox_center()
        ref = problem.reference
        R2 = bregman(setup, ref.x_star, x0)
        if method == "restarted-gd":
            rep_r = nonsmooth.run_restarted_gd(problem, setup, eps, L, Delta, R2)
        else:
            rep_r = nonsmooth.run_restarted_fgm(problem, setup, eps, L, Delta, R2)
        plan = nonsmooth.RestartPlan(epsilon=eps, p=rep_r.p, gamma=1.0,
                                     mode="gd" if method == "restarted-gd" else "fgm")
        predicted = nonsmooth.predicted_calls(plan, L, Delta, R2)
        gap = rep_r.f_out - ref.f_star
        check("achieved_gap_le_eps", gap <= eps, gap, eps)
        check("calls_le_predicted", rep_r.subgrad_calls <= predicted,
              rep_r.subgrad_calls, predicted)
        emit_trace(["k", "L", "inner_loops"],
                   [[i, Lv, ic] for i, (Lv, ic) in
                    enumerate(zip(rep_r.trace_L, rep_r.inner_counts))], trace_path)
        report.update({"mode": rep_r.mode, "epsilon": eps, "p": rep_r.p,
                       "calls_realized": rep_r.subgrad_calls,
                       "calls_predicted": predicted, "f_gap": gap})

    elif method == "mirror-prox":
        game: MatrixGame = problem.objective
        vi = equilibrium.VIProblem.from_game(game, problem.domain)
        n1 = game.A.shape[0]
        setup = ProxSetup.product(ProxSetup.entropy(n1),
                                  ProxSetup.entropy(game.A.shape[1]))
        L_op = float(np.max(np.abs(game.A))) if np.max(np.abs(game.A)) > 0 else 1.0
        eps = float(solver["epsilon"])
        model = equilibrium.model_from_vi(vi, L=L_op)
        rep_m = equilibrium.run_mirror_prox(model, setup, eps,
                                            L0=float(solver.get("L0", 2 * L_op)))
        check("stopping_rule", rep_m.S_N >= rep_m.max_V / eps - 1e-9)
        ok, worst = equilibrium.check_equilibrium_certificate(model, setup, rep_m)
        check("averaged_model_certificate", ok, worst, 0.0)
        u_t = rep_m.y_tilde[:n1]
        v_t = rep_m.y_tilde[n1:]
        sgap = equilibrium.saddle_gap(game, u_t, v_t)
        rhs = eps + 2 * rep_m.delta_tilde + 1e-9
        check("saddle_gap", sgap <= rhs, sgap, rhs)
        emit_trace(["k", "L", "Delta", "yx_displacement", "inner_loops"],
                   [[r.k, r.L, r.Delta, r.yx_displacement, r.inner_loops]
                    for r in rep_m.trace], trace_path)
        report.update({"S_N": rep_m.S_N, "iterations": rep_m.iterations,
                       "gap_certificate": sgap, "eps": eps,
                       "delta_tilde": rep_m.delta_tilde})

    elif method in ("md-alg4", "md-alg5"):
        setup = ProxSetup.euclidean(problem.domain)
        variant = switching.VARIANT_ALG4 if method == "md-alg4" \
            else solver.get("variant", switching.VARIANT_OMEGA)
        cfg_s = switching.SwitchConfig(
            epsilon=float(solver["epsilon"]), theta0_sq=float(solver["theta0_sq"]),
            variant=variant, omega=float(solver.get("omega", 1.0)),
            M_f=float(solver.get("M_f", 1.0)), M_g=float(solver.get("M_g", 1.0)))
        rep_s = switching.run_switching_md(problem, setup, cfg_s)
        emit_trace(SWITCH_COLUMNS, _switch_rows(rep_s, cfg_s), trace_path)
        ref = problem.reference
        eps = cfg_s.epsilon
        if ref is not None:
            factor = cfg_s.omega ** 2 if variant == switching.VARIANT_OMEGA else 1.0
            check("objective_guarantee", rep_s.f_hat - ref.f_star <= factor * eps + 1e-9,
                  rep_s.f_hat - ref.f_star, factor * eps)
        check("constraint_guarantee", rep_s.g_hat <= eps * cfg_s.M_g + 1e-9,
              rep_s.g_hat, eps * cfg_s.M_g)
        check("iteration_cap", rep_s.iterations <= switching.iteration_cap(cfg_s))
        if method == "md-alg4" and solver.get("dual_certificate", False):
            cert = switching.dual_certificate(problem, rep_s, eps)
            check("dual_gap", cert["within_eps"], cert["gap"], eps)
            report["dual"] = {"lambda_hat": cert["lambda_hat"],
                              "dual_value": cert["dual_value"], "gap": cert["gap"]}
        report.update({"I": rep_s.n_productive, "J": rep_s.n_unproductive,
                       "f_hat": rep_s.f_hat, "g_hat": rep_s.g_hat})

    elif method == "relative":
        setup = ProxSetup.euclidean(problem.domain)
        rep_rel = switching.relative_accuracy_run(
            problem, setup, delta_rel=float(solver["delta_rel"]),
            gamma0=float(solver.get("gamma0", 1.0)),
            theta0_sq=float(solver["theta0_sq"]) if "theta0_sq" in solver else None)
        ref = problem.reference
        check("relative_accuracy",
              rep_rel.f_hat <= rep_rel.rel_error_bound * ref.f_star + 1e-9,
              rep_rel.f_hat, rep_rel.rel_error_bound * ref.f_star)
        check("constraint_guarantee", rep_rel.g_hat <= rep_rel.epsilon *
              max(float(np.linalg.norm(c.a)) for c in problem.constraints) + 1e-9)
        check("stopped_in_guaranteed_budget",
              rep_rel.iterations <= rep_rel.guaranteed_iterations)
        emit_trace(["N", "epsilon", "iterations"],
                   [[rep_rel.N, rep_rel.epsilon, rep_rel.iterations]], trace_path)
        report.update({"N": rep_rel.N, "epsilon": rep_rel.epsilon,
                       "iterations": rep_rel.iterations,
                       "inflated_branch": rep_rel.inflated_branch,
                       "f_hat": rep_rel.f_hat, "g_hat": rep_rel.g_hat})

    elif method == "validate":
        setup = ProxSetup.euclidean(problem.domain)
        L = float(solver.get("L", _default_L(problem)))
        oracle = exact_oracle(problem, L=L)
        vr = validate_model(setup, oracle, problem.value,
                            sample_count=int(solver.get("samples", 1000)),
                            seed=int(solver.get("seed", 0)))
        check("model_valid", vr.ok, vr.worst_residual, 0.0)
        emit_trace(["checked_pairs", "violations", "worst_residual"],
                   [[vr.checked_pairs, len(vr.violations), vr.worst_residual]],
                   trace_path)
        report["worst_residual"] = vr.worst_residual

    else:
        raise ValueError(f"unknown method {method!r}")

    report["checks"] = checks
    report["all_passed"] = all(c["passed"] for c in checks)
    report["trace_file"] = trace_path.name
    (out_dir / f"{name}.problem.json").write_text(problem_to_json(problem) + "\n")
    _dump_json(report, out_dir / f"{name}.report.json")
    return report


def _default_L(problem: ProblemSpec) -> float:
    from .problems import CompositeQuadL1, MaxAffine, Quadratic

    obj = problem.objective
    if isinstance(obj, Quadratic):
        return obj.smoothness()
    if isinstance(obj, CompositeQuadL1):
        return obj.quad.smoothness()
    if isinstance(obj, MaxAffine):
        return 1.0
    return 1.0


def run_suite(config_path: Path, out_dir: Path, jobs: int = 1) -> int:
    """Execute every run in the config; exit code 0 iff all checks pass."""
    cfg = json.loads(Path(config_path).read_text())
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = cfg["runs"]
    t0 = time.time()
    timings: dict[str, float] = {}

    def _one(rc):
        t = time.time()
        rep = execute_run(rc, out_dir)
        return rc["name"], rep, time.time() - t

    results = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, runs))
    else:
        results = [_one(rc) for rc in runs]

    all_ok = True
    summary = []
    for name, rep, dt in results:
        timings[name] = dt
        all_ok &= rep["all_passed"]
        summary.append({"name": name, "all_passed": rep["all_passed"],
                        "checks": rep["checks"]})
    _dump_json({"runs": summary, "all_passed": all_ok}, out_dir / "summary.json")
    _dump_json({"total_sec": time.time() - t0, "per_run_sec": timings},
               out_dir / "timings.json")
    return 0 if all_ok else 1


def certify_report(report_path: Path) -> int:
    """Recompute the stored checks of a report from its trace; 0 iff consistent.

    For gradient-method traces the bound column is rebuilt from the stored
    per-iteration parameters and compared bitwise-tolerant against the
    emitted values; stored pass flags must match the recomputation.
    """
    report_path = Path(report_path)
    rep = json.loads(report_path.read_text())
    out_dir = report_path.parent
    cols, data = read_trace(out_dir / rep["trace_file"])
    ok = True
    method = rep["method"]
    if method == "gd" and data.size:
        mu = float(rep["config"]["solver"].get("mu", 0.0))
        delta_true = float(rep["config"]["solver"].get("delta", 0.0))
        R2 = float(rep["R2"])
        iL = cols.index("L")
        iD = cols.index("Delta")
        idl = cols.index("delta")
        idisp = cols.index("displacement")
        ib = cols.index("bound_rhs")
        denom = noise = 0.0
        prod = 1.0
        for row in data:
            q = 1.0 - mu / row[iL]
            denom = q * denom + 1.0 / row[iL]
            noise = q * noise + (delta_true + row[idl] + row[iD] * row[idisp]) / row[iL]
            prod *= q
            ok &= abs((prod * R2 + noise) / denom - row[ib]) <= 1e-9 * (1 + abs(row[ib]))
    if method == "fgm" and data.size:
        iA = cols.index("A")
        iL = cols.index("L")
        ialpha = cols.index("alpha")
        prevA = 0.0
        for row in data:
            ok &= abs(row[iA] - (prevA + row[ialpha])) <= 1e-9 * (1 + row[iA])
            ok &= abs(row[iA] - row[iL] * row[ialpha] ** 2) <= 1e-8 * (1 + row[iA])
            prevA = row[iA]
    ok &= all(c["passed"] for c in rep["checks"])
    return 0 if ok else 1

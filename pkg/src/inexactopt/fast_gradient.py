"""Adaptive fast gradient method under a (delta, Delta, L)-model.

The accelerated scheme keeps two sequences (u from the prox subproblems, x
as the convex combination) and an accumulated weight A_k; the acceptance
test compares the objective at x^{k+1} with the model at y^{k+1} plus
0.5 L ||x - y||^2 + Delta ||x - y|| + delta.  Requires a prox function that
is 1-strongly convex with respect to the setup norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import AnySetup, prox_step
from .gradient import DOUBLING_CAP_EXP, PARAM_FLOOR, GDConfig, InnerLoopError, oracle_budget
from .oracles import ModelOracle


@dataclass
class FGMIterRecord:
    k: int
    alpha: float
    A: float
    L: float
    Delta: float
    delta: float
    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    f: float
    f_delta: float
    inner_loops: int
    xy_displacement: float


@dataclass
class FGMReport:
    x_out: np.ndarray
    f_out: float
    trace: list[FGMIterRecord]
    bound_sequence: np.ndarray
    oracle_calls: int

    @property
    def iterations(self) -> int:
        return len(self.trace)


def largest_root_alpha(A: float, L: float) -> float:
    """Larger root of L a^2 - a - A = 0, in the cancellation-free form."""
    if A < 0 or L <= 0:
        raise ValueError("need A >= 0 and L > 0")
    return (1.0 + np.sqrt(1.0 + 4.0 * L * A)) / (2.0 * L)


def run_adaptive_fgm(problem, setup: AnySetup, oracle: ModelOracle, config: GDConfig,
                     x0: np.ndarray | None = None, R2: float | None = None,
                     stop_gap: float | None = None,
                     f_star: float | None = None) -> FGMReport:
    """Run the accelerated loop for config.N accepted iterations.

    ``stop_gap`` with ``f_star`` stops early once the exact objective gap
    falls below the target (used by iteration-count checks).
    """
    if config.mu != 0.0:
        raise ValueError("the fast variant assumes mu = 0")
    if x0 is None:
        x0 = setup.prox_center()
    x = np.asarray(x0, dtype=float)
    if not setup.set.contains(x, tol=1e-9):
        raise ValueError("x0 must be feasible")

    exact_f = oracle.exact_value_fn
    u = x.copy()
    L = config.L0 / 2.0
    Delta = config.Delta0 / 2.0
    delta = config.delta0 / 2.0
    A = 0.0
    trace: list[FGMIterRecord] = []
    calls = 0

    for k in range(config.N):
        inner = 0
        while True:
            inner += 1
            calls += 1
            alpha = largest_root_alpha(A, L)
            A_next = A + alpha
            y = (alpha * u + A * x) / A_next
            model = oracle.model_at(y)
            u_next = prox_step(setup, u, model.scale(alpha), 1.0, config.prox_tol)
            x_next = (alpha * u_next + A * x) / A_next
            disp = setup.norm_primal(x_next - y)
            fy_d = oracle.f_delta(y)
            lhs = oracle.f_delta(x_next)
            rhs = fy_d + model(x_next) + 0.5 * L * disp ** 2 + Delta * disp + delta
            if lhs <= rhs + 1e-12 * (1.0 + abs(fy_d)):
                break
            if inner > config.inner_cap or L > 2.0 ** DOUBLING_CAP_EXP * config.L0:
                raise InnerLoopError(
                    f"iteration {k}: acceptance failed after {inner} trials "
                    f"(L={L:.3e}, residual={lhs - rhs:.3e})")
            L *= 2.0
            Delta *= 2.0
            delta *= 2.0
        f_val = exact_f(x_next) if exact_f is not None else lhs
        trace.append(FGMIterRecord(k=k + 1, alpha=alpha, A=A_next, L=L, Delta=Delta,
                                   delta=delta, y=y, u=u_next, x=x_next, f=f_val,
                                   f_delta=lhs, inner_loops=inner,
                                   xy_displacement=disp))
        x, u, A = x_next, u_next, A_next
        L = max(L / 2.0, PARAM_FLOOR)
        Delta = max(Delta / 2.0, PARAM_FLOOR)
        delta = max(delta / 2.0, PARAM_FLOOR)
        if stop_gap is not None and f_star is not None and f_val - f_star <= stop_gap:
            break

    bound = bound_fgm(trace, R2 if R2 is not None else np.nan, oracle.params.delta)
    return FGMReport(x_out=x, f_out=float(trace[-1].f), trace=trace,
                     bound_sequence=bound, oracle_calls=calls)


def bound_fgm(trace: list[FGMIterRecord], R2: float, delta: float = 0.0) -> np.ndarray:
    """R2/A_k plus the weighted accumulated noise; entry k bounds f(x^k) - f(x_*)."""
    n = len(trace)
    out = np.empty(n)
    acc = 0.0
    for i, rec in enumerate(trace):
        acc += (rec.Delta * rec.xy_displacement + rec.delta + delta) * rec.A
        if rec.A <= 0.0:
            out[i] = np.inf
        else:
            out[i] = R2 / rec.A + acc / rec.A
    return out


def check_Ak_growth(trace: list[FGMIterRecord], L_true: float, C: float = 1.0) -> bool:
    """A_k >= (k+1)^2 / (8 C L) for every recorded k >= 1."""
    for rec in trace:
        if rec.A < (rec.k + 1) ** 2 / (8.0 * C * L_true) * (1.0 - 1e-12):
            return False
    return True


def check_fgm_budget(report: FGMReport, config: GDConfig, L_true: float,
                     delta_true: float = 0.0,
                     Delta_true: float = 0.0) -> tuple[bool, float]:
    """Realized acceptance evaluations against 2k + max log backlog."""
    allowed = oracle_budget(len(report.trace), config.L0, config.Delta0,
                            config.delta0, L_true, Delta_true, delta_true)
    return report.oracle_calls <= allowed, allowed - report.oracle_calls

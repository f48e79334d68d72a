"""Adaptive gradient method under a (delta, Delta, L, mu)-model.

Per iteration the three inexactness parameters are halved (L floored at mu),
a prox step is taken, and the candidate is re-proxed with doubled parameters
until the model descent test accepts it.  The convergence bound along the
trace and the oracle-call budget are runtime-checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import AnySetup, bregman, prox_step
from .oracles import ModelOracle

PARAM_FLOOR = 1e-18
DOUBLING_CAP_EXP = 60


class InnerLoopError(RuntimeError):
    """Acceptance loop exhausted its doubling budget."""


@dataclass
class GDConfig:
    L0: float
    Delta0: float
    delta0: float
    mu: float = 0.0
    N: int = 100
    inner_cap: int = 200
    prox_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if not (self.L0 > 0 and self.Delta0 > 0 and self.delta0 > 0):
            raise ValueError("L0, Delta0, delta0 must be positive")
        if 2 * self.mu >= self.L0:
            raise ValueError("need 2*mu < L0")
        if self.inner_cap < 1:
            raise ValueError("inner_cap >= 1")


@dataclass
class GDIterRecord:
    k: int
    L: float
    Delta: float
    delta: float
    x: np.ndarray
    f: float
    f_delta: float
    inner_loops: int
    displacement: float


@dataclass
class GDReport:
    y_out: np.ndarray
    f_out: float
    trace: list[GDIterRecord]
    bound_sequence: np.ndarray
    oracle_calls: int
    best_f: np.ndarray

    @property
    def iterations(self) -> int:
        return len(self.trace)


def run_adaptive_gd(problem, setup: AnySetup, oracle: ModelOracle, config: GDConfig,
                    x0: np.ndarray | None = None, R2: float | None = None) -> GDReport:
    """Run the adaptive method for config.N accepted iterations.

    The output point minimizes the recorded objective values (earliest
    iterate wins ties); when the problem carries no exact objective the
    perturbed values are used for that selection.
    """
    if x0 is None:
        x0 = setup.prox_center()
    x = np.asarray(x0, dtype=float)
    if not setup.set.contains(x, tol=1e-9):
        raise ValueError("x0 must be feasible")

    exact_f = oracle.exact_value_fn
    L, Delta, delta = config.L0, config.Delta0, config.delta0
    trace: list[GDIterRecord] = []
    calls = 0

    for k in range(config.N):
        L_next = max(config.mu, L / 2.0, PARAM_FLOOR)
        D_next = max(Delta / 2.0, PARAM_FLOOR)
        d_next = max(delta / 2.0, PARAM_FLOOR)
        fx_d = oracle.f_delta(x)
        model = oracle.model_at(x)
        inner = 0
        while True:
            inner += 1
            calls += 1
            x_next = prox_step(setup, x, model, L_next, config.prox_tol)
            disp = setup.norm_primal(x_next - x)
            lhs = oracle.f_delta(x_next)
            rhs = fx_d + model(x_next) + L_next * bregman(setup, x_next, x) \
                + d_next + D_next * disp
            if lhs <= rhs + 1e-12 * (1.0 + abs(fx_d)):
                break
            if inner > config.inner_cap or L_next > 2.0 ** DOUBLING_CAP_EXP * config.L0:
                raise InnerLoopError(
                    f"iteration {k}: acceptance failed after {inner} trials "
                    f"(L={L_next:.3e}, residual={lhs - rhs:.3e})")
            L_next *= 2.0
            D_next *= 2.0
            d_next *= 2.0
        f_val = exact_f(x_next) if exact_f is not None else lhs
        trace.append(GDIterRecord(k=k, L=L_next, Delta=D_next, delta=d_next,
                                  x=x_next, f=f_val, f_delta=lhs,
                                  inner_loops=inner, displacement=disp))
        x = x_next
        L, Delta, delta = L_next, D_next, d_next

    fs = np.array([r.f for r in trace])
    best_idx = int(np.argmin(fs))
    best_f = np.minimum.accumulate(fs)
    bound = bound_th03(trace, R2 if R2 is not None else np.nan,
                       oracle.params.delta, config.mu)
    return GDReport(y_out=trace[best_idx].x, f_out=float(fs[best_idx]), trace=trace,
                    bound_sequence=bound, oracle_calls=calls, best_f=best_f)


def bound_th03(trace: list[GDIterRecord], R2: float, delta: float,
               mu: float) -> np.ndarray:
    """Right-hand side of the trace convergence bound, one value per iteration.

    Entry k bounds f(y^{k+1}) - f(x_*) given V(x_*, x^0) <= R2.  Products of
    (1 - mu/L) follow the telescoping of the descent recursion (empty
    products are 1): the term recorded at iteration i is discounted by every
    later accepted curvature.
    """
    n = len(trace)
    out = np.empty(n)
    denom = 0.0
    noise = 0.0
    prod = 1.0
    for k, rec in enumerate(trace):
        q = 1.0 - mu / rec.L
        denom = q * denom + 1.0 / rec.L
        noise = q * noise + (delta + rec.delta + rec.Delta * rec.displacement) / rec.L
        prod *= q
        out[k] = (prod * R2 + noise) / denom
    return out


def bound_th03_parts(trace: list[GDIterRecord], R2: float, delta: float,
                     mu: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decomposition (geometric factor, noise numerator, denominator) of the bound."""
    n = len(trace)
    prods = np.empty(n)
    noises = np.empty(n)
    denoms = np.empty(n)
    denom = noise = 0.0
    prod = 1.0
    for k, rec in enumerate(trace):
        q = 1.0 - mu / rec.L
        denom = q * denom + 1.0 / rec.L
        noise = q * noise + (delta + rec.delta + rec.Delta * rec.displacement) / rec.L
        prod *= q
        prods[k], noises[k], denoms[k] = prod, noise, denom
    return prods, noises, denoms


def oracle_budget(k: int, L0: float, Delta0: float, delta0: float,
                  L_true: float, Delta_true: float, delta_true: float) -> float:
    """Allowed number of acceptance-test evaluations after k iterations.

    2k plus the worst doubling backlog; a log term with zero numerator is
    dropped (the corresponding parameter never forces a doubling).
    """
    terms = [0.0]
    if L_true > 0:
        terms.append(np.log2(2.0 * L_true / L0))
    if delta_true > 0:
        terms.append(np.log2(2.0 * delta_true / delta0))
    if Delta_true > 0:
        terms.append(np.log2(2.0 * Delta_true / Delta0))
    return 2.0 * k + max(terms)


def check_oracle_budget(report: GDReport, config: GDConfig, L_true: float,
                        delta_true: float = 0.0,
                        Delta_true: float = 0.0) -> tuple[bool, float]:
    """True iff realized acceptance evaluations fit the budget; returns slack too."""
    allowed = oracle_budget(len(report.trace), config.L0, config.Delta0,
                            config.delta0, L_true, Delta_true, delta_true)
    return report.oracle_calls <= allowed, allowed - report.oracle_calls


def param_growth_constant(delta_true: float, Delta_true: float,
                          delta0: float, Delta0: float) -> float:
    """C = max{1, 2 delta/delta0, 2 Delta/Delta0} governing accepted-L growth."""
    c = 1.0
    if delta_true > 0:
        c = max(c, 2.0 * delta_true / delta0)
    if Delta_true > 0:
        c = max(c, 2.0 * Delta_true / Delta0)
    return c

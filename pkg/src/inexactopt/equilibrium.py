"""Adaptive proximal mirror method for abstract equilibrium problems.

The method runs on a model psi(x, y) that is convex in its first argument,
vanishes on the diagonal and is delta-monotone; variational inequalities
supply psi(x, y) = <G(y), x - y> and saddle problems reduce to the VI of
their (grad_u, -grad_v) field.  Every iteration solves two prox subproblems
around the current point, halving the curvature/noise pair on entry and
doubling it until the three-point descent test accepts; the run stops when
the accumulated inverse curvatures cover max V / eps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (AnySetup, LinearModel, UnboundedSetError, bregman,
                       diameter_bound, linear_minimize, prox_residual, prox_step,
                       sample_points)
from .gradient import InnerLoopError
from .problems import MatrixGame, ProblemSpec


@dataclass(frozen=True)
class EquilibriumModel:
    """Model oracle for an equilibrium problem.

    ``operator`` gives the linearization coefficient at the base point, so
    psi(x, y) = <operator(y), x - y>; delta / Delta / L are the declared
    model parameters and subproblem_tol is the inexact-argmin target.
    """

    operator: Callable[[np.ndarray], np.ndarray]
    delta: float = 0.0
    Delta: float = 0.0
    L: float = 1.0
    subproblem_tol: float = 1e-12

    def psi(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self.operator(y) @ (x - y))

    def linear_at(self, y: np.ndarray) -> LinearModel:
        return LinearModel(base=np.asarray(y, dtype=float), grad=self.operator(y))


@dataclass(frozen=True)
class VIProblem:
    operator: Callable[[np.ndarray], np.ndarray]
    set: "object"  # FeasibleSet; kept loose to avoid import cycles in hints
    affine_M: np.ndarray | None = None
    affine_c: np.ndarray | None = None

    @staticmethod
    def affine(M: np.ndarray, c: np.ndarray, set_) -> "VIProblem":
        M = np.asarray(M, dtype=float)
        c = np.asarray(c, dtype=float)
        return VIProblem(operator=lambda x: M @ x + c, set=set_, affine_M=M, affine_c=c)

    @staticmethod
    def from_game(game: MatrixGame, set_) -> "VIProblem":
        n1, n2 = game.A.shape
        M = np.zeros((n1 + n2, n1 + n2))
        M[:n1, n1:] = game.A
        M[n1:, :n1] = -game.A.T
        return VIProblem(operator=game.operator, set=set_, affine_M=M,
                         affine_c=np.zeros(n1 + n2))


def model_from_vi(problem: VIProblem, L: float = 1.0,
                  subproblem_tol: float = 1e-12) -> EquilibriumModel:
    """Exact (delta = 0) equilibrium model psi(x, y) = <G(y), x - y>."""
    return EquilibriumModel(operator=problem.operator, delta=0.0, Delta=0.0, L=L,
                            subproblem_tol=subproblem_tol)


@dataclass
class MirrorProxRecord:
    k: int
    L: float
    Delta: float
    y: np.ndarray
    x: np.ndarray
    yx_displacement: float
    inner_loops: int
    residual: float


@dataclass
class MirrorProxReport:
    y_tilde: np.ndarray
    S_N: float
    iterations: int
    trace: list[MirrorProxRecord]
    eps: float
    max_V: float
    delta_tilde: float
    oracle_calls: int
    noise_average: float  # (1/S_N) sum Delta_k ||y-x|| / L_k


def run_mirror_prox(model: EquilibriumModel, setup: AnySetup, epsilon: float,
                    L0: float, Delta0: float = 1e-12, max_iter: int = 2_000_000,
                    inner_cap: int = 200) -> MirrorProxReport:
    """Adaptive two-prox loop with stopping S_N >= max V / eps.

    Both subproblems of an iteration are centered at the current point; the
    output is the inverse-curvature-weighted average of the extrapolation
    points.  Subproblem residuals are measured and the worst one is reported
    as delta_tilde for the gap certificates.
    """
    if epsilon <= 0:
        raise ValueError("epsilon > 0 required")
    x = setup.prox_center()
    max_V = diameter_bound(setup, x)
    target = max_V / epsilon
    L_run, D_run = L0, Delta0
    S = 0.0
    y_acc = np.zeros_like(x)
    noise_acc = 0.0
    delta_tilde = 0.0
    calls = 0
    trace: list[MirrorProxRecord] = []
    it = 0
    while S < target:
        it += 1
        if it > max_iter:
            raise InnerLoopError(f"stopping rule not reached in {max_iter} iterations")
        L_run = L_run / 2.0
        D_run = max(D_run / 2.0, 0.0)
        m_x = model.linear_at(x)
        calls += 1
        inner = 0
        while True:
            inner += 1
            calls += 1
            y_new = prox_step(setup, x, m_x, L_run, model.subproblem_tol)
            m_y = model.linear_at(y_new)
            x_new = prox_step(setup, x, m_y, L_run, model.subproblem_tol)
            disp = setup.norm_primal(y_new - x_new)
            lhs = model.psi(x_new, x)
            rhs = model.psi(y_new, x) + model.psi(x_new, y_new) \
                + L_run * bregman(setup, y_new, x) + L_run * bregman(setup, y_new, x_new) \
                + D_run * disp + model.delta
            if lhs <= rhs + 1e-12 * (1.0 + abs(lhs)):
                break
            if inner > inner_cap:
                raise InnerLoopError(
                    f"iteration {it}: descent test failed after {inner} doublings "
                    f"(L={L_run:.3e})")
            L_run *= 2.0
            D_run *= 2.0
        r1 = prox_residual(setup, m_x, y_new, x, L_run)
        r2 = prox_residual(setup, m_y, x_new, x, L_run)
        delta_tilde = max(delta_tilde, r1, r2)
        S += 1.0 / L_run
        y_acc = y_acc + y_new / L_run
        noise_acc += D_run * disp / L_run
        trace.append(MirrorProxRecord(k=it, L=L_run, Delta=D_run, y=y_new, x=x_new,
                                      yx_displacement=disp, inner_loops=inner,
                                      residual=max(r1, r2)))
        x = x_new
    y_tilde = y_acc / S
    return MirrorProxReport(y_tilde=y_tilde, S_N=S, iterations=it, trace=trace,
                            eps=epsilon, max_V=max_V, delta_tilde=delta_tilde,
                            oracle_calls=calls, noise_average=noise_acc / S)


def check_equilibrium_certificate(model: EquilibriumModel, setup: AnySetup,
                                  report: MirrorProxReport, n_samples: int = 100,
                                  seed: int = 0, tol: float = 1e-9) -> tuple[bool, float]:
    """Sampled check of the averaged-model stopping certificate.

    For feasible x: -(1/S_N) sum psi(x, y^{k+1}) / L_{k+1} must not exceed
    eps + 2 delta_tilde + delta + the averaged Delta noise.  Returns
    (all held, worst residual).
    """
    rng = np.random.default_rng(seed)
    xs = sample_points(setup.set, n_samples, rng)
    rhs = report.eps + 2.0 * report.delta_tilde + model.delta + report.noise_average
    worst = -np.inf
    for x in xs:
        acc = sum(model.psi(x, rec.y) / rec.L for rec in report.trace)
        lhs = -acc / report.S_N
        worst = max(worst, lhs - rhs)
    return worst <= tol, worst


def vi_gap_certificate(problem: VIProblem, y_tilde: np.ndarray,
                       n_starts: int = 16, seed: int = 0) -> tuple[float, bool]:
    """max over the set of <G(x), y_tilde - x>, the dual (weak) gap.

    Exact for affine fields with skew-symmetric linear part (matrix games,
    constant fields): the inner problem is then linear.  Monotone affine
    fields give a concave inner problem solved by projected ascent; the
    value is reported with exact = False.
    """
    set_ = problem.set
    if problem.affine_M is not None:
        M, c = problem.affine_M, problem.affine_c
        sym = 0.5 * (M + M.T)
        if np.max(np.abs(sym)) <= 1e-12:
            # <Mx + c, y - x> = <M'y - c, x> + <c, y> for skew M
            lin = M.T @ y_tilde - c
            _, mn = linear_minimize(set_, -lin)
            return float(-mn + c @ y_tilde), True
        # monotone affine: concave maximization by multi-start projected ascent
        rng = np.random.default_rng(seed)
        starts = sample_points(set_, n_starts, rng)
        step = 1.0 / max(np.linalg.norm(sym, 2), 1e-12)
        best = -np.inf
        for x0 in starts:
            x = x0.copy()
            for _ in range(2000):
                g = M.T @ y_tilde - (M + M.T) @ x - c  # grad of <Mx+c, y~-x> in x
                x_new = set_.project(x + step * g)
                if np.linalg.norm(x_new - x) <= 1e-12:
                    x = x_new
                    break
                x = x_new
            val = float((M @ x + c) @ (y_tilde - x))
            best = max(best, val)
        return best, False
    raise ValueError("gap certificate needs an affine operator description")


def saddle_gap(game: MatrixGame, u_tilde: np.ndarray, v_tilde: np.ndarray) -> float:
    """max_v u~'Av - min_u u'Av~ for a bilinear game over simplices."""
    payoff_v = game.A.T @ u_tilde
    payoff_u = game.A @ v_tilde
    return float(np.max(payoff_v) - np.min(payoff_u))

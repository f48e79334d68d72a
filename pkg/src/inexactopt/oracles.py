"""Inexact model oracles and validation against the model definitions.

An oracle evaluates a possibly perturbed objective value f_delta and builds
the model linearization psi(., x) at a query point, with declared bounds
(delta, Delta, L, mu).  Perturbations are deterministic functions of a seed
and the query point: the gradient error sits exactly on the boundary of its
norm ball and the value error is a hashed fraction of delta, so theorem
inequalities are exercised at their declared magnitudes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import AnySetup, LinearModel, bregman, sample_points
from .problems import CompositeQuadL1, ProblemSpec


@dataclass(frozen=True)
class ModelParams:
    """Declared inexactness bounds of a model oracle."""

    delta: float = 0.0
    Delta: float = 0.0
    L: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        vals = (self.delta, self.Delta, self.L, self.mu)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("model parameters must be finite")
        if self.delta < 0 or self.Delta < 0 or self.mu < 0 or self.L <= 0:
            raise ValueError("need delta, Delta, mu >= 0 and L > 0")
        if self.mu > self.L:
            raise ValueError("mu <= L required")


def _hash_rng(seed: int, *arrays: np.ndarray) -> np.random.Generator:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return np.random.default_rng(int.from_bytes(h.digest(), "big"))


def _hash_unit(seed: int, *arrays: np.ndarray) -> float:
    """Deterministic u in [0, 1] from seed and array contents."""
    return float(_hash_rng(seed, *arrays).uniform())


def perturb_gradient(g: np.ndarray, Delta: float, seed: int,
                     norm: str = "l2") -> np.ndarray:
    """g plus an error of dual norm exactly Delta, direction hashed from (g, seed)."""
    g = np.asarray(g, dtype=float)
    if Delta < 0:
        raise ValueError("Delta must be nonnegative")
    if Delta == 0.0:
        return g.copy()
    e = _hash_rng(seed, g).standard_normal(g.size)
    if norm == "l2":
        e *= Delta / np.linalg.norm(e)
    elif norm == "l1":
        # dual of l1 is l-infinity
        e *= Delta / np.max(np.abs(e))
    else:
        raise ValueError(f"unsupported norm {norm!r}")
    return g + e


def perturb_value(f_val: float, delta: float, seed: int) -> float:
    """Value in [f_val - delta, f_val], deterministic in (f_val, delta, seed)."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0.0:
        return float(f_val)
    u = _hash_unit(seed, np.array([f_val, delta]))
    return float(f_val) - delta * u


class ModelOracle:
    """Evaluator pair (f_delta, psi) with declared parameters.

    ``model_at(x)`` returns the linearization psi(., x) used by the prox
    subproblems; ``model(y, x)`` evaluates it directly.  psi(x, x) = 0 by
    construction for every constructor here.
    """

    def __init__(self, value_fn: Callable[[np.ndarray], float],
                 model_at: Callable[[np.ndarray], LinearModel],
                 params: ModelParams,
                 exact_value_fn: Callable[[np.ndarray], float] | None = None):
        self.value_fn = value_fn
        self._model_at = model_at
        self.params = params
        self.exact_value_fn = exact_value_fn

    def f_delta(self, x: np.ndarray) -> float:
        return self.value_fn(x)

    def model_at(self, x: np.ndarray) -> LinearModel:
        return self._model_at(x)

    def model(self, y: np.ndarray, x: np.ndarray) -> float:
        return self._model_at(x)(y)


def standard_model(problem: ProblemSpec, x: np.ndarray) -> LinearModel:
    """psi(y, x) = <grad f(x), y - x> for the problem's (sub)gradient."""
    return LinearModel(base=np.asarray(x, dtype=float), grad=problem.grad(x))


def composite_model(problem: ProblemSpec, x: np.ndarray, grad_perturbation: float = 0.0,
                    seed: int = 0) -> LinearModel:
    """psi(y, x) = <g~(x), y - x> + h(y) - h(x) for composite objectives.

    The smooth gradient is perturbed on the boundary of the ball of radius
    ``grad_perturbation``; h is the l1 part.
    """
    if not isinstance(problem.objective, CompositeQuadL1):
        raise TypeError("composite_model requires a composite objective")
    g = problem.objective.smooth_grad(x)
    g = perturb_gradient(g, grad_perturbation, seed if seed is not None else 0)
    return LinearModel(base=np.asarray(x, dtype=float), grad=g,
                       l1_weight=problem.objective.l1_weight)


def exact_oracle(problem: ProblemSpec, L: float, mu: float = 0.0) -> ModelOracle:
    """Exact values and exact standard (or composite) model: delta = Delta = 0."""
    params = ModelParams(delta=0.0, Delta=0.0, L=L, mu=mu)
    if isinstance(problem.objective, CompositeQuadL1):
        def model_at(x, _p=problem):
            return composite_model(_p, x)
    else:
        def model_at(x, _p=problem):
            return standard_model(_p, x)
    return ModelOracle(value_fn=problem.value, model_at=model_at, params=params,
                       exact_value_fn=problem.value)


def perturbed_oracle(problem: ProblemSpec, L: float, delta: float, Delta: float,
                     seed: int, mu: float = 0.0,
                     respect_lower: bool = True) -> ModelOracle:
    """Oracle with boundary-magnitude value and gradient perturbations.

    With ``respect_lower`` (the default) the gradient error component along
    the direction of the known optimum is budget-clipped so the constructed
    oracle still satisfies the lower model inequality at x_star; the error
    keeps dual norm exactly Delta by re-spreading mass in the orthogonal
    complement.  Without a reference optimum the raw boundary perturbation
    is used.
    """
    params = ModelParams(delta=delta, Delta=Delta, L=L, mu=mu)
    ref = problem.reference

    def value_fn(x, _p=problem, _d=delta, _s=seed):
        f = _p.value(x)
        if _d == 0.0:
            return f
        return f - _d * _hash_unit(_s, x)

    def model_at(x, _p=problem, _D=Delta, _s=seed, _mu=mu, _d=delta):
        g = _p.grad(x)
        if _D == 0.0:
            return LinearModel(base=x, grad=g)
        e = _hash_rng(_s, x).standard_normal(g.size)
        e *= _D / np.linalg.norm(e)
        if respect_lower and ref is not None:
            d = ref.x_star - x
            nd = np.linalg.norm(d)
            if nd > 1e-14:
                u = d / nd
                gap = _p.value(ref.x_star) - _p.value(x) - float(g @ d) - _mu * 0.5 * nd ** 2
                budget = 0.5 * max(gap, 0.0) / nd  # allowed <e, u> per unit distance
                along = float(e @ u)
                if along > budget:
                    # clip the component toward x_star, re-normalize off that axis
                    e_perp = e - along * u
                    np_norm = np.linalg.norm(e_perp)
                    if np_norm < 1e-14:
                        r = _hash_rng(_s + 7, x).standard_normal(g.size)
                        e_perp = r - float(r @ u) * u
                        np_norm = np.linalg.norm(e_perp)
                    keep = min(along, budget)
                    scale = np.sqrt(max(_D ** 2 - keep ** 2, 0.0)) / np_norm
                    e = keep * u + scale * e_perp
        return LinearModel(base=x, grad=g + e)

    return ModelOracle(value_fn=value_fn, model_at=model_at, params=params,
                       exact_value_fn=problem.value)


@dataclass
class Violation:
    x: np.ndarray
    y: np.ndarray
    side: str
    residual: float


@dataclass
class ValidationReport:
    checked_pairs: int
    violations: list[Violation]
    worst_residual: float

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_model(setup: AnySetup, oracle: ModelOracle,
                   reference_f: Callable[[np.ndarray], float],
                   sample_count: int = 1000, seed: int = 0,
                   tol: float = 1e-9, x_star: np.ndarray | None = None,
                   sample_scale: float = 1.0) -> ValidationReport:
    """Sample pairs (x, y) and report violations of the model definition.

    Checks the two-sided sandwich: lower f_delta(x) + psi(y,x) <= f(y), and
    upper f(y) <= f_delta(x) + psi(y,x) + delta + Delta ||y-x|| + L V(y,x).
    With mu > 0 the lower check is replaced by the optimum-anchored
    inequality at x_star (which then must be supplied).
    """
    p = oracle.params
    rng = np.random.default_rng(seed)
    xs = sample_points(setup.set, sample_count, rng, scale=sample_scale)
    ys = sample_points(setup.set, sample_count, rng, scale=sample_scale)
    violations: list[Violation] = []
    worst = 0.0
    for x, y in zip(xs, ys):
        fx_d = oracle.f_delta(x)
        model = oracle.model_at(x)
        psi_yx = model(y)
        fy = reference_f(y)
        up = fx_d + psi_yx + p.delta + p.Delta * setup.norm_primal(y - x) \
            + p.L * bregman(setup, y, x)
        r_up = fy - up
        if r_up > tol:
            violations.append(Violation(x=x, y=y, side="upper", residual=r_up))
        worst = max(worst, r_up)
        if p.mu == 0.0:
            r_lo = fx_d + psi_yx - fy
            if r_lo > tol:
                violations.append(Violation(x=x, y=y, side="lower", residual=r_lo))
            worst = max(worst, r_lo)
        elif x_star is not None:
            lhs = fx_d + model(x_star) + p.mu * bregman(setup, x_star, x)
            r_lo = lhs - reference_f(x_star)
            if r_lo > tol:
                violations.append(Violation(x=x, y=x_star, side="lower-at-optimum",
                                            residual=r_lo))
            worst = max(worst, r_lo)
    return ValidationReport(checked_pairs=sample_count, violations=violations,
                            worst_residual=worst)

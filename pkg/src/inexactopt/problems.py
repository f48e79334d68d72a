"""Test-problem descriptors with reference optima from independent oracles.

Each problem bundles an objective, optional affine constraints, a simple
domain (used both as the prox feasible set and for reference computations)
and, when derivable, a reference optimum.  Reference optima come from
methods unrelated to the solvers under test: dense linear algebra for
quadratics, the HiGHS LP solver for max-affine objectives and matrix games,
cyclic coordinate minimization for l1 composites, closed forms for norm
objectives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .geometry import FeasibleSet, GeometryError

_KINDS = ("quadratic", "max-affine", "composite", "matrix-game", "homogeneous-norm-constrained")


@dataclass(frozen=True)
class Quadratic:
    """f(x) = 0.5 x'Qx - b'x with Q symmetric positive semidefinite."""

    Q: np.ndarray
    b: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.Q @ x)) - float(self.b @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ x - self.b

    def smoothness(self) -> float:
        return float(np.linalg.eigvalsh(self.Q)[-1])

    def strong_convexity(self) -> float:
        return float(np.linalg.eigvalsh(self.Q)[0])


@dataclass(frozen=True)
class MaxAffine:
    """f(x) = max_i <a_i, x> + b_i; subgradient = row of the lowest active index."""

    A: np.ndarray
    b: np.ndarray

    def value(self, x: np.ndarray) -> float:
        return float(np.max(self.A @ x + self.b))

    def grad(self, x: np.ndarray) -> np.ndarray:
        vals = self.A @ x + self.b
        # argmax takes the first occurrence: lowest active index at ties
        return self.A[int(np.argmax(vals))].copy()

    def jump_bound(self) -> float:
        """Subdifferential-jump bound: the l2 diameter of the active-gradient set."""
        diffs = self.A[:, None, :] - self.A[None, :, :]
        return float(np.max(np.linalg.norm(diffs, axis=2)))


@dataclass(frozen=True)
class CompositeQuadL1:
    """f = g + h with smooth quadratic g and h(x) = weight * ||x||_1."""

    quad: Quadratic
    l1_weight: float

    def value(self, x: np.ndarray) -> float:
        return self.quad.value(x) + self.l1_weight * float(np.sum(np.abs(x)))

    def smooth_value(self, x: np.ndarray) -> float:
        return self.quad.value(x)

    def smooth_grad(self, x: np.ndarray) -> np.ndarray:
        return self.quad.grad(x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.quad.grad(x) + self.l1_weight * np.sign(x)


@dataclass(frozen=True)
class EuclideanNorm:
    """f(x) = ||x||_2, positively homogeneous with gamma0 = gamma1 = 1."""

    def value(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        n = np.linalg.norm(x)
        if n == 0.0:
            return np.zeros_like(x)
        return x / n


Objective = Quadratic | MaxAffine | CompositeQuadL1 | EuclideanNorm


@dataclass(frozen=True)
class AffineConstraint:
    """g(x) = <a, x> + c, feasible when g(x) <= 0."""

    a: np.ndarray
    c: float

    def value(self, x: np.ndarray) -> float:
        return float(self.a @ x) + self.c

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.a


@dataclass(frozen=True)
class ReferenceOptimum:
    x_star: np.ndarray
    f_star: float


@dataclass(frozen=True)
class MatrixGame:
    """Bilinear saddle problem u'Av on simplex x simplex (u minimizes)."""

    A: np.ndarray

    def payoff(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ (self.A @ v))

    def operator(self, x: np.ndarray) -> np.ndarray:
        """Monotone VI field (grad_u, -grad_v) stacked."""
        n1 = self.A.shape[0]
        u, v = x[:n1], x[n1:]
        return np.concatenate([self.A @ v, -(self.A.T @ u)])


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    objective: Objective | MatrixGame
    domain: FeasibleSet
    constraints: tuple[AffineConstraint, ...] = ()
    reference: ReferenceOptimum | None = None
    lipschitz_f: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.reference is not None and self.kind != "matrix-game":
            x = self.reference.x_star
            if not self.domain.contains(x, tol=1e-9):
                raise ValueError("reference optimum is not feasible to 1e-9")

    def value(self, x: np.ndarray) -> float:
        return self.objective.value(x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.objective.grad(x)

    def constraint_max(self, x: np.ndarray) -> float:
        if not self.constraints:
            return -np.inf
        return max(c.value(x) for c in self.constraints)

    def constraint_grad(self, x: np.ndarray) -> tuple[int, np.ndarray]:
        """Subgradient of max_i g_i at x: lowest index attaining the max."""
        vals = [c.value(x) for c in self.constraints]
        i = int(np.argmax(vals))
        return i, self.constraints[i].grad(x)


# ---------------------------------------------------------------------------
# independent reference oracles
# ---------------------------------------------------------------------------

def max_affine_optimum_over_box(A: np.ndarray, b: np.ndarray,
                                lo: np.ndarray, hi: np.ndarray) -> ReferenceOptimum:
    """min over the box of max_i <a_i,x>+b_i as an LP (epigraph form, HiGHS)."""
    m, n = A.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([A, -np.ones((m, 1))])
    bounds = [(float(l), float(h)) for l, h in zip(lo, hi)] + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=-b, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"reference LP failed: {res.message}")
    x = res.x[:n]
    return ReferenceOptimum(x_star=x, f_star=float(np.max(A @ x + b)))


def composite_optimum(comp: CompositeQuadL1, sweeps: int = 20_000,
                      tol: float = 1e-14) -> ReferenceOptimum:
    """Cyclic exact coordinate minimization for 0.5x'Qx - b'x + w||x||_1."""
    Q, b, w = comp.quad.Q, comp.quad.b, comp.l1_weight
    n = b.size
    x = np.zeros(n)
    qd = np.diag(Q).copy()
    if np.any(qd <= 0):
        raise ValueError("coordinate oracle needs positive diagonal")
    for _ in range(sweeps):
        delta = 0.0
        for i in range(n):
            r = b[i] - Q[i] @ x + qd[i] * x[i]
            new = np.sign(r) * max(abs(r) - w, 0.0) / qd[i]
            delta = max(delta, abs(new - x[i]))
            x[i] = new
        if delta < tol:
            break
    return ReferenceOptimum(x_star=x, f_star=comp.value(x))


def matrix_game_value(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Equilibrium of the zero-sum game min_u max_v u'Av via two LPs."""
    n1, n2 = A.shape
    shift = float(np.min(A)) - 1.0
    B = A - shift  # strictly positive payoffs

    # row player (minimizer of u'Bv): min_u max_j (B'u)_j
    c = np.zeros(n1 + 1)
    c[-1] = 1.0
    A_ub = np.hstack([B.T, -np.ones((n2, 1))])
    A_eq = np.hstack([np.ones((1, n1)), np.zeros((1, 1))])
    res_u = linprog(c, A_ub=A_ub, b_ub=np.zeros(n2), A_eq=A_eq, b_eq=[1.0],
                    bounds=[(0, None)] * n1 + [(None, None)], method="highs")
    if not res_u.success:
        raise RuntimeError(f"game LP (row) failed: {res_u.message}")
    u = res_u.x[:n1]

    # column player: max_v min_i (Bv)_i
    c2 = np.zeros(n2 + 1)
    c2[-1] = -1.0
    A_ub2 = np.hstack([-B, np.ones((n1, 1))])
    A_eq2 = np.hstack([np.ones((1, n2)), np.zeros((1, 1))])
    res_v = linprog(c2, A_ub=A_ub2, b_ub=np.zeros(n1), A_eq=A_eq2, b_eq=[1.0],
                    bounds=[(0, None)] * n2 + [(None, None)], method="highs")
    if not res_v.success:
        raise RuntimeError(f"game LP (column) failed: {res_v.message}")
    v = res_v.x[:n2]
    value = float(res_u.x[-1]) + shift
    return u, v, value


# ---------------------------------------------------------------------------
# seeded generation
# ---------------------------------------------------------------------------

def generate_problem(kind: str, dim: int, seed: int, **opts) -> ProblemSpec:
    """Deterministic seeded instance with an attached reference optimum."""
    rng = np.random.default_rng(seed)
    if kind == "quadratic":
        eig_lo = float(opts.get("eig_lo", 0.1))
        eig_hi = float(opts.get("eig_hi", 10.0))
        M = rng.standard_normal((dim, dim))
        Qmat, _ = np.linalg.qr(M)
        eigs = np.sort(rng.uniform(eig_lo, eig_hi, size=dim))
        Q = Qmat @ np.diag(eigs) @ Qmat.T
        Q = 0.5 * (Q + Q.T)
        b = rng.standard_normal(dim)
        x_star = np.linalg.solve(Q, b)
        quad = Quadratic(Q=Q, b=b)
        return ProblemSpec(kind="quadratic", objective=quad,
                           domain=FeasibleSet.whole_space(dim),
                           reference=ReferenceOptimum(x_star, quad.value(x_star)),
                           seed=seed)
    if kind == "max-affine":
        m = int(opts.get("terms", 10))
        scale = float(opts.get("scale", 0.3))
        A = rng.standard_normal((m, dim)) * scale
        b = rng.standard_normal(m) * scale
        lo = -np.ones(dim)
        hi = np.ones(dim)
        ref = max_affine_optimum_over_box(A, b, lo, hi)
        obj = MaxAffine(A=A, b=b)
        return ProblemSpec(kind="max-affine", objective=obj,
                           domain=FeasibleSet.box(lo, hi), reference=ref, seed=seed,
                           lipschitz_f=float(np.max(np.linalg.norm(A, axis=1))))
    if kind == "composite":
        eigs = np.sort(rng.uniform(0.5, 4.0, size=dim))
        M = rng.standard_normal((dim, dim))
        Qmat, _ = np.linalg.qr(M)
        Q = Qmat @ np.diag(eigs) @ Qmat.T
        Q = 0.5 * (Q + Q.T)
        b = rng.standard_normal(dim)
        comp = CompositeQuadL1(quad=Quadratic(Q=Q, b=b),
                               l1_weight=float(opts.get("l1_weight", 0.5)))
        ref = composite_optimum(comp)
        return ProblemSpec(kind="composite", objective=comp,
                           domain=FeasibleSet.whole_space(dim), reference=ref, seed=seed)
    if kind == "matrix-game":
        n2 = int(opts.get("cols", dim))
        if opts.get("identity", False):
            A = np.eye(dim)
        else:
            A = rng.uniform(-1.0, 1.0, size=(dim, n2))
        game = MatrixGame(A=A)
        u, v, val = matrix_game_value(A)
        ref = ReferenceOptimum(x_star=np.concatenate([u, v]), f_star=val)
        domain = FeasibleSet.product(FeasibleSet.simplex(A.shape[0]),
                                     FeasibleSet.simplex(A.shape[1]))
        return ProblemSpec(kind="matrix-game", objective=game, domain=domain,
                           reference=ref, seed=seed)
    if kind == "homogeneous-norm-constrained":
        a = rng.standard_normal(dim)
        a /= np.linalg.norm(a)
        level = float(opts.get("level", 1.0))
        # min ||x|| s.t. <a,x> >= level: x* = level * a
        constraint = AffineConstraint(a=-a, c=level)
        x_star = level * a
        return ProblemSpec(kind="homogeneous-norm-constrained",
                           objective=EuclideanNorm(),
                           domain=FeasibleSet.whole_space(dim),
                           constraints=(constraint,),
                           reference=ReferenceOptimum(x_star, float(level)),
                           lipschitz_f=1.0, seed=seed)
    raise ValueError(f"unknown problem kind {kind!r}")


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=float).ravel().tolist()


def _set_to_json(s: FeasibleSet) -> dict:
    d: dict = {"kind": s.kind, "dim": s.dim}
    if s.kind == "box":
        d["lo"] = _arr(s.lo)
        d["hi"] = _arr(s.hi)
    elif s.kind == "euclidean-ball":
        d["center"] = _arr(s.center)
        d["radius"] = s.radius
    elif s.kind == "halfspace-intersection":
        d["rows"] = [{"a": _arr(a), "b": b} for a, b in s.halfspaces]
    elif s.kind == "product":
        d["blocks"] = [_set_to_json(b) for b in s.blocks]
    return d


def _set_from_json(d: dict) -> FeasibleSet:
    k = d["kind"]
    if k == "whole-space":
        return FeasibleSet.whole_space(d["dim"])
    if k == "box":
        return FeasibleSet.box(d["lo"], d["hi"])
    if k == "euclidean-ball":
        return FeasibleSet.ball(d["center"], d["radius"])
    if k == "standard-simplex":
        return FeasibleSet.simplex(d["dim"])
    if k == "halfspace-intersection":
        return FeasibleSet.halfspace_intersection([(r["a"], r["b"]) for r in d["rows"]])
    if k == "product":
        return FeasibleSet.product(*[_set_from_json(b) for b in d["blocks"]])
    raise GeometryError(f"unknown set kind {k!r}")


def problem_to_json(p: ProblemSpec) -> str:
    obj = p.objective
    d: dict = {"kind": p.kind, "seed": p.seed, "domain": _set_to_json(p.domain)}
    if isinstance(obj, Quadratic):
        d["objective"] = {"type": "quadratic", "n": obj.b.size, "Q": _arr(obj.Q), "b": _arr(obj.b)}
    elif isinstance(obj, MaxAffine):
        d["objective"] = {"type": "max-affine", "m": obj.A.shape[0], "n": obj.A.shape[1],
                          "A": _arr(obj.A), "b": _arr(obj.b)}
    elif isinstance(obj, CompositeQuadL1):
        d["objective"] = {"type": "composite", "n": obj.quad.b.size, "Q": _arr(obj.quad.Q),
                          "b": _arr(obj.quad.b), "l1_weight": obj.l1_weight}
    elif isinstance(obj, MatrixGame):
        d["objective"] = {"type": "matrix-game", "n1": obj.A.shape[0], "n2": obj.A.shape[1],
                          "A": _arr(obj.A)}
    elif isinstance(obj, EuclideanNorm):
        d["objective"] = {"type": "euclidean-norm"}
    else:
        raise TypeError(f"cannot serialize objective {type(obj)}")
    d["constraints"] = [{"a": _arr(c.a), "c": c.c} for c in p.constraints]
    if p.reference is not None:
        d["reference"] = {"x_star": _arr(p.reference.x_star), "f_star": p.reference.f_star}
    if p.lipschitz_f is not None:
        d["lipschitz_f"] = p.lipschitz_f
    return json.dumps(d, sort_keys=True, indent=2)


def problem_from_json(text: str) -> ProblemSpec:
    d = json.loads(text)
    o = d["objective"]
    t = o["type"]
    if t == "quadratic":
        n = o["n"]
        obj: Objective | MatrixGame = Quadratic(Q=np.array(o["Q"]).reshape(n, n), b=np.array(o["b"]))
    elif t == "max-affine":
        obj = MaxAffine(A=np.array(o["A"]).reshape(o["m"], o["n"]), b=np.array(o["b"]))
    elif t == "composite":
        n = o["n"]
        obj = CompositeQuadL1(quad=Quadratic(Q=np.array(o["Q"]).reshape(n, n), b=np.array(o["b"])),
                              l1_weight=o["l1_weight"])
    elif t == "matrix-game":
        obj = MatrixGame(A=np.array(o["A"]).reshape(o["n1"], o["n2"]))
    elif t == "euclidean-norm":
        obj = EuclideanNorm()
    else:
        raise ValueError(f"unknown objective type {t!r}")
    ref = None
    if "reference" in d:
        ref = ReferenceOptimum(x_star=np.array(d["reference"]["x_star"]),
                               f_star=d["reference"]["f_star"])
    cons = tuple(AffineConstraint(a=np.array(c["a"]), c=c["c"]) for c in d["constraints"])
    return ProblemSpec(kind=d["kind"], objective=obj, domain=_set_from_json(d["domain"]),
                       constraints=cons, reference=ref,
                       lipschitz_f=d.get("lipschitz_f"), seed=d.get("seed"))

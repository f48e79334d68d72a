"""Feasible sets, prox functions and Bregman machinery shared by every solver.

A prox setup couples a norm, a distance-generating function and a feasible
set.  Two concrete pairings are supported:

* ``squared-euclidean`` with the l2 norm, on any of the supported sets;
* ``negative-entropy`` with the l1 norm, on the standard simplex only
  (the classical multiplicative-weights geometry).

Both generating functions are 1-strongly convex with respect to their norm
(Pinsker's inequality covers the entropy case), which is what the step-size
and stopping arithmetic of the solvers relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

FEAS_TOL = 1e-12
ENTROPY_CLIP = 1e-15

WHOLE_SPACE = "whole-space"
BOX = "box"
BALL = "euclidean-ball"
SIMPLEX = "standard-simplex"
HALFSPACES = "halfspace-intersection"
PRODUCT = "product"

SQ_EUCLID = "squared-euclidean"
NEG_ENTROPY = "negative-entropy"


class GeometryError(ValueError):
    """Invalid set/prox combination or precondition violation."""


class UnboundedSetError(GeometryError):
    """Operation requires a bounded feasible set."""


class ProxConvergenceError(RuntimeError):
    """Inner prox subproblem failed to reach the requested residual."""


@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex feasible set, one of a few simple kinds.

    ``halfspace-intersection`` sets are probed for nonemptiness at
    construction; the other kinds are nonempty by construction.
    """

    kind: str
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float = 0.0
    halfspaces: tuple[tuple[np.ndarray, float], ...] = ()
    blocks: tuple["FeasibleSet", ...] = ()

    @staticmethod
    def whole_space(dim: int) -> "FeasibleSet":
        return FeasibleSet(WHOLE_SPACE, dim)

    @staticmethod
    def box(lo, hi) -> "FeasibleSet":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise GeometryError("box bounds must be 1-d arrays of equal length")
        if np.any(lo > hi):
            raise GeometryError("empty box: lo > hi somewhere")
        return FeasibleSet(BOX, lo.size, lo=lo, hi=hi)

    @staticmethod
    def ball(center, radius: float) -> "FeasibleSet":
        center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise GeometryError("ball radius must be positive")
        return FeasibleSet(BALL, center.size, center=center, radius=float(radius))

    @staticmethod
    def simplex(dim: int) -> "FeasibleSet":
        if dim < 1:
            raise GeometryError("simplex dimension must be >= 1")
        return FeasibleSet(SIMPLEX, dim)

    @staticmethod
    def halfspace_intersection(constraints) -> "FeasibleSet":
        rows = tuple((np.asarray(a, dtype=float), float(b)) for a, b in constraints)
        if not rows:
            raise GeometryError("need at least one halfspace")
        dim = rows[0][0].size
        A = np.vstack([a for a, _ in rows])
        b = np.array([c for _, c in rows])
        # feasibility probe: any point with Ax <= b
        res = linprog(np.zeros(dim), A_ub=A, b_ub=b, bounds=[(None, None)] * dim,
                      method="highs")
        if not res.success:
            raise GeometryError("halfspace intersection appears to be empty")
        return FeasibleSet(HALFSPACES, dim, halfspaces=rows)

    @staticmethod
    def product(*blocks: "FeasibleSet") -> "FeasibleSet":
        if not blocks:
            raise GeometryError("product needs at least one block")
        dim = sum(s.dim for s in blocks)
        return FeasibleSet(PRODUCT, dim, blocks=tuple(blocks))

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        """Split a stacked vector into per-block pieces (product sets only)."""
        if self.kind != PRODUCT:
            raise GeometryError("split() only meaningful for product sets")
        out, i = [], 0
        for s in self.blocks:
            out.append(x[i:i + s.dim])
            i += s.dim
        return out

    def contains(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise GeometryError(f"dimension mismatch: expected {self.dim}, got {x.shape}")
        if self.kind == WHOLE_SPACE:
            return bool(np.all(np.isfinite(x)))
        if self.kind == BOX:
            return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))
        if self.kind == BALL:
            return bool(np.linalg.norm(x - self.center) <= self.radius + tol)
        if self.kind == SIMPLEX:
            return bool(np.all(x >= -tol) and abs(float(np.sum(x)) - 1.0) <= tol * self.dim + tol)
        if self.kind == HALFSPACES:
            return all(float(a @ x) <= b + tol for a, b in self.halfspaces)
        if self.kind == PRODUCT:
            return all(s.contains(p, tol) for s, p in zip(self.blocks, self.split(x)))
        raise GeometryError(f"unknown set kind {self.kind!r}")

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the set (used by inner solvers and samplers)."""
        x = np.asarray(x, dtype=float)
        if self.kind == WHOLE_SPACE:
            return x
        if self.kind == BOX:
            return np.clip(x, self.lo, self.hi)
        if self.kind == BALL:
            d = x - self.center
            nrm = np.linalg.norm(d)
            if nrm <= self.radius:
                return x
            return self.center + d * (self.radius / nrm)
        if self.kind == SIMPLEX:
            return project_simplex(x)
        if self.kind == PRODUCT:
            return np.concatenate([s.project(p) for s, p in zip(self.blocks, self.split(x))])
        raise GeometryError(f"no projection implemented for {self.kind!r}")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    cond = u + (1.0 - css) / k > 0
    rho = int(np.nonzero(cond)[0][-1])
    lam = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


@dataclass(frozen=True)
class ProxSetup:
    """Norm + distance-generating function + feasible set.

    The declared pairings keep the generating function 1-strongly convex
    w.r.t. the declared norm on the set: ``squared-euclidean`` with l2,
    ``negative-entropy`` with l1 on the standard simplex.
    """

    norm: str
    prox_fn: str
    set: FeasibleSet

    def __post_init__(self):
        if self.norm not in ("l1", "l2"):
            raise GeometryError(f"unsupported norm {self.norm!r}")
        if self.prox_fn not in (SQ_EUCLID, NEG_ENTROPY):
            raise GeometryError(f"unsupported prox function {self.prox_fn!r}")
        if self.prox_fn == NEG_ENTROPY and self.set.kind != SIMPLEX:
            raise GeometryError("negative-entropy prox requires the standard simplex")
        if self.prox_fn == NEG_ENTROPY and self.norm != "l1":
            raise GeometryError("negative-entropy prox is 1-strongly convex w.r.t. l1 only")
        if self.prox_fn == SQ_EUCLID and self.norm != "l2":
            raise GeometryError("squared-euclidean prox is paired with the l2 norm")

    @staticmethod
    def euclidean(set_: FeasibleSet) -> "ProxSetup":
        return ProxSetup("l2", SQ_EUCLID, set_)

    @staticmethod
    def entropy(dim: int) -> "ProxSetup":
        return ProxSetup("l1", NEG_ENTROPY, FeasibleSet.simplex(dim))

    @staticmethod
    def product(*setups: "ProxSetup") -> "ProductProxSetup":
        return ProductProxSetup(setups=tuple(setups))

    # -- norms ------------------------------------------------------------

    def norm_primal(self, v: np.ndarray) -> float:
        if self.norm == "l2":
            return float(np.linalg.norm(v))
        return float(np.sum(np.abs(v)))

    def norm_dual(self, g: np.ndarray) -> float:
        if self.norm == "l2":
            return float(np.linalg.norm(g))
        return float(np.max(np.abs(g))) if g.size else 0.0

    # -- generating function ----------------------------------------------

    def potential(self, x: np.ndarray) -> float:
        """d(x), shifted so that min over the set is 0 for the entropy case."""
        if self.prox_fn == SQ_EUCLID:
            return 0.5 * float(x @ x)
        xc = np.maximum(x, ENTROPY_CLIP)
        return float(np.sum(xc * np.log(xc))) + np.log(self.set.dim)

    def prox_center(self) -> np.ndarray:
        """argmin of the generating function over the set."""
        s = self.set
        if self.prox_fn == NEG_ENTROPY:
            return np.full(s.dim, 1.0 / s.dim)
        if s.kind in (WHOLE_SPACE, BOX, BALL, SIMPLEX):
            return s.project(np.zeros(s.dim))
        raise GeometryError(f"prox center not available for {s.kind!r}")


@dataclass(frozen=True)
class ProductProxSetup:
    """Blockwise product of prox setups.

    Uses the product norm sqrt(sum of squared block norms); the Bregman
    divergence, prox steps and diameter bounds all decompose blockwise.
    """

    setups: tuple[ProxSetup, ...]

    @property
    def set(self) -> FeasibleSet:
        return FeasibleSet.product(*(s.set for s in self.setups))

    @property
    def norm(self) -> str:
        return "product"

    @property
    def prox_fn(self) -> str:
        return "product"

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        out, i = [], 0
        for s in self.setups:
            out.append(x[i:i + s.set.dim])
            i += s.set.dim
        return out

    def norm_primal(self, v: np.ndarray) -> float:
        return float(np.sqrt(sum(s.norm_primal(p) ** 2 for s, p in zip(self.setups, self.split(v)))))

    def norm_dual(self, g: np.ndarray) -> float:
        return float(np.sqrt(sum(s.norm_dual(p) ** 2 for s, p in zip(self.setups, self.split(g)))))

    def potential(self, x: np.ndarray) -> float:
        return sum(s.potential(p) for s, p in zip(self.setups, self.split(x)))

    def prox_center(self) -> np.ndarray:
        return np.concatenate([s.prox_center() for s in self.setups])


AnySetup = ProxSetup | ProductProxSetup


def bregman(setup: AnySetup, y: np.ndarray, x: np.ndarray) -> float:
    """Bregman divergence V(y, x) = d(y) - d(x) - <grad d(x), y - x>.

    Squared-euclidean gives 0.5 * ||y - x||_2^2; negative entropy gives the
    generalized KL sum (plain KL when both points lie on the simplex).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape:
        raise GeometryError("dimension mismatch in bregman()")
    if isinstance(setup, ProductProxSetup):
        return sum(bregman(s, yp, xp) for s, yp, xp in
                   zip(setup.setups, setup.split(y), setup.split(x)))
    if setup.prox_fn == SQ_EUCLID:
        d = y - x
        return 0.5 * float(d @ d)
    xc = np.maximum(x, ENTROPY_CLIP)
    yc = np.maximum(y, ENTROPY_CLIP)
    v = float(np.sum(yc * np.log(yc / xc) - yc + xc))
    return max(v, 0.0)


def bregman_grad(setup: AnySetup, y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gradient of V(., x) at y."""
    if isinstance(setup, ProductProxSetup):
        return np.concatenate([bregman_grad(s, yp, xp) for s, yp, xp in
                               zip(setup.setups, setup.split(y), setup.split(x))])
    if setup.prox_fn == SQ_EUCLID:
        return y - x
    yc = np.maximum(y, ENTROPY_CLIP)
    xc = np.maximum(x, ENTROPY_CLIP)
    return np.log(yc / xc)


def dual_norm(setup: AnySetup, g: np.ndarray) -> float:
    """Norm of a dual vector: l2 -> l2, l1 -> l-infinity."""
    return setup.norm_dual(np.asarray(g, dtype=float))


def linear_minimize(set_: FeasibleSet, c: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact minimizer of <c, x> over the set (ties broken at lowest index).

    Raises UnboundedSetError when the problem is unbounded (whole space with
    c != 0).  Used for prox residuals and gap certificates.
    """
    c = np.asarray(c, dtype=float)
    if set_.kind == WHOLE_SPACE:
        if np.allclose(c, 0.0):
            z = np.zeros(set_.dim)
            return z, 0.0
        raise UnboundedSetError("linear function unbounded below on the whole space")
    if set_.kind == BOX:
        x = np.where(c > 0, set_.lo, set_.hi)
        x = np.where(c == 0, set_.lo, x)
        return x, float(c @ x)
    if set_.kind == BALL:
        nrm = np.linalg.norm(c)
        if nrm == 0.0:
            return set_.center.copy(), float(c @ set_.center)
        x = set_.center - set_.radius * c / nrm
        return x, float(c @ x)
    if set_.kind == SIMPLEX:
        i = int(np.argmin(c))
        x = np.zeros(set_.dim)
        x[i] = 1.0
        return x, float(c[i])
    if set_.kind == HALFSPACES:
        A = np.vstack([a for a, _ in set_.halfspaces])
        b = np.array([bb for _, bb in set_.halfspaces])
        res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * set_.dim, method="highs")
        if res.status == 3:
            raise UnboundedSetError("linear minimization unbounded on halfspace set")
        if not res.success:
            raise GeometryError(f"linear minimization failed: {res.message}")
        return res.x, float(res.fun)
    if set_.kind == PRODUCT:
        xs, val, i = [], 0.0, 0
        for s in set_.blocks:
            x, v = linear_minimize(s, c[i:i + s.dim])
            xs.append(x)
            val += v
            i += s.dim
        return np.concatenate(xs), val
    raise GeometryError(f"unknown set kind {set_.kind!r}")


def prox_residual(setup: AnySetup, model, x: np.ndarray, center: np.ndarray,
                  L: float) -> float:
    """Optimality residual max_y <grad phi(x), x - y> of the prox objective.

    phi(x) = model(x) + L V(x, center).  For l1 composite parts the
    certifying subgradient is selected at zero coordinates.  Exact for sets
    with closed-form linear minimization; this is the inexact-argmin measure
    the solvers carry into their certificates.
    """
    g = model.grad + L * bregman_grad(setup, x, center)
    if getattr(model, "l1_weight", 0.0):
        w = model.l1_weight
        g = g + np.where(x != 0, np.sign(x) * w, np.clip(-g, -w, w))
    try:
        _, mn = linear_minimize(setup.set, g)
    except UnboundedSetError:
        # whole space: stationarity requires the certifying gradient to vanish
        return float(np.linalg.norm(g))
    return float(g @ x) - mn


class LinearModel:
    """psi(y) = <g, y - base> (+ h(y) - h(base) for a separable l1 part).

    The standard inexact-model linearization used by every prox subproblem;
    ``scale`` produces alpha * psi for the fast-gradient inner step.
    """

    __slots__ = ("base", "grad", "l1_weight")

    def __init__(self, base: np.ndarray, grad: np.ndarray, l1_weight: float = 0.0):
        self.base = np.asarray(base, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.l1_weight = float(l1_weight)

    def __call__(self, y: np.ndarray) -> float:
        v = float(self.grad @ (y - self.base))
        if self.l1_weight:
            v += self.l1_weight * (float(np.sum(np.abs(y))) - float(np.sum(np.abs(self.base))))
        return v

    def subgrad(self, y: np.ndarray) -> np.ndarray:
        if not self.l1_weight:
            return self.grad
        return self.grad + self.l1_weight * np.sign(y)

    def scale(self, alpha: float) -> "LinearModel":
        return LinearModel(self.base, alpha * self.grad, alpha * self.l1_weight)


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox_step(setup: AnySetup, z: np.ndarray, model: LinearModel, L: float,
              tol: float = 1e-12) -> np.ndarray:
    """argmin_x { psi(x) + L * V(x, z) } over the feasible set.

    Closed forms cover linear psi on all supported sets and linear + l1 on
    boxes / whole space with the euclidean prox; anything else falls back to
    a projected-gradient inner loop capped at 10_000 iterations.  Closed
    forms are exact (residual 0 up to rounding).
    """
    z = np.asarray(z, dtype=float)
    if L <= 0:
        raise GeometryError("prox_step needs L > 0")
    if isinstance(setup, ProductProxSetup):
        if model.l1_weight:
            raise GeometryError("composite prox not supported on product setups")
        parts_z = setup.split(z)
        parts_g = setup.split(model.grad)
        out = [prox_step(s, zp, LinearModel(zp, gp), L, tol)
               for s, zp, gp in zip(setup.setups, parts_z, parts_g)]
        return np.concatenate(out)

    s = setup.set
    if setup.prox_fn == NEG_ENTROPY:
        if model.l1_weight:
            return _prox_fallback(setup, z, model, L, tol)
        # multiplicative weights: x_i ∝ z_i exp(-g_i / L)
        logits = np.log(np.maximum(z, ENTROPY_CLIP)) - model.grad / L
        logits -= np.max(logits)
        w = np.exp(logits)
        return w / np.sum(w)

    # euclidean prox from here on
    target = z - model.grad / L
    if not model.l1_weight:
        if s.kind in (WHOLE_SPACE, BOX, BALL, SIMPLEX):
            return s.project(target)
        return _prox_fallback(setup, z, model, L, tol)
    if s.kind in (WHOLE_SPACE, BOX):
        x = _soft_threshold(target, model.l1_weight / L)
        return s.project(x)
    return _prox_fallback(setup, z, model, L, tol)


def _prox_fallback(setup: AnySetup, z: np.ndarray, model: LinearModel, L: float,
                   tol: float, cap: int = 10_000) -> np.ndarray:
    """Projected-subgradient inner loop for prox subproblems without a closed form."""
    s = setup.set
    x = s.project(z.copy())
    step0 = 1.0 / max(L, 1.0)
    best = x
    best_res = np.inf
    for t in range(1, cap + 1):
        g = model.subgrad(x) + L * bregman_grad(setup, x, z)
        x = s.project(x - step0 / np.sqrt(t) * g)
        if t % 50 == 0 or t == cap:
            res = prox_residual(setup, model, x, z, L)
            if res < best_res:
                best, best_res = x, res
            if best_res <= tol:
                return best
    if best_res > max(tol, 1e-8):
        raise ProxConvergenceError(
            f"prox subproblem stalled: residual {best_res:.3e} > tol {tol:.3e} after {cap} iterations")
    return best


def mirror_step(setup: AnySetup, x: np.ndarray, scaled_grad: np.ndarray) -> np.ndarray:
    """Mirror step Mirr_x(p): prox_step with psi(y) = <p, y - x> and L = 1."""
    return prox_step(setup, x, LinearModel(x, scaled_grad), 1.0)


def diameter_bound(setup: AnySetup, x0: np.ndarray) -> float:
    """Upper bound on max_x V(x, x0) over the set.

    Closed forms per set kind; halfspace sets get a per-coordinate LP box
    bound.  Raises UnboundedSetError when the set is unbounded.
    """
    x0 = np.asarray(x0, dtype=float)
    if isinstance(setup, ProductProxSetup):
        return sum(diameter_bound(s, p) for s, p in zip(setup.setups, setup.split(x0)))
    s = setup.set
    if not s.contains(x0, tol=1e-9):
        raise GeometryError("diameter_bound: x0 must be feasible")
    if setup.prox_fn == NEG_ENTROPY:
        # max over the simplex of KL(x || x0) is attained at a vertex
        return float(-np.log(np.maximum(np.min(x0), ENTROPY_CLIP)))
    if s.kind == WHOLE_SPACE:
        raise UnboundedSetError("unbounded set")
    if s.kind == BOX:
        span = np.maximum(np.abs(x0 - s.lo), np.abs(s.hi - x0))
        return 0.5 * float(span @ span)
    if s.kind == BALL:
        return 0.5 * (float(np.linalg.norm(x0 - s.center)) + s.radius) ** 2
    if s.kind == SIMPLEX:
        # max of a convex function over the simplex sits at a vertex
        vals = [0.5 * float((np.eye(s.dim)[i] - x0) @ (np.eye(s.dim)[i] - x0))
                for i in range(s.dim)]
        return max(vals)
    if s.kind == HALFSPACES:
        # per-coordinate LP range -> enclosing box -> box bound
        A = np.vstack([a for a, _ in s.halfspaces])
        b = np.array([bb for _, bb in s.halfspaces])
        total = 0.0
        for i in range(s.dim):
            c = np.zeros(s.dim)
            spans = []
            for sign in (1.0, -1.0):
                c[i] = sign
                res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * s.dim, method="highs")
                if res.status == 3:
                    raise UnboundedSetError("unbounded set")
                if not res.success:
                    raise GeometryError(f"diameter LP failed: {res.message}")
                spans.append(abs(res.x[i] - x0[i]))
            total += max(spans) ** 2
        return 0.5 * total
    raise GeometryError(f"unknown set kind {s.kind!r}")


def sample_points(set_: FeasibleSet, n: int, rng: np.random.Generator,
                  scale: float = 1.0) -> np.ndarray:
    """Deterministic (given rng) sample of n feasible points, rows of shape (n, dim)."""
    d = set_.dim
    if set_.kind == WHOLE_SPACE:
        return rng.standard_normal((n, d)) * scale
    if set_.kind == BOX:
        u = rng.uniform(size=(n, d))
        return set_.lo + u * (set_.hi - set_.lo)
    if set_.kind == BALL:
        g = rng.standard_normal((n, d))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        r = set_.radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
        return set_.center + g * r
    if set_.kind == SIMPLEX:
        return rng.dirichlet(np.ones(d), size=n)
    if set_.kind == HALFSPACES:
        # rejection from a diameter box around a feasible point
        A = np.vstack([a for a, _ in set_.halfspaces])
        b = np.array([bb for _, bb in set_.halfspaces])
        res = linprog(np.zeros(d), A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
        x_feas = res.x
        out = np.empty((n, d))
        got = 0
        while got < n:
            cand = x_feas + rng.standard_normal((4 * n, d)) * scale
            ok = np.all(cand @ A.T <= b + FEAS_TOL, axis=1)
            take = cand[ok][: n - got]
            out[got:got + take.shape[0]] = take
            got += take.shape[0]
            scale *= 0.8  # shrink toward the feasible anchor if acceptance is poor
        return out
    if set_.kind == PRODUCT:
        parts = [sample_points(s, n, rng, scale) for s in set_.blocks]
        return np.hstack(parts)
    raise GeometryError(f"unknown set kind {set_.kind!r}")

"""Variational problems on q,omega-lattices.

Functional evaluation, Euler-Lagrange residuals, a direct minimizer over the
truncated lattice, isoperimetric multipliers and a convexity probe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .calculus import (
    DEFAULT_CONFIG,
    IntegrationConfig,
    RealFunction,
    as_function,
    hahn_derivative,
    qomega_integral,
)
from .errors import (
    BothMultipliersZero,
    DegenerateSystem,
    MaxIterations,
    MissingNeighbor,
)
from .qcore import QLattice, QOmegaParams, build_lattice

__all__ = [
    "Lagrangian",
    "VariationalProblem",
    "IsoperimetricConstraint",
    "LatticeTrajectory",
    "TailModel",
    "SolveOptions",
    "MultiplierFit",
    "ConvexityReport",
    "TwoVariableLagrangian",
    "TwoVariableProblem",
    "NonholonomicResidual",
    "lattice_derivative",
    "evaluate_functional",
    "el_residual",
    "solve_direct",
    "isoperimetric_residual",
    "estimate_multiplier",
    "nonholonomic_residual",
    "check_joint_convexity",
]

_FD_EPS = np.finfo(float).eps ** (1.0 / 3.0)
BOUNDARY_TOL = 1e-10


def _fd_step(x):
    return _FD_EPS * np.maximum(1.0, np.abs(x))


def _vcall(fn, *args):
    """Call ``fn`` elementwise on arrays, falling back to a Python loop."""
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in args))
    try:
        out = np.asarray(fn(*arrays), dtype=float)
        return np.broadcast_to(out, arrays[0].shape).astype(float)
    except (TypeError, ValueError):
        flat = [a.ravel() for a in arrays]
        vals = [float(fn(*row)) for row in zip(*flat)]
        return np.asarray(vals, dtype=float).reshape(arrays[0].shape)


@dataclass(frozen=True)
class Lagrangian:
    """``f(t, u, v)`` with optional partials in ``u`` (``d2``) and ``v`` (``d3``).

    Missing partials are replaced by central differences with step
    ``eps**(1/3) * max(1, |arg|)``.  Callables should accept numpy arrays;
    scalar-only callables still work through a slower fallback.
    """

    f: Callable
    d2: Optional[Callable] = None
    d3: Optional[Callable] = None
    label: str = ""

    def __call__(self, t, u, v):
        return self.f(t, u, v)

    def du(self, t, u, v):
        if self.d2 is not None:
            return self.d2(t, u, v)
        h = _fd_step(u)
        return (self.f(t, u + h, v) - self.f(t, u - h, v)) / (2.0 * h)

    def dv(self, t, u, v):
        if self.d3 is not None:
            return self.d3(t, u, v)
        h = _fd_step(v)
        return (self.f(t, u, v + h) - self.f(t, u, v - h)) / (2.0 * h)

    @property
    def analytic(self) -> bool:
        return self.d2 is not None and self.d3 is not None

    def combine(self, lam0: float, other: "Lagrangian", lam: float) -> "Lagrangian":
        """``lam0 * self - lam * other``."""
        f, g = self, other
        return Lagrangian(
            lambda t, u, v: lam0 * f.f(t, u, v) - lam * g.f(t, u, v),
            lambda t, u, v: lam0 * f.du(t, u, v) - lam * g.du(t, u, v),
            lambda t, u, v: lam0 * f.dv(t, u, v) - lam * g.dv(t, u, v),
            label=f"{lam0}*[{f.label}] - {lam}*[{g.label}]",
        )

    def scaled(self, c: float) -> "Lagrangian":
        return self.combine(c, ZERO_LAGRANGIAN, 0.0)


ZERO_LAGRANGIAN = Lagrangian(
    lambda t, u, v: 0.0 * (t + u + v),
    lambda t, u, v: 0.0 * (t + u + v),
    lambda t, u, v: 0.0 * (t + u + v),
    label="0",
)


@dataclass(frozen=True)
class VariationalProblem:
    """Minimize ``int_a^b f(t, y(qt+w), D y(t)) d_{q,w}t`` with ``y(a)=alpha, y(b)=beta``."""

    lagrangian: Lagrangian
    a: float
    b: float
    alpha: float
    beta: float
    params: QOmegaParams

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")

    def lattice(self, depth: int) -> QLattice:
        return build_lattice(self.params, self.a, self.b, depth)


@dataclass(frozen=True)
class IsoperimetricConstraint:
    g: Lagrangian
    k: float


@dataclass(frozen=True)
class TailModel:
    """Quadratic continuation ``y(w0 + d) = y0 + slope*d + curvature[i]*d**2`` past the depth."""

    y0: float
    slope: float
    curvature: tuple

    def value(self, branch: int, d):
        return self.y0 + self.slope * d + self.curvature[branch] * d * d

    def derivative(self, params: QOmegaParams, branch: int, d):
        # Hahn derivative of the quadratic: D d = 1, D d**2 = (1+q) d
        return self.slope + self.curvature[branch] * (1.0 + params.q) * d


@dataclass
class LatticeTrajectory:
    """Values of ``y`` on a lattice (omega0 included).

    ``slopes`` optionally stores ``D y`` at lattice points, and ``tail`` an
    analytic continuation beyond the depth; both are produced by
    :func:`solve_direct` and avoid differencing nearly equal values.
    """

    lattice: QLattice
    values: dict
    slopes: Optional[dict] = None
    tail: Optional[TailModel] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [p for p in self.lattice.points if p not in self.values]
        if missing:
            raise ValueError(f"trajectory lacks values at {len(missing)} lattice points")

    @classmethod
    def sample(cls, lattice: QLattice, y) -> "LatticeTrajectory":
        y = as_function(y)
        return cls(lattice, {p: float(y(p)) for p in lattice.points})

    @property
    def params(self) -> QOmegaParams:
        return self.lattice.params

    def __call__(self, t):
        p = self.lattice.find(t)
        if p is None:
            raise MissingNeighbor(f"{t!r} is not a point of the trajectory lattice")
        return self.values[p]

    def pins(self, alpha: float, beta: float, tol: float = BOUNDARY_TOL) -> bool:
        a, b = self.lattice.seeds
        return abs(self(a) - alpha) <= tol and abs(self(b) - beta) <= tol


# ---------------------------------------------------------------------------
# access to y(qt+w) and D y(t) for functions and trajectories


class _FunctionPath:
    def __init__(self, params, y):
        self.params = params
        self.y = as_function(y)

    def value(self, t):
        return self.y(t)

    def u(self, t):
        if self.params.is_fixed_point(t):
            return self.y(self.params.omega0)
        return self.y(self.params.q * t + self.params.omega)

    def v(self, t):
        return hahn_derivative(self.params, self.y, t)

    def next_point(self, t):
        return self.params.q * t + self.params.omega

    def phi_derivative_at_fixed_point(self, phi):
        fn = RealFunction(lambda s: phi(s, self.u(s), self.v(s)))
        return hahn_derivative(self.params, fn, self.params.omega0)


class _TrajectoryPath:
    _EXTRA = 3

    def __init__(self, traj: LatticeTrajectory):
        self.traj = traj
        self.params = traj.params
        lat = traj.lattice
        w0 = self.params.omega0
        self.points = []
        self.where = {}
        for i, branch in enumerate(lat.branches):
            pts = list(branch)
            if traj.tail is not None:
                p = pts[-1]
                for _ in range(self._EXTRA):
                    p = w0 if p == w0 else self.params.q * p + self.params.omega
                    pts.append(p)
            self.points.append(pts)
            for n, p in enumerate(pts):
                if p != w0:
                    self.where.setdefault(p, (i, n))

    def _locate(self, t):
        if self.params.is_fixed_point(t):
            return None
        hit = self.where.get(t)
        if hit is None:
            p = self.traj.lattice.find(t)
            hit = self.where.get(p) if p is not None else None
        if hit is None:
            raise MissingNeighbor(f"{t!r} is beyond the stored lattice")
        return hit

    def _d(self, i, n):
        s = self.traj.lattice.seeds[i]
        return (s - self.params.omega0) * self.params.q**n

    def branch_value(self, i, n):
        depth = self.traj.lattice.depth
        if n <= depth:
            return self.traj.values[self.points[i][n]]
        if self.traj.tail is None:
            raise MissingNeighbor(f"depth {n} exceeds lattice depth {depth}")
        return self.traj.tail.value(i, self._d(i, n))

    def branch_slope(self, i, n):
        depth = self.traj.lattice.depth
        slopes = self.traj.slopes
        if slopes is not None and n <= depth and self.points[i][n] in slopes:
            return slopes[self.points[i][n]]
        if n > depth and self.traj.tail is not None:
            return self.traj.tail.derivative(self.params, i, self._d(i, n))
        if n + 1 >= len(self.points[i]):
            raise MissingNeighbor(f"jump of depth-{n} point is beyond the lattice")
        p0, p1 = self.points[i][n], self.points[i][n + 1]
        return (self.branch_value(i, n + 1) - self.branch_value(i, n)) / (p1 - p0)

    def value(self, t):
        loc = self._locate(t)
        if loc is None:
            return self.traj.values[self.params.omega0]
        return self.branch_value(*loc)

    def u(self, t):
        loc = self._locate(t)
        if loc is None:
            return self.traj.values[self.params.omega0]
        i, n = loc
        return self.branch_value(i, n + 1)

    def v(self, t):
        loc = self._locate(t)
        if loc is None:
            return self.fixed_point_slope()
        return self.branch_slope(*loc)

    def next_point(self, t):
        i, n = self._locate(t)
        if n + 1 >= len(self.points[i]):
            raise MissingNeighbor(f"jump of {t!r} is beyond the lattice")
        return self.points[i][n + 1]

    def _live_branches(self):
        w0 = self.params.omega0
        return [i for i, pts in enumerate(self.points) if pts[0] != w0]

    def fixed_point_slope(self):
        slopes = self.traj.slopes
        w0 = self.params.omega0
        if slopes is not None and w0 in slopes:
            return slopes[w0]
        if self.traj.tail is not None:
            return self.traj.tail.slope
        return self._richardson(lambda i, n: self.branch_slope(i, n), offset=1)

    def _richardson(self, seq, offset):
        # the quotients approach the limit linearly with ratio q
        q = self.params.q
        depth = self.traj.lattice.depth
        estimates = []
        for i in self._live_branches():
            k = depth - offset
            if k < 1:
                raise MissingNeighbor("lattice too shallow for a fixed-point estimate")
            d_prev, d_last = seq(i, k - 1), seq(i, k)
            estimates.append((d_last - q * d_prev) / (1.0 - q))
        return math.fsum(estimates) / len(estimates)

    def phi_derivative_at_fixed_point(self, phi):
        tail = self.traj.tail
        if tail is not None:
            w0 = self.params.omega0
            estimates = []
            for i in self._live_branches():
                def g(d, i=i):
                    return phi(
                        w0 + d,
                        tail.y0 + tail.slope * self.params.q * d
                        + tail.curvature[i] * (self.params.q * d) ** 2,
                        tail.derivative(self.params, i, d),
                    )
                h = 1e-5 * max(1.0, abs(w0))
                estimates.append((g(h) - g(-h)) / (2.0 * h))
            return math.fsum(estimates) / len(estimates)

        def quotient(i, n):
            p0, p1 = self.points[i][n], self.points[i][n + 1]
            f0 = phi(p0, self.branch_value(i, n + 1), self.branch_slope(i, n))
            f1 = phi(p1, self.branch_value(i, n + 2), self.branch_slope(i, n + 1))
            return (f1 - f0) / (p1 - p0)

        return self._richardson(quotient, offset=3)


def _path(params, y):
    if isinstance(y, LatticeTrajectory):
        return _TrajectoryPath(y)
    return _FunctionPath(params, y)


def lattice_derivative(traj: LatticeTrajectory, t: float) -> float:
    """``D y(t)`` from trajectory values.

    At omega0 the one-sided limits along each branch are extrapolated from the
    deepest three points and averaged.
    """
    return _TrajectoryPath(traj).v(t)


# ---------------------------------------------------------------------------
# functional and Euler-Lagrange residual


def _check_boundary(problem, path):
    for x, target in ((problem.a, problem.alpha), (problem.b, problem.beta)):
        got = path.value(x)
        if abs(got - target) > BOUNDARY_TOL:
            warnings.warn(
                f"y({x}) = {got!r} differs from the boundary value {target!r}",
                stacklevel=3,
            )


def evaluate_functional(
    problem: VariationalProblem, y, cfg: IntegrationConfig = DEFAULT_CONFIG
) -> float:
    """``L[y] = int_a^b f(t, y(qt+w), D y(t)) d_{q,w}t``.

    For a :class:`LatticeTrajectory` the series runs over the stored points
    only (plus the trajectory's tail model, when it has one).
    """
    path = _path(problem.params, y)
    _check_boundary(problem, path)
    L = problem.lagrangian
    if isinstance(y, LatticeTrajectory):
        return _trajectory_functional(problem, path, cfg)

    def integrand(t):
        return float(L(t, path.u(t), path.v(t)))

    return qomega_integral(problem.params, integrand, problem.a, problem.b, cfg)


def _trajectory_functional(problem, path: _TrajectoryPath, cfg) -> float:
    params = problem.params
    q = params.q
    L = problem.lagrangian
    traj = path.traj
    depth = traj.lattice.depth
    total = []
    for i in path._live_branches():
        s = traj.lattice.seeds[i]
        sign = 1.0 if i == 1 else -1.0
        pref = sign * (s * (1.0 - q) - params.omega)
        terms = []
        for n in range(depth):
            t = path.points[i][n]
            terms.append(q**n * float(L(t, path.branch_value(i, n + 1), path.branch_slope(i, n))))
        if traj.tail is not None:
            w0 = params.omega0
            n = depth
            small = 0
            while n < cfg.max_terms:
                d = (s - w0) * q**n
                u = traj.tail.value(i, q * d)
                v = traj.tail.derivative(params, i, d)
                term = q**n * float(L(w0 + d, u, v))
                terms.append(term)
                if abs(term) < cfg.abs_tol + cfg.rel_tol * abs(math.fsum(terms)):
                    small += 1
                    if small >= 3:
                        break
                else:
                    small = 0
                n += 1
        total.append(pref * math.fsum(terms))
    return math.fsum(total)


def _el_residual(L: Lagrangian, path, t: float) -> float:
    params = path.params
    if params.is_fixed_point(t):
        w0 = params.omega0
        dphi = path.phi_derivative_at_fixed_point(L.dv)
        return float(dphi - L.du(w0, path.u(w0), path.v(w0)))
    s = path.next_point(t)
    ut, vt = path.u(t), path.v(t)
    phi_t = L.dv(t, ut, vt)
    phi_s = L.dv(s, path.u(s), path.v(s))
    return float((phi_s - phi_t) / (s - t) - L.du(t, ut, vt))


def el_residual(problem: VariationalProblem, y, t: float) -> float:
    """``D[d3 f(., y(q.+w), D y)](t) - d2 f(t, y(qt+w), D y(t))``."""
    return _el_residual(problem.lagrangian, _path(problem.params, y), t)


# ---------------------------------------------------------------------------
# direct minimization


@dataclass(frozen=True)
class SolveOptions:
    grad_tol: float = 1e-8
    max_iter: int = 5000
    refresh: int = 25
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    series_tol: float = 1e-17


class _Branch:
    """Index bookkeeping for one seed branch of the discretized functional."""

    def __init__(self, params, lattice, i, n_terms):
        q = params.q
        self.i = i
        self.seed = lattice.seeds[i]
        self.sign = 1.0 if i == 1 else -1.0
        self.pref = self.sign * (self.seed * (1.0 - q) - params.omega)
        depth = lattice.depth
        k = np.arange(n_terms, dtype=float)
        self.qk = q**k
        self.d = (self.seed - params.omega0) * self.qk
        self.delta = (q - 1.0) * self.d[:depth]
        self.t_main = np.asarray(lattice.branches[i][:depth], dtype=float)
        self.t_tail = params.omega0 + self.d[depth:]
        self.w_main = self.pref * self.qk[:depth]
        self.w_tail = self.pref * self.qk[depth:]
        self.d_tail = self.d[depth:]
        self.dN = self.d[depth]
        self.alpha = None


class _Objective:
    def __init__(self, problem: VariationalProblem, depth: int, opts: SolveOptions):
        params = problem.params
        q = params.q
        self.problem = problem
        self.params = params
        self.L = problem.lagrangian
        self.depth = depth
        self.lattice = problem.lattice(depth)
        n_terms = max(depth + 8, math.ceil(math.log(opts.series_tol) / math.log(q)))
        self.branches = []
        pinned = None
        for i, bv in ((0, problem.alpha), (1, problem.beta)):
            if params.is_fixed_point(self.lattice.seeds[i]):
                pinned = bv
                continue
            br = _Branch(params, self.lattice, i, n_terms)
            br.alpha = bv
            self.branches.append(br)
        self._check_disjoint()
        self.pinned = pinned
        # layout: [y0?] m, kappa per branch, v_1..v_{N-1} per branch
        self.has_y0 = pinned is None
        off = 1 if self.has_y0 else 0
        self.i_m = off
        self.i_kappa = [off + 1 + j for j in range(len(self.branches))]
        base = off + 1 + len(self.branches)
        self.v_slices = []
        for _ in self.branches:
            self.v_slices.append(slice(base, base + depth - 1))
            base += depth - 1
        self.size = base
        self.scale = self._scaling()

    def _check_disjoint(self):
        if len(self.branches) == 2:
            a_pts = set(self.lattice.branches[0])
            b_pts = set(self.lattice.branches[1])
            if (a_pts & b_pts) - {self.params.omega0}:
                raise ValueError("seed branches share lattice points; unsupported by solve_direct")

    def _scaling(self):
        q = self.params.q
        s = np.ones(self.size)
        depth = self.depth
        curv_y0 = 0.0
        curv_m = 0.0
        for j, br in enumerate(self.branches):
            c = abs(br.pref)
            curv_y0 += c / br.delta[0] ** 2
            curv_m += c * br.qk[depth] / (1.0 - q) + c * br.dN**2 / br.delta[0] ** 2
            tail_k = c * float(np.sum(br.qk[depth:] * ((1 + q) * br.d_tail) ** 2))
            curv_k = tail_k + c * br.dN**4 / br.delta[0] ** 2
            s[self.i_kappa[j]] = 1.0 / math.sqrt(curv_k) if curv_k > 1e-200 else 0.0
            s[self.v_slices[j]] = 1.0 / np.sqrt(c * br.qk[1:depth])
        if self.has_y0:
            s[0] = 1.0 / math.sqrt(curv_y0)
        s[self.i_m] = 1.0 / math.sqrt(curv_m)
        return s

    def unpack(self, theta):
        y0 = theta[0] if self.has_y0 else self.pinned
        m = theta[self.i_m]
        out = []
        for j, br in enumerate(self.branches):
            kappa = theta[self.i_kappa[j]]
            vfree = theta[self.v_slices[j]]
            rest = math.fsum((br.delta[1:] * vfree).tolist())
            v0 = (y0 + m * br.dN + kappa * br.dN**2 - br.alpha - rest) / br.delta[0]
            v = np.concatenate(([v0], vfree))
            out.append((kappa, v))
        return y0, m, out

    def _branch_values(self, br, v):
        # y_k = alpha + sum_{j<k} delta_j v_j, k = 0..N
        inc = br.delta * v
        y = np.empty(self.depth + 1)
        y[0] = br.alpha
        y[1:] = br.alpha + np.cumsum(inc)
        return y

    def evaluate(self, theta, want_grad=True):
        q = self.params.q
        L = self.L
        y0, m, parts = self.unpack(theta)
        terms = []
        grad = np.zeros(self.size) if want_grad else None
        for j, (br, (kappa, v)) in enumerate(zip(self.branches, parts)):
            y = self._branch_values(br, v)
            u_main = y[1:]
            u_tail = y0 + m * q * br.d_tail + kappa * (q * br.d_tail) ** 2
            v_tail = m + kappa * (1.0 + q) * br.d_tail
            f_main = _vcall(L.f, br.t_main, u_main, v)
            f_tail = _vcall(L.f, br.t_tail, u_tail, v_tail)
            terms.extend((br.w_main * f_main).tolist())
            terms.extend((br.w_tail * f_tail).tolist())
            if not want_grad:
                continue
            f2 = br.w_main * _vcall(L.du, br.t_main, u_main, v)
            f3 = br.w_main * _vcall(L.dv, br.t_main, u_main, v)
            t2 = br.w_tail * _vcall(L.du, br.t_tail, u_tail, v_tail)
            t3 = br.w_tail * _vcall(L.dv, br.t_tail, u_tail, v_tail)
            suffix = np.cumsum(f2[::-1])[::-1]
            g = f3 + br.delta * suffix
            g0 = g[0]
            # v_0 is eliminated through the continuity condition at omega0
            grad[self.v_slices[j]] = g[1:] - g0 * br.delta[1:] / br.delta[0]
            if self.has_y0:
                grad[0] += math.fsum(t2.tolist()) + g0 / br.delta[0]
            grad[self.i_m] += (
                math.fsum((t2 * q * br.d_tail + t3).tolist()) + g0 * br.dN / br.delta[0]
            )
            grad[self.i_kappa[j]] = (
                math.fsum((t2 * (q * br.d_tail) ** 2 + t3 * (1.0 + q) * br.d_tail).tolist())
                + g0 * br.dN**2 / br.delta[0]
            )
        value = math.fsum(terms)
        noise = 8.0 * np.finfo(float).eps * math.fsum(abs(x) for x in terms)
        return value, grad, noise

    def initial(self):
        """Linear interpolation between (a, alpha) and (b, beta)."""
        p = self.problem
        slope = (p.beta - p.alpha) / (p.b - p.a)
        theta = np.zeros(self.size)
        if self.has_y0:
            theta[0] = p.alpha + slope * (self.params.omega0 - p.a)
        theta[self.i_m] = slope
        for sl in self.v_slices:
            theta[sl] = slope
        return theta

    def trajectory(self, theta, info):
        y0, m, parts = self.unpack(theta)
        values = {self.params.omega0: float(y0)}
        slopes = {self.params.omega0: float(m)}
        curvature = [0.0, 0.0]
        for br, (kappa, v) in zip(self.branches, parts):
            y = self._branch_values(br, v)
            pts = self.lattice.branches[br.i]
            for n, p in enumerate(pts):
                values[p] = float(y[n])
                if n < self.depth:
                    slopes[p] = float(v[n])
            curvature[br.i] = float(kappa)
            slopes[pts[-1]] = float(m + kappa * (1.0 + self.params.q) * br.dN)
        tail = TailModel(float(y0), float(m), tuple(curvature))
        return LatticeTrajectory(self.lattice, values, slopes, tail, info)


def _preconditioner(obj: _Objective, theta, S, floor=1e-10):
    """Inverse of a finite-difference Hessian in scaled variables.

    Eigenvalues are replaced by their absolute values and floored relative to
    the largest one, so the result is always positive definite.
    """
    n = obj.size
    H = np.empty((n, n))
    h = 1e-4
    for j in range(n):
        e = np.zeros(n)
        e[j] = h * S[j]
        gp = obj.evaluate(theta + e)[1]
        gm = obj.evaluate(theta - e)[1]
        H[:, j] = S * (gp - gm) / (2.0 * h)
    H = 0.5 * (H + H.T)
    lam, V = np.linalg.eigh(H)
    lam = np.abs(lam)
    top = float(np.max(lam)) if lam.size else 1.0
    if top == 0.0:
        return np.eye(n)
    lam = np.maximum(lam, floor * top)
    return (V / lam) @ V.T


def solve_direct(
    problem: VariationalProblem, depth: int, opts: SolveOptions | None = None
) -> LatticeTrajectory:
    """Minimize the functional over lattice values by gradient descent.

    The unknowns are the difference quotients of ``y`` between consecutive
    points of each seed branch, ``y(omega0)``, and a quadratic continuation of
    ``y`` past the depth (shared slope at omega0, one curvature per branch).
    Writing the discretization in slopes avoids differencing nearly equal
    values near omega0; the tail keeps the series complete, so any ``y``
    that is quadratic near omega0 is represented exactly.

    Variables are first scaled by a diagonal curvature estimate.  The descent
    direction is the scaled gradient multiplied by a positive-definite
    inverse-Hessian estimate, refreshed every ``refresh`` iterations, and each
    step is accepted by Armijo backtracking.  Convergence is declared when the
    max-norm of the scaled gradient drops below ``grad_tol``.  The returned
    trajectory carries ``info = {"value", "iterations", "grad_norm"}``.
    """
    opts = opts or SolveOptions()
    if depth < 3:
        raise ValueError("depth must be >= 3")
    obj = _Objective(problem, depth, opts)
    theta = obj.initial()
    S = obj.scale
    value, grad, noise = obj.evaluate(theta)
    P = None
    step = 1.0
    for it in range(opts.max_iter):
        gz = S * grad
        gnorm = float(np.max(np.abs(gz)))
        if not math.isfinite(gnorm):
            raise MaxIterations("gradient became non-finite", gnorm)
        if gnorm < opts.grad_tol:
            info = {"value": value, "iterations": it, "grad_norm": gnorm}
            return obj.trajectory(theta, info)
        if P is None or it % opts.refresh == 0:
            P = _preconditioner(obj, theta, S)
            step = 1.0
        direction = -S * (P @ gz)
        slope = float(np.dot(grad, direction))
        if not slope < 0.0:
            direction = -S * gz
            slope = float(np.dot(grad, direction))
        step = min(1.0, 2.0 * step)
        for _ in range(opts.max_backtracks):
            trial = theta + step * direction
            t_value, _, _ = obj.evaluate(trial, want_grad=False)
            if t_value <= value + opts.armijo * step * slope + noise:
                break
            step *= opts.shrink
        else:
            raise MaxIterations("line search failed to find a descent step", gnorm)
        theta = trial
        value, grad, noise = obj.evaluate(theta)
    gnorm = float(np.max(np.abs(S * grad)))
    raise MaxIterations(f"no convergence in {opts.max_iter} iterations", gnorm)


# ---------------------------------------------------------------------------
# isoperimetric problems


def isoperimetric_residual(
    problem: VariationalProblem,
    constraint: IsoperimetricConstraint,
    y,
    lam: float,
    lam0: float,
    t: float,
) -> float:
    """EL residual of ``F = lam0 * f - lam * g`` at ``t``."""
    if lam0 == 0.0 and lam == 0.0:
        raise BothMultipliersZero("(lambda0, lambda) must not both vanish")
    F = problem.lagrangian.combine(lam0, constraint.g, lam)
    return _el_residual(F, _path(problem.params, y), t)


class MultiplierFit(NamedTuple):
    lambda0: float
    lam: float
    residual_norm: float

    @property
    def ratio(self) -> float:
        return self.lam / self.lambda0


def estimate_multiplier(
    problem: VariationalProblem, constraint: IsoperimetricConstraint, y, t_set
) -> MultiplierFit:
    """Least-squares ``(lambda0, lambda)`` on the unit circle with ``lambda0 >= 0``.

    The EL residual is linear in the Lagrangian, so the fit is the right
    singular vector of ``[r_f, -r_g]`` for the smallest singular value.
    """
    t_set = list(t_set)
    if len(t_set) < 2:
        raise ValueError("need at least two points")
    path = _path(problem.params, y)
    rf = np.array([_el_residual(problem.lagrangian, path, t) for t in t_set])
    rg = np.array([_el_residual(constraint.g, path, t) for t in t_set])
    scale = max(np.max(np.abs(rf)), np.max(np.abs(rg)))
    if scale < 1e-13:
        raise DegenerateSystem("both residual vectors vanish on t_set")
    M = np.column_stack([rf, -rg])
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    lam0, lam = vt[-1]
    if lam0 < 0 or (lam0 == 0 and lam < 0):
        lam0, lam = -lam0, -lam
    resid = float(np.linalg.norm(M @ np.array([lam0, lam])))
    return MultiplierFit(float(lam0), float(lam), resid)


# ---------------------------------------------------------------------------
# two unknown functions with a pointwise constraint


@dataclass(frozen=True)
class TwoVariableLagrangian:
    """``f(t, u1, u2, v1, v2)``; partials by central differences."""

    f: Callable
    label: str = ""

    def __call__(self, t, u1, u2, v1, v2):
        return self.f(t, u1, u2, v1, v2)

    def partial(self, index: int, t, u1, u2, v1, v2):
        """Partial in argument ``index`` (1..4 for u1, u2, v1, v2)."""
        args = [t, u1, u2, v1, v2]
        x = args[index]
        h = _FD_EPS * max(1.0, abs(x))
        hi = list(args)
        lo = list(args)
        hi[index] = x + h
        lo[index] = x - h
        return (self.f(*hi) - self.f(*lo)) / (2.0 * h)


@dataclass(frozen=True)
class TwoVariableProblem:
    lagrangian: TwoVariableLagrangian
    a: float
    b: float
    start: tuple
    end: tuple
    params: QOmegaParams


class NonholonomicResidual(NamedTuple):
    el1: float
    el2: float
    violation: float


def nonholonomic_residual(
    problem2d: TwoVariableProblem,
    g_constraint: TwoVariableLagrangian,
    multiplier_fn,
    ys,
    t: float,
) -> NonholonomicResidual:
    """EL residuals of ``f - lambda(t) g`` for both components, plus ``g`` itself at ``t``."""
    params = problem2d.params
    lam = as_function(multiplier_fn)
    p1 = _path(params, ys[0])
    p2 = _path(params, ys[1])
    f = problem2d.lagrangian
    g = g_constraint

    def state(s):
        return p1.u(s), p2.u(s), p1.v(s), p2.v(s)

    def aug_partial(index, s):
        st = state(s)
        return f.partial(index, s, *st) - lam(s) * g.partial(index, s, *st)

    out = []
    for comp in (1, 2):
        u_idx, v_idx = comp, comp + 2
        if params.is_fixed_point(t):
            fn = RealFunction(lambda s, v_idx=v_idx: aug_partial(v_idx, s))
            dphi = hahn_derivative(params, fn, t)
        else:
            s = p1.next_point(t)
            dphi = (aug_partial(v_idx, s) - aug_partial(v_idx, t)) / (s - t)
        out.append(float(dphi - aug_partial(u_idx, t)))
    violation = float(g(t, *state(t)))
    return NonholonomicResidual(out[0], out[1], violation)


# ---------------------------------------------------------------------------
# sufficiency


@dataclass(frozen=True)
class ConvexityReport:
    passed: bool
    worst_margin: float
    worst_sample: tuple
    samples: int
    note: str = "Monte-Carlo evidence of joint convexity, not a proof"


def check_joint_convexity(
    lagrangian: Lagrangian,
    t_set,
    sample_count: int = 200,
    *,
    radius: float = 10.0,
    seed: int = 0,
    tol: float | None = None,
) -> ConvexityReport:
    """Probe ``f(t,u+u1,v+v1) - f(t,u,v) >= d2f*u1 + d3f*v1`` at random points."""
    rng = np.random.default_rng(seed)
    if tol is None:
        tol = 1e-9 if lagrangian.analytic else 1e-5
    worst = math.inf
    worst_sample = ()
    count = 0
    for t in t_set:
        u, v, u1, v1 = rng.uniform(-radius, radius, size=(4, sample_count))
        base = _vcall(lagrangian.f, t, u, v)
        moved = _vcall(lagrangian.f, t, u + u1, v + v1)
        lin = _vcall(lagrangian.du, t, u, v) * u1 + _vcall(lagrangian.dv, t, u, v) * v1
        margin = (moved - base - lin) / (1.0 + np.abs(moved) + np.abs(base))
        k = int(np.argmin(margin))
        if margin[k] < worst:
            worst = float(margin[k])
            worst_sample = (float(t), float(u[k]), float(v[k]), float(u1[k]), float(v1[k]))
        count += sample_count
    return ConvexityReport(worst >= -tol, worst, worst_sample, count)

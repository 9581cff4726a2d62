"""Checks for Leitmann's direct method.

A transformation ``y = z(t, ybar)`` together with a gauge term ``G`` turns one
functional into another up to a boundary constant.  The functions here verify
the pointwise identity, the constancy of the functional difference over
admissible samples, and the invariance family of the bounded control example.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .calculus import (
    DEFAULT_CONFIG,
    IntegrationConfig,
    RealFunction,
    as_function,
    hahn_derivative,
    polynomial,
    qomega_integral,
)
from .errors import ConstraintViolation, FixedPointInput
from .qcore import QOmegaParams, build_lattice, resolvable_depth

__all__ = [
    "Transformation",
    "GaugeTerm",
    "ConstantDifferenceReport",
    "ControlInvarianceReport",
    "identity_transform",
    "shift_transform",
    "transformed",
    "verify_gauge_identity",
    "verify_constant_difference",
    "probe_family",
    "control_functional",
    "control_system_residual",
    "verify_control_invariance",
]

CONSTANCY_TOL = 1e-8
FIRST_ORDER_GAP = 1e-5


@dataclass(frozen=True)
class Transformation:
    """``y = forward(t, ybar)`` with inverse ``ybar = inverse(t, y)``."""

    forward: Callable[[float, float], float]
    inverse: Callable[[float, float], float]
    label: str = ""

    def roundtrip_error(self, t: float, w: float) -> float:
        return abs(self.inverse(t, self.forward(t, w)) - w)


@dataclass(frozen=True)
class GaugeTerm:
    G: Callable[[float, float], float]
    label: str = ""

    def __call__(self, t, ybar):
        return self.G(t, ybar)


def identity_transform() -> Transformation:
    return Transformation(lambda t, w: w, lambda t, y: y, "identity")


def shift_transform(p) -> Transformation:
    """``y = ybar + p(t)``."""
    p = as_function(p)
    return Transformation(lambda t, w: w + p(t), lambda t, y: y - p(t), f"shift[{p.label}]")


def transformed(transform: Transformation, ybar) -> RealFunction:
    """``t -> forward(t, ybar(t))``."""
    ybar = as_function(ybar)
    return RealFunction(lambda t: transform.forward(t, ybar(t)), label=f"z(t, {ybar.label})")


def _integrand_value(params: QOmegaParams, f, y: RealFunction, t: float) -> float:
    if params.is_fixed_point(t):
        u = y(params.omega0)
    else:
        u = y(params.q * t + params.omega)
    return float(f(t, u, hahn_derivative(params, y, t)))


def verify_gauge_identity(
    params: QOmegaParams,
    f,
    fbar,
    transform: Transformation,
    gauge: GaugeTerm,
    ybar,
    t: float,
) -> float:
    """``f(t, y(qt+w), D y) - fbar(t, ybar(qt+w), D ybar) - D[G(., ybar(.))](t)``.

    ``y`` is the forward image of ``ybar``.  Zero certifies the identity at
    ``t``.  The fixed point is excluded: the gauge path carries no classical
    derivative there.
    """
    if params.is_fixed_point(t):
        raise FixedPointInput("gauge identity is checked at lattice points other than omega0")
    ybar = as_function(ybar)
    y = transformed(transform, ybar)
    g_path = RealFunction(lambda s: gauge(s, ybar(s)))
    lhs = _integrand_value(params, f, y, t)
    rhs = _integrand_value(params, fbar, ybar, t)
    return lhs - rhs - hahn_derivative(params, g_path, t)


@dataclass(frozen=True)
class ConstantDifferenceReport:
    differences: tuple
    values: tuple
    values_bar: tuple
    spread: float
    passed: bool
    argmin: int
    argmin_bar: int

    @property
    def constant(self) -> float:
        return math.fsum(self.differences) / len(self.differences)

    @property
    def argmin_agrees(self) -> bool:
        return self.argmin == self.argmin_bar


def _functional(params, f, y, a, b, cfg):
    return qomega_integral(params, lambda t: _integrand_value(params, f, y, t), a, b, cfg)


def verify_constant_difference(
    params: QOmegaParams,
    f,
    fbar,
    transform: Transformation,
    y_samples: Sequence,
    a: float,
    b: float,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    tol: float = CONSTANCY_TOL,
) -> ConstantDifferenceReport:
    """``L[y] - Lbar[ybar]`` for each sample, with ``ybar = inverse(t, y(t))``.

    The differences must agree to ``tol``.  The report also records which
    sample minimizes ``L`` and which minimizes ``Lbar``; under constancy they
    coincide.
    """
    if not y_samples:
        raise ValueError("need at least one sample")
    vals, vals_bar, diffs = [], [], []
    for y in y_samples:
        y = as_function(y)
        ybar = RealFunction(lambda t, y=y: transform.inverse(t, y(t)))
        v = _functional(params, f, y, a, b, cfg)
        vb = _functional(params, fbar, ybar, a, b, cfg)
        vals.append(v)
        vals_bar.append(vb)
        diffs.append(v - vb)
    spread = max(diffs) - min(diffs)
    return ConstantDifferenceReport(
        tuple(diffs),
        tuple(vals),
        tuple(vals_bar),
        spread,
        spread <= tol,
        int(np.argmin(vals)),
        int(np.argmin(vals_bar)),
    )


def probe_family(y_star, a: float, b: float, scales=(0.0, 0.5, -1.0, 2.0, -3.0)) -> list:
    """``y_star + scale * t (t-a)(t-b)``; every member keeps the boundary values."""
    y_star = as_function(y_star)
    out = []
    for c in scales:
        out.append(
            RealFunction(
                lambda t, c=c: y_star(t) + c * t * (t - a) * (t - b),
                label=f"{y_star.label}+{c}*t(t-a)(t-b)",
            )
        )
    return out


# ---------------------------------------------------------------------------
# bounded control example


def control_functional(params, u1, u2, cfg: IntegrationConfig = DEFAULT_CONFIG) -> float:
    """``int_0^1 u1**2 + u2**2``."""
    u1, u2 = as_function(u1), as_function(u2)
    return qomega_integral(params, lambda t: u1(t) ** 2 + u2(t) ** 2, 0.0, 1.0, cfg)


def control_system_residual(params, y1, y2, u1, u2, t: float) -> tuple:
    """Residuals of ``D y1 = exp(u1) + u1 + u2`` and ``D y2 = u2`` at ``t``."""
    r1 = hahn_derivative(params, y1, t) - (math.exp(u1(t)) + u1(t) + u2(t))
    r2 = hahn_derivative(params, y2, t) - u2(t)
    return r1, r2


@dataclass(frozen=True)
class ControlInvarianceReport:
    s: float
    value: float
    value_s: float
    shift_error: float
    covariance_error: float
    system_residual: float
    null_value: float
    null_boundary_error: float
    optimum_value: float

    def passed(self, shift_tol=1e-8, cov_tol=1e-10, value_tol=1e-6) -> bool:
        return (
            self.shift_error <= shift_tol
            and self.covariance_error <= cov_tol
            and abs(self.null_value) <= value_tol
            and self.null_boundary_error <= cov_tol
            and abs(self.optimum_value - 1.0) <= value_tol
        )


def _plus_st(y: RealFunction, s: float) -> RealFunction:
    dy = y.derivative
    deriv = None if dy is None else (lambda t: dy(t) + s)
    return RealFunction(lambda t: y(t) + s * t, deriv, f"{y.label}+{s}t")


def _check_bounds(lattice, u, name, lo=-1.0, hi=1.0):
    for p in lattice.points:
        val = u(p)
        if not lo - 1e-12 <= val <= hi + 1e-12:
            raise ConstraintViolation(f"{name}({p}) = {val} outside [{lo}, {hi}]")


def verify_control_invariance(
    params: QOmegaParams,
    s: float,
    trajectories,
    cfg: IntegrationConfig = DEFAULT_CONFIG,
    depth: int | None = None,
) -> ControlInvarianceReport:
    """Check the family ``y1 + st, y2 + st, u1, u2 + s`` on ``[0, 1]``.

    ``trajectories`` is ``(y1, y2, u1, u2)``; the controls must lie in
    ``[-1, 1]`` on the lattice of depth ``depth`` (default: the deepest level
    whose jumps are at least ``1e-5``, so first-order quotients keep about
    ten digits).  The report holds

    * the shift error ``|L^s - L - (s**2 + 2s)|``,
    * the covariance error: the control-system residual of the transformed
      tuple minus that of the original, maximized over lattice points,
    * the original system residual (informative; zero for admissible inputs),
    * the functional of the null controls and the boundary error of
      ``y1 = t, y2 = 0`` against ``(2 + s, 1 + s)`` at ``s = -1``,
    * the functional of the mapped-back optimum ``(0, 1, 2t, t)``.
    """
    y1, y2, u1, u2 = (as_function(x) for x in trajectories)
    if depth is None:
        depth = max(1, resolvable_depth(params, 0.0, 1.0, FIRST_ORDER_GAP))
    lattice = build_lattice(params, 0.0, 1.0, depth)
    _check_bounds(lattice, u1, "u1")
    _check_bounds(lattice, u2, "u2")

    y1s = _plus_st(y1, s)
    y2s = _plus_st(y2, s)
    u2s = RealFunction(lambda t: u2(t) + s)

    value = control_functional(params, u1, u2, cfg)
    value_s = control_functional(params, u1, u2s, cfg)
    shift_error = abs(value_s - value - (s * s + 2.0 * s))

    cov = 0.0
    sys_res = 0.0
    for t in lattice.interior():
        base = control_system_residual(params, y1, y2, u1, u2, t)
        moved = control_system_residual(params, y1s, y2s, u1, u2s, t)
        cov = max(cov, abs(moved[0] - base[0]), abs(moved[1] - base[1]))
        sys_res = max(sys_res, abs(base[0]), abs(base[1]))

    zero = polynomial([0.0])
    null_value = control_functional(params, zero, zero, cfg)
    s_null = -1.0
    y1_null, y2_null = polynomial([0.0, 1.0]), zero
    null_bc = max(
        abs(y1_null(0.0)),
        abs(y2_null(0.0)),
        abs(y1_null(1.0) - (2.0 + s_null)),
        abs(y2_null(1.0) - (1.0 + s_null)),
    )
    optimum_value = control_functional(params, zero, polynomial([1.0]), cfg)
    return ControlInvarianceReport(
        s, value, value_s, shift_error, cov, sys_res, null_value, null_bc, optimum_value
    )

"""Worked-example fixtures and the quantum Ramsey model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .calculus import (
    DEFAULT_CONFIG,
    IntegrationConfig,
    RealFunction,
    hahn_derivative,
    polynomial,
    qomega_exp_detail,
)
from .errors import DomainError, ExponentialZero, SingularCoefficient, UnknownFixture
from .leitmann import GaugeTerm, Transformation, shift_transform
from .qcore import QOmegaParams, build_lattice
from .variational import Lagrangian, VariationalProblem, _path

__all__ = [
    "Utility",
    "log_utility",
    "quadratic_utility",
    "RamseyConfig",
    "ramsey_coefficient",
    "ramsey_consumption",
    "ramsey_el_residual",
    "ramsey_lagrangian",
    "Fixture",
    "ControlFixture",
    "fixture",
    "example4_gauge",
    "FIXTURES",
    "builtin",
    "BUILTINS",
]

SINGULAR_TOL = 1e-13


# ---------------------------------------------------------------------------
# utilities


@dataclass(frozen=True)
class Utility:
    U: Callable
    dU: Callable
    label: str = ""


def _positive(c):
    if np.any(np.asarray(c) <= 0.0):
        raise DomainError(f"log utility needs c > 0, got {c!r}")


def _log_u(c):
    _positive(c)
    return np.log(c)


def _log_du(c):
    _positive(c)
    return 1.0 / c


def log_utility() -> Utility:
    return Utility(_log_u, _log_du, "log")


def quadratic_utility() -> Utility:
    return Utility(lambda c: 0.5 * c * c, lambda c: c, "quadratic")


UTILITIES = {"log": log_utility, "quadratic": quadratic_utility}


# ---------------------------------------------------------------------------
# Ramsey model


@dataclass(frozen=True)
class RamseyConfig:
    """Discount ``p``, yield ``r``, horizon ``T`` and a utility on ``[0, T]``.

    Construction checks that the coefficient denominators do not vanish on
    the lattice ``[0, T]`` at ``depth``.
    """

    p: float
    r: float
    T: float
    utility: Utility
    params: QOmegaParams
    depth: int = 30
    integration: IntegrationConfig = field(default=DEFAULT_CONFIG)

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("discount rate p must be >= 0")
        if not self.T > 0:
            raise ValueError("horizon T must be > 0")
        for t in build_lattice(self.params, 0.0, self.T, self.depth).points:
            _denominators(self, t)


def _denominators(config: RamseyConfig, t: float) -> tuple:
    q, w, r = config.params.q, config.params.omega, config.r
    d1 = 1.0 + r * (t - (t - w) / q)
    d2 = 1.0 - r * (t * (1.0 - q) - w)
    if abs(d1) < SINGULAR_TOL or abs(d2) < SINGULAR_TOL:
        raise SingularCoefficient(f"Ramsey coefficient denominator vanishes at t={t!r}")
    return d1, d2


def ramsey_coefficient(config: RamseyConfig, t: float) -> float:
    """``[r(1 + r(t - (t-w)/q)) - r(1 - 1/q)] / [(1 + r(t - (t-w)/q))(1 - r(t(1-q) - w))]``."""
    q, r = config.params.q, config.r
    d1, d2 = _denominators(config, t)
    return (r * d1 - r * (1.0 - 1.0 / q)) / (d1 * d2)


def ramsey_consumption(config: RamseyConfig, W, t: float) -> float:
    """``C(t) = W(qt+w) * coefficient(t) - D W(t)``."""
    path = _path(config.params, W)
    return float(path.u(t) * ramsey_coefficient(config, t) - path.v(t))


def _discount(config: RamseyConfig, t: float) -> float:
    res = qomega_exp_detail(config.params, -config.p, t, config.integration)
    if res.zero_factor:
        raise ExponentialZero(f"E(-p, {t!r}) vanishes")
    return res.value


def ramsey_el_residual(config: RamseyConfig, W, t: float) -> float:
    """``E(-p,t) U'(C(t)) coefficient(t) + D[E(-p,.) U'(C(.))](t)``."""
    params = config.params
    dU = config.utility.dU

    def phi(s):
        return _discount(config, s) * float(dU(ramsey_consumption(config, W, s)))

    if params.is_fixed_point(t):
        dphi = hahn_derivative(params, RealFunction(phi), t)
    else:
        s = params.q * t + params.omega
        dphi = (phi(s) - phi(t)) / (s - t)
    return phi(t) * ramsey_coefficient(config, t) + dphi


def ramsey_lagrangian(config: RamseyConfig) -> Lagrangian:
    """``F(t, u, v) = E(-p, t) U(coefficient(t) u - v)`` as a generic Lagrangian.

    Its Euler-Lagrange residual is the negative of :func:`ramsey_el_residual`.
    """
    U, dU = config.utility.U, config.utility.dU

    def f(t, u, v):
        return _discount(config, t) * U(ramsey_coefficient(config, t) * u - v)

    def d2(t, u, v):
        k = ramsey_coefficient(config, t)
        return _discount(config, t) * dU(k * u - v) * k

    def d3(t, u, v):
        return -_discount(config, t) * dU(ramsey_coefficient(config, t) * u - v)

    return Lagrangian(f, d2, d3, label=f"ramsey[{config.utility.label}]")


# ---------------------------------------------------------------------------
# builtin functions


def _piecewise(t):
    if t == -1.0:
        return 0.0
    if t == 0.0:
        return 1.0
    return -t


def _g(t):
    return 1.0 + 0.5 * t * t


BUILTINS = {
    # -t on (-1,0) u (0,1], 0 at -1, 1 at 0; -t elsewhere
    "piecewise": RealFunction(_piecewise, lambda t: -1.0, "piecewise"),
    "one_plus_half_t2": RealFunction(_g, lambda t: t, "1+t^2/2"),
}


def builtin(name: str) -> RealFunction:
    try:
        return BUILTINS[name]
    except KeyError:
        raise UnknownFixture(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None


# ---------------------------------------------------------------------------
# fixtures


@dataclass(frozen=True)
class Fixture:
    """A variational problem with its analytic solution and expected values.

    ``leitmann`` optionally holds ``(fbar, transform, gauge, ybar)`` for the
    direct-method identity.
    """

    name: str
    problem: VariationalProblem
    solution: RealFunction
    expected: dict
    leitmann: Optional[tuple] = None


@dataclass(frozen=True)
class ControlFixture:
    name: str
    params: QOmegaParams
    optimum: tuple
    null_s: float
    expected_minimum: float
    expected: dict = field(default_factory=dict)


def _example1(q=0.5, omega=0.1, **_):
    params = QOmegaParams(q, omega)
    L = Lagrangian(
        lambda t, u, v: u + 0.5 * v * v,
        lambda t, u, v: 1.0 + 0.0 * u,
        lambda t, u, v: v,
        label="u + v^2/2",
    )
    problem = VariationalProblem(L, 0.0, 1.0, 0.0, 1.0, params)
    c = 1.0 / (q + 1.0)
    y = polynomial([0.0, q * c, c], label="(t^2+qt)/(q+1)")
    return Fixture("example1", problem, y, {"y(0)": 0.0, "y(1)": 1.0, "DDy": 1.0})


def _example2(q=0.5, omega=0.25, a=0.0, b=1.0, alpha=0.5, beta=2.0, **_):
    params = QOmegaParams(q, omega)
    L = Lagrangian(
        lambda t, u, v: v * v + u + t * v,
        lambda t, u, v: 1.0 + 0.0 * u,
        lambda t, u, v: 2.0 * v + t,
        label="v^2 + u + t v",
    )
    problem = VariationalProblem(L, a, b, alpha, beta, params)
    c = (alpha - beta) / (a - b)
    d = (beta * a - b * alpha) / (a - b)
    y = polynomial([d, c], label="ct+d")
    fbar = Lagrangian(lambda t, u, v: v * v, lambda t, u, v: 0.0 * u, lambda t, u, v: 2.0 * v)
    transform = shift_transform(polynomial([d, c]))
    gauge = GaugeTerm(
        lambda t, yb: 2.0 * c * yb + t * yb + c * t * t + (c * c + d) * t,
        "2c yb + t yb + c t^2 + (c^2+d) t",
    )
    ybar = polynomial([0.0], label="0")
    return Fixture(
        "example2", problem, y, {"c": c, "d": d}, (fbar, transform, gauge, ybar)
    )


def _example4(q=0.5, omega=0.25, a=0.0, b=1.0, alpha=1.0, beta=2.0 / 3.0, g=None, **_):
    params = QOmegaParams(q, omega)
    g = g or BUILTINS["one_plus_half_t2"]
    lattice = build_lattice(params, a, b, 60)
    if any(abs(g(p)) < SINGULAR_TOL for p in lattice.points):
        raise SingularCoefficient("g vanishes on the lattice")

    def dg(t):
        return hahn_derivative(params, g, t)

    def f(t, u, v):
        return (v * g(t) + u * dg(t)) ** 2

    def d2(t, u, v):
        return 2.0 * (v * g(t) + u * dg(t)) * dg(t)

    def d3(t, u, v):
        return 2.0 * (v * g(t) + u * dg(t)) * g(t)

    L = Lagrangian(f, d2, d3, label="[D(y g)]^2")
    problem = VariationalProblem(L, a, b, alpha, beta, params)
    A = (alpha * g(a) - beta * g(b)) / (a - b)
    C = (a * beta * g(b) - b * alpha * g(a)) / (a - b)
    y = RealFunction(lambda t: (A * t + C) / g(t), label="(At+C)/g")
    return Fixture("example4", problem, y, {"A": A, "C": C}, None)


def example4_gauge(fx: Fixture, A: float, B: float):
    """Leitmann data for ``y = ybar + (At + B)/g`` on the example4 fixture.

    Returns ``(transform, gauge)`` with ``G(t, ybar) = A (2 ybar g + A t + B)``.
    """
    g = BUILTINS["one_plus_half_t2"]
    p = RealFunction(lambda t: (A * t + B) / g(t))
    transform = Transformation(lambda t, w: w + p(t), lambda t, y: y - p(t), "ybar + (At+B)/g")
    gauge = GaugeTerm(lambda t, yb: A * (2.0 * yb * g(t) + A * t + B), "A(2 yb g + At + B)")
    return transform, gauge


def _example3_control(q=0.5, omega=0.5, **_):
    params = QOmegaParams(q, omega)
    optimum = (
        polynomial([0.0, 2.0], label="2t"),
        polynomial([0.0, 1.0], label="t"),
        polynomial([0.0], label="0"),
        polynomial([1.0], label="1"),
    )
    return ControlFixture(
        "example3_control",
        params,
        optimum,
        -1.0,
        1.0,
        {"minimum": 1.0, "null_s": -1.0, "shift": "s^2 + 2s"},
    )


FIXTURES = {
    "example1": _example1,
    "example2": _example2,
    "example4": _example4,
    "example3_control": _example3_control,
}


def fixture(name: str, **overrides):
    """Build a named fixture; keyword arguments override its defaults."""
    try:
        factory = FIXTURES[name]
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return factory(**overrides)

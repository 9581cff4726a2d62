"""Hahn difference operator, Jackson-Norlund integral and the q,omega-exponential."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DerivativeAtFixedPointUnavailable,
    FixedPointInput,
    SeriesNotConverged,
)
from .qcore import QOmegaParams

__all__ = [
    "RealFunction",
    "IntegrationConfig",
    "SeriesResult",
    "ExpResult",
    "as_function",
    "hahn_derivative",
    "fixed_point_derivative",
    "power_rule",
    "jackson_series",
    "integral_from_omega0",
    "qomega_integral",
    "qomega_exp",
    "qomega_exp_detail",
    "polynomial",
]


@dataclass(frozen=True)
class RealFunction:
    """A real function with an optional classical derivative.

    ``derivative`` is only consulted at omega0, where the Hahn operator falls
    back to the ordinary derivative.
    """

    eval: Callable[[float], float]
    derivative: Optional[Callable[[float], float]] = None
    label: str = ""

    def __call__(self, t):
        return self.eval(t)


def as_function(f) -> RealFunction:
    if isinstance(f, RealFunction):
        return f
    if callable(f):
        return RealFunction(f, label=getattr(f, "__name__", ""))
    raise TypeError(f"expected a callable, got {type(f).__name__}")


def polynomial(coeffs, label: str | None = None) -> RealFunction:
    """``sum(c_i * t**i)`` with its exact derivative attached."""
    c = [float(x) for x in coeffs]
    dc = [i * c[i] for i in range(1, len(c))] or [0.0]

    def ev(t):
        acc = 0.0
        for x in reversed(c):
            acc = acc * t + x
        return acc

    def dev(t):
        acc = 0.0
        for x in reversed(dc):
            acc = acc * t + x
        return acc

    return RealFunction(ev, dev, label or f"poly{tuple(c)}")


@dataclass(frozen=True)
class IntegrationConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_terms: int = 10000

    def __post_init__(self):
        if not self.rel_tol > 0 or not self.abs_tol > 0:
            raise ValueError("tolerances must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_CONFIG = IntegrationConfig()

# fixed-point derivative fallback
_PROBE_AGREE = 1e-8
_PROBE_MIN_STEP = 1e-7


def fixed_point_derivative(params: QOmegaParams, f, probe: float = 1.0) -> float:
    """Classical derivative at omega0 estimated along the lattice.

    Symmetric quotients ``(f(x_n) - f(y_n)) / (x_n - y_n)`` are formed along the
    two lattice sequences started at ``omega0 +/- probe``; the estimate is
    accepted once three consecutive quotients agree to 1e-8 (relative, with an
    absolute floor of 1e-8).
    """
    w0 = params.omega0
    x = w0 + probe
    y = w0 - probe
    history = []
    while True:
        h = x - y
        if h < _PROBE_MIN_STEP * max(1.0, probe):
            break
        d = (f(x) - f(y)) / h
        if not math.isfinite(d):
            break
        history.append(d)
        if len(history) >= 3:
            d0, d1, d2 = history[-3:]
            scale = _PROBE_AGREE * max(1.0, abs(d2))
            if abs(d2 - d1) <= scale and abs(d1 - d0) <= scale:
                return d2
        x = params.q * x + params.omega
        y = params.q * y + params.omega
    raise DerivativeAtFixedPointUnavailable(
        f"difference quotients at omega0={w0!r} did not settle"
    )


def hahn_derivative(params: QOmegaParams, f, t: float) -> float:
    """``D_{q,omega} f(t)``.

    Away from omega0 this is the exact quotient ``(f(qt+w) - f(t)) / (qt+w - t)``.
    At omega0 the attached classical derivative is used if present, otherwise
    :func:`fixed_point_derivative`.
    """
    if params.is_fixed_point(t):
        deriv = getattr(f, "derivative", None)
        if deriv is not None:
            return float(deriv(params.omega0))
        return fixed_point_derivative(params, f)
    s = params.q * t + params.omega
    return (f(s) - f(t)) / (s - t)


def power_rule(params: QOmegaParams, a: float, b: float, n: int, t: float) -> float:
    """Closed form of ``D_{q,omega} (a t + b)**n`` for ``t != omega0``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if params.is_fixed_point(t):
        raise FixedPointInput("power rule is stated for t != omega0")
    x = a * (params.q * t + params.omega) + b
    y = a * t + b
    return a * math.fsum(x**k * y ** (n - k - 1) for k in range(n))


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int
    tail_estimate: float
    converged: bool = True
    partial_sums: tuple = field(default=(), repr=False)


def jackson_series(
    params: QOmegaParams, f, x: float, cfg: IntegrationConfig = DEFAULT_CONFIG
) -> SeriesResult:
    """``(x(1-q) - w) * sum_k q**k f(x q**k + [k])`` with adaptive truncation.

    Terms are generated in ascending ``k`` along the jump recurrence and summed
    with ``math.fsum``.  The series stops at the first ``K >= 8`` such that the
    last three terms all satisfy ``|term| < abs_tol + rel_tol * |partial sum|``.
    """
    if params.is_fixed_point(x):
        return SeriesResult(0.0, 0, 0.0)
    q = params.q
    prefactor = x * (1.0 - q) - params.omega
    terms = []
    running = 0.0
    small = 0
    weight = 1.0
    p = x
    for k in range(cfg.max_terms):
        term = weight * f(p)
        if not math.isfinite(term):
            raise SeriesNotConverged(f"non-finite term at k={k} (t={p!r})")
        terms.append(term)
        running += term
        if abs(term) < cfg.abs_tol + cfg.rel_tol * abs(running):
            small += 1
        else:
            small = 0
        if k >= 8 and small >= 3:
            total = math.fsum(terms)
            tail = abs(term) * q / (1.0 - q)
            return SeriesResult(prefactor * total, k + 1, abs(prefactor) * tail)
        weight *= q
        p = q * p + params.omega
    raise SeriesNotConverged(
        f"series at x={x!r} not converged after {cfg.max_terms} terms"
    )


def integral_from_omega0(
    params: QOmegaParams, f, x: float, cfg: IntegrationConfig = DEFAULT_CONFIG
) -> float:
    """``int_{omega0}^{x} f(t) d_{q,omega} t``."""
    return jackson_series(params, f, x, cfg).value


def qomega_integral(
    params: QOmegaParams, f, a: float, b: float, cfg: IntegrationConfig = DEFAULT_CONFIG
) -> float:
    """``int_a^b f(t) d_{q,omega} t`` as the difference of two series anchored at omega0."""
    if a == b:
        return 0.0
    return integral_from_omega0(params, f, b, cfg) - integral_from_omega0(params, f, a, cfg)


@dataclass(frozen=True)
class ExpResult:
    value: float
    factors: int
    zero_factor: bool = False


def qomega_exp_detail(
    params: QOmegaParams, z: float, t: float, cfg: IntegrationConfig = DEFAULT_CONFIG
) -> ExpResult:
    """Truncated product ``prod_k (1 + z q**k (t(1-q) - w))``.

    The number of factors is the smallest ``K`` with ``|z q**K (t(1-q)-w)| < rel_tol``.
    A vanishing factor gives an exact zero (``zero_factor=True``).
    """
    if z == 0.0 or params.is_fixed_point(t):
        return ExpResult(1.0, 0)
    q = params.q
    base = z * (t * (1.0 - q) - params.omega)
    if base == 0.0:
        return ExpResult(1.0, 0)
    ratio = cfg.rel_tol / abs(base)
    n = 1 if ratio >= 1.0 else math.ceil(math.log(ratio) / math.log(q)) + 1
    if n > cfg.max_terms:
        raise SeriesNotConverged(
            f"q,omega-exponential needs {n} factors (> max_terms={cfg.max_terms})"
        )
    perturb = base * q ** np.arange(n, dtype=float)
    factors = 1.0 + perturb
    if np.any(factors == 0.0):
        return ExpResult(0.0, n, zero_factor=True)
    negatives = int(np.count_nonzero(factors < 0.0))
    if negatives:
        logs = np.log(np.abs(factors))
    else:
        logs = np.log1p(perturb)
    value = math.exp(math.fsum(logs.tolist()))
    if negatives % 2:
        value = -value
    return ExpResult(value, n)


def qomega_exp(
    params: QOmegaParams, z: float, t: float, cfg: IntegrationConfig = DEFAULT_CONFIG
) -> float:
    """``E(z, t)``; see :func:`qomega_exp_detail`."""
    return qomega_exp_detail(params, z, t, cfg).value

"""Shared problem builders and oracles for the test-suite."""

from __future__ import annotations

import numpy as np

from hahnvar.calculus import RealFunction, polynomial, qomega_integral
from hahnvar.qcore import QOmegaParams, build_lattice, resolvable_depth
from hahnvar.variational import IsoperimetricConstraint, Lagrangian, VariationalProblem

# nested quotients need jumps of this size to keep ~10 digits
SECOND_ORDER_GAP = 3e-3
FIRST_ORDER_GAP = 1e-5

# 40-digit brute-force series values of the example1 functional at its solution
EXAMPLE1_VALUES = {
    (0.5, 0.1): 0.8314285714285714285714285714285714285714,
    (0.9, 0.05): 0.9538745387453874538745387453874538745388,
}


def check_lattice(params, a, b, gap=SECOND_ORDER_GAP):
    return build_lattice(params, a, b, max(1, resolvable_depth(params, a, b, gap)))


def v_squared():
    return Lagrangian(lambda t, u, v: v * v, lambda t, u, v: 0.0 * u, lambda t, u, v: 2.0 * v, "v^2")


def u_only():
    return Lagrangian(lambda t, u, v: u, lambda t, u, v: 1.0 + 0.0 * u, lambda t, u, v: 0.0 * v, "u")


def quadratic_family(params, a, b, alpha, beta, k):
    """Quadratic ``y`` with ``y(a)=alpha, y(b)=beta, int_a^b y(qt+w) = k``.

    Returns ``(y, A)``; for ``f = v**2, g = u`` the multiplier is ``-2 (1+q) A``.
    """
    basis = [polynomial([1.0]), polynomial([0.0, 1.0]), polynomial([0.0, 0.0, 1.0])]
    rows = [[f(a) for f in basis], [f(b) for f in basis]]
    rows.append(
        [qomega_integral(params, lambda t, f=f: f(params.jump(t)), a, b) for f in basis]
    )
    C, B, A = np.linalg.solve(np.array(rows), np.array([alpha, beta, k]))
    return polynomial([C, B, A]), A


def isoperimetric_instance(q=0.5, omega=0.25, a=0.0, b=1.0, alpha=0.0, beta=1.0, k=0.8):
    params = QOmegaParams(q, omega)
    problem = VariationalProblem(v_squared(), a, b, alpha, beta, params)
    constraint = IsoperimetricConstraint(u_only(), k)
    y, A = quadratic_family(params, a, b, alpha, beta, k)
    return problem, constraint, y, -2.0 * (1.0 + q) * A


def endpoint_perturbation(rng, a, b, degree=3, scale=1.0):
    c = rng.normal(size=degree) * scale
    p = polynomial(c)
    return RealFunction(lambda t: (t - a) * (t - b) * p(t))

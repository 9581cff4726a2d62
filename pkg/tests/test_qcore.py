from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hahnvar.errors import DegenerateSeed
from hahnvar.qcore import (
    QOmegaParams,
    bracket,
    build_lattice,
    depth_for_tol,
    jump,
    resolvable_depth,
)

qs = st.floats(0.05, 0.95)
omegas = st.floats(0.01, 2.0)


@pytest.mark.parametrize(
    "q, omega, t, expected",
    [(0.5, 0.5, 1.0, 1.0), (0.5, 0.5, -1.0, 0.0), (0.5, 0.1, 0.6, 0.4)],
)
def test_jump_examples(q, omega, t, expected):
    assert jump(QOmegaParams(q, omega), t) == pytest.approx(expected, abs=1e-15)


def test_params_validation():
    with pytest.raises(ValueError):
        QOmegaParams(1.0, 0.5)
    with pytest.raises(ValueError):
        QOmegaParams(0.5, 0.0)
    with pytest.raises(ValueError):
        QOmegaParams(0.0, 0.1)
    p = QOmegaParams(0.5, 0.25)
    assert p.omega0 == 0.25 / 0.5


def test_bracket_values():
    p = QOmegaParams(0.5, 0.5)
    assert bracket(p, 0) == 0.0
    assert bracket(p, 1) == pytest.approx(0.5, abs=1e-16)
    assert abs(bracket(p, 60) - p.omega0) < 1e-12
    with pytest.raises(ValueError):
        bracket(p, -1)


def test_lattice_small_example():
    lat = build_lattice(QOmegaParams(0.5, 0.25), 0.0, 1.0, 2)
    assert lat.points == (0.0, 0.25, 0.375, 0.5, 0.625, 0.75, 1.0)
    assert lat.branches[0] == (0.0, 0.25, 0.375)
    assert lat.branches[1] == (1.0, 0.75, 0.625)


def test_lattice_seed_at_fixed_point():
    p = QOmegaParams(0.5, 0.5)
    lat = build_lattice(p, -1.0, 1.0, 1)
    assert lat.points.count(p.omega0) == 1
    assert lat.points == (-1.0, 0.0, 1.0)


def test_lattice_tail_gap():
    p = QOmegaParams(0.9, 0.1)
    lat = build_lattice(p, 0.0, 2.0, 200)
    assert lat.tail_gap < 1e-9


def test_lattice_errors():
    p = QOmegaParams(0.5, 0.5)
    with pytest.raises(DegenerateSeed):
        build_lattice(p, 1.0 - 4e-15, 1.0 + 4e-15, 3)
    with pytest.raises(ValueError):
        build_lattice(p, 1.0, 0.0, 3)
    with pytest.raises(ValueError):
        build_lattice(p, 0.0, 1.0, 0)


def test_lattice_find_and_locate():
    p = QOmegaParams(0.5, 0.25)
    lat = build_lattice(p, 0.0, 1.0, 5)
    assert lat.locate(0.375) == (0, 2)
    assert lat.locate(p.omega0) is None
    assert 0.625 in lat
    assert 0.3 not in lat
    assert len(lat) == 13
    interior = lat.interior()
    assert 1.0 in interior and p.omega0 in interior
    assert lat.branches[0][-1] not in interior


def test_depth_helpers():
    p = QOmegaParams(0.5, 0.25)
    n = depth_for_tol(p, 0.0, 1.0, 1e-6)
    assert 0.5**n * 0.5 < 1e-6 <= 0.5 ** (n - 1) * 0.5
    m = resolvable_depth(p, 0.0, 1.0, 1e-3)
    assert 0.5 * 0.5**m * 0.5 >= 1e-3 > 0.5 * 0.5 ** (m + 1) * 0.5


@settings(max_examples=200, deadline=None)
@given(qs, omegas, st.floats(-50, 50))
def test_jump_contraction(q, omega, t):
    p = QOmegaParams(q, omega)
    lhs = abs(jump(p, t) - p.omega0)
    assert lhs == pytest.approx(q * abs(t - p.omega0), rel=1e-12, abs=1e-13 * max(1.0, abs(t)))


@settings(max_examples=100, deadline=None)
@given(qs, omegas, st.floats(-5, 5), st.floats(0.1, 5), st.integers(1, 40))
def test_lattice_invariants(q, omega, a, width, depth):
    p = QOmegaParams(q, omega)
    b = a + width
    if p.is_fixed_point(a) and p.is_fixed_point(b):
        return
    lat = build_lattice(p, a, b, depth)
    assert list(lat.points) == sorted(lat.points)
    assert lat.points.count(p.omega0) == 1
    for i, branch in enumerate(lat.branches):
        for n in range(depth):
            if branch[n + 1] != p.omega0:
                assert branch[n + 1] == jump(p, branch[n])
                closed = lat.closed_form(i, n + 1)
                assert branch[n + 1] == pytest.approx(closed, rel=1e-12, abs=1e-12)
        dist = [abs(x - p.omega0) for x in branch if x != p.omega0]
        assert all(d1 > d2 for d1, d2 in zip(dist, dist[1:]))


def test_closed_form_agrees():
    p = QOmegaParams(0.7, 0.3)
    lat = build_lattice(p, -2.0, 3.0, 30)
    for i in range(2):
        for n in range(31):
            assert math.isclose(lat.branches[i][n], lat.closed_form(i, n), rel_tol=1e-13, abs_tol=1e-14)

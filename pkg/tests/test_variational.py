from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hahnvar.calculus import RealFunction, hahn_derivative, polynomial, qomega_integral
from hahnvar.errors import (
    BothMultipliersZero,
    DegenerateSystem,
    MaxIterations,
    MissingNeighbor,
)
from hahnvar.models import fixture
from hahnvar.qcore import QOmegaParams, build_lattice
from hahnvar.variational import (
    IsoperimetricConstraint,
    Lagrangian,
    LatticeTrajectory,
    SolveOptions,
    TwoVariableLagrangian,
    TwoVariableProblem,
    VariationalProblem,
    check_joint_convexity,
    el_residual,
    estimate_multiplier,
    evaluate_functional,
    isoperimetric_residual,
    lattice_derivative,
    nonholonomic_residual,
    solve_direct,
)

from helpers import (
    EXAMPLE1_VALUES,
    check_lattice,
    endpoint_perturbation,
    isoperimetric_instance,
    u_only,
    v_squared,
)

ZERO = Lagrangian(lambda t, u, v: 0.0 * v)


class TestLagrangian:
    @settings(max_examples=100, deadline=None)
    @given(st.floats(-3, 3), st.floats(-5, 5), st.floats(-5, 5))
    def test_fd_partials_match_analytic(self, t, u, v):
        f = lambda t, u, v: u**2 * v + math.sin(t * v) + u * t
        d2 = lambda t, u, v: 2 * u * v + t
        d3 = lambda t, u, v: u**2 + t * math.cos(t * v)
        fd = Lagrangian(f)
        assert fd.du(t, u, v) == pytest.approx(d2(t, u, v), rel=1e-5, abs=1e-6)
        assert fd.dv(t, u, v) == pytest.approx(d3(t, u, v), rel=1e-5, abs=1e-6)

    def test_combine(self):
        f, g = v_squared(), u_only()
        F = f.combine(2.0, g, 3.0)
        assert F(0.1, 2.0, 3.0) == 2 * 9 - 3 * 2
        assert F.du(0.1, 2.0, 3.0) == -3.0
        assert F.dv(0.1, 2.0, 3.0) == 12.0

    def test_problem_needs_ordered_interval(self):
        with pytest.raises(ValueError):
            VariationalProblem(ZERO, 1.0, 0.0, 0.0, 0.0, QOmegaParams(0.5, 0.1))


class TestLatticeDerivative:
    def setup_method(self):
        self.p = QOmegaParams(0.5, 0.1)
        self.lat = build_lattice(self.p, -1.0, 0.6, 12)

    def test_constant_and_identity(self):
        c = LatticeTrajectory.sample(self.lat, lambda t: 4.0)
        lin = LatticeTrajectory.sample(self.lat, lambda t: t)
        for t in self.lat.interior():
            if t != self.p.omega0:
                assert lattice_derivative(c, t) == 0.0
                assert lattice_derivative(lin, t) == pytest.approx(1.0, rel=1e-9)

    def test_square(self):
        sq = LatticeTrajectory.sample(self.lat, lambda t: t * t)
        assert lattice_derivative(sq, 0.6) == pytest.approx(1.0, rel=1e-14)

    def test_fixed_point_limit(self):
        sq = LatticeTrajectory.sample(self.lat, lambda t: t * t)
        assert lattice_derivative(sq, self.p.omega0) == pytest.approx(2 * self.p.omega0, abs=1e-8)

    def test_missing_neighbor(self):
        sq = LatticeTrajectory.sample(self.lat, lambda t: t * t)
        with pytest.raises(MissingNeighbor):
            lattice_derivative(sq, self.lat.branches[0][-1])

    def test_requires_all_values(self):
        with pytest.raises(ValueError):
            LatticeTrajectory(self.lat, {0.6: 1.0})


class TestFunctional:
    def test_zero_lagrangian(self):
        pr = VariationalProblem(ZERO, 0.0, 1.0, 0.0, 1.0, QOmegaParams(0.5, 0.25))
        assert evaluate_functional(pr, polynomial([0, 1])) == 0.0

    def test_example2_linear_minimizer(self):
        # y = t: integrand 1 + (qt+w) + t, integral over [0,1] is 2 exactly
        fx = fixture("example2", alpha=0.0, beta=1.0)
        assert evaluate_functional(fx.problem, fx.solution) == pytest.approx(2.0, abs=1e-11)

    @pytest.mark.parametrize("q, omega", sorted(EXAMPLE1_VALUES))
    def test_example1_oracle(self, q, omega):
        fx = fixture("example1", q=q, omega=omega)
        val = evaluate_functional(fx.problem, fx.solution)
        assert val == pytest.approx(EXAMPLE1_VALUES[(q, omega)], abs=1e-10)

    def test_boundary_warning(self):
        fx = fixture("example1")
        with pytest.warns(UserWarning):
            evaluate_functional(fx.problem, polynomial([0.0, 0.5]))

    def test_trajectory_truncates_at_depth(self):
        fx = fixture("example1")
        lat = fx.problem.lattice(30)
        traj = LatticeTrajectory.sample(lat, fx.solution)
        assert evaluate_functional(fx.problem, traj) == pytest.approx(
            evaluate_functional(fx.problem, fx.solution), abs=1e-7
        )


class TestELResidual:
    def test_zero_lagrangian(self):
        p = QOmegaParams(0.5, 0.25)
        pr = VariationalProblem(ZERO, 0.0, 1.0, 0.0, 1.0, p)
        for t in (0.0, 0.375, p.omega0, 1.0):
            assert el_residual(pr, polynomial([1, 2, 3]), t) == 0.0

    @pytest.mark.parametrize("q, omega", [(0.5, 0.1), (0.9, 0.05)])
    def test_example1_corrected_candidate(self, q, omega):
        fx = fixture("example1", q=q, omega=omega)
        lat = check_lattice(fx.problem.params, 0.0, 1.0)
        assert max(abs(el_residual(fx.problem, fx.solution, t)) for t in lat.points) < 1e-10

    def test_example1_stated_candidate_misses_boundary(self):
        q = 0.5
        stated = polynomial([0.0, -1 / (q + 1), 1 / (q + 1)])
        assert stated(1.0) == 0.0  # boundary requires 1

    def test_example2_any_affine(self):
        fx = fixture("example2")
        lat = check_lattice(fx.problem.params, 0.0, 1.0)
        for y in (polynomial([3.0, -2.0]), polynomial([0.1, 7.0])):
            assert max(abs(el_residual(fx.problem, y, t)) for t in lat.points) < 1e-10

    def test_missing_neighbor_on_trajectory(self):
        fx = fixture("example1")
        traj = LatticeTrajectory.sample(fx.problem.lattice(6), fx.solution)
        with pytest.raises(MissingNeighbor):
            el_residual(fx.problem, traj, traj.lattice.branches[1][-1])

    def test_trajectory_residual(self):
        fx = fixture("example1")
        lat = fx.problem.lattice(6)
        traj = LatticeTrajectory.sample(lat, fx.solution)
        pts = [b[n] for b in lat.branches for n in range(4)]
        assert max(abs(el_residual(fx.problem, traj, t)) for t in pts) < 1e-10

    def test_first_variation_vanishes(self):
        # sum-by-parts counterpart: int d2f h(qt+w) + d3f D h == 0 for admissible h
        fx = fixture("example1")
        pr, y = fx.problem, fx.solution
        p, L = pr.params, pr.lagrangian
        rng = np.random.default_rng(4)
        for _ in range(5):
            h = endpoint_perturbation(rng, 0.0, 1.0)

            def integrand(t):
                u, v = y(p.jump(t)), hahn_derivative(p, y, t)
                return L.du(t, u, v) * h(p.jump(t)) + L.dv(t, u, v) * hahn_derivative(p, h, t)

            assert abs(qomega_integral(p, integrand, 0.0, 1.0)) < 1e-9


def _interior_resolvable(traj, gap=1e-4):
    p = traj.params
    out = []
    for branch in traj.lattice.branches:
        for n in range(len(branch) - 1):
            if abs(p.jump(branch[n]) - branch[n]) >= gap:
                out.append(branch[n])
    return out


class TestSolveDirect:
    def test_v_squared_linear(self):
        pr = VariationalProblem(v_squared(), 0.0, 1.0, 0.0, 1.0, QOmegaParams(0.5, 0.25))
        traj = solve_direct(pr, 30)
        assert max(abs(traj.values[p] - p) for p in traj.lattice.points) < 1e-6
        assert traj.info["value"] == pytest.approx(1.0, abs=1e-6)
        assert traj.pins(0.0, 1.0)
        assert traj.info["grad_norm"] < 1e-8

    @pytest.mark.parametrize("q, omega", [(0.5, 0.1), (0.9, 0.05)])
    def test_example1(self, q, omega):
        fx = fixture("example1", q=q, omega=omega)
        traj = solve_direct(fx.problem, 40)
        err = max(abs(traj.values[p] - fx.solution(p)) for p in traj.lattice.points)
        assert err < 1e-6
        res = max(abs(el_residual(fx.problem, traj, t)) for t in _interior_resolvable(traj))
        assert res < 1e-6

    @pytest.mark.parametrize(
        "a, b, alpha, beta", [(0.0, 1.0, 0.5, 2.0), (-0.3, 1.7, 1.0, -2.0), (-2.0, 0.9, 3.0, 0.25)]
    )
    def test_example2_generic(self, a, b, alpha, beta):
        fx = fixture("example2", a=a, b=b, alpha=alpha, beta=beta)
        traj = solve_direct(fx.problem, 40)
        err = max(abs(traj.values[p] - fx.solution(p)) for p in traj.lattice.points)
        assert err < 1e-6
        res = max(abs(el_residual(fx.problem, traj, t)) for t in _interior_resolvable(traj))
        assert res < 1e-6

    def test_non_quadratic_lagrangian(self):
        # f = cosh(v): EL gives D sinh(Dy) = 0, so y affine
        L = Lagrangian(lambda t, u, v: np.cosh(v))
        pr = VariationalProblem(L, 0.0, 1.0, 0.0, 1.5, QOmegaParams(0.6, 0.2))
        traj = solve_direct(pr, 25)
        assert max(abs(traj.values[p] - 1.5 * p) for p in traj.lattice.points) < 1e-6

    def test_deterministic(self):
        fx = fixture("example1")
        t1, t2 = solve_direct(fx.problem, 20), solve_direct(fx.problem, 20)
        assert t1.values == t2.values

    def test_depth_validation(self):
        fx = fixture("example1")
        with pytest.raises(ValueError):
            solve_direct(fx.problem, 2)

    def test_max_iterations(self):
        L = Lagrangian(lambda t, u, v: np.cosh(v) + u**4)
        pr = VariationalProblem(L, 0.0, 1.0, 0.0, 3.0, QOmegaParams(0.5, 0.25))
        with pytest.raises(MaxIterations) as info:
            solve_direct(pr, 20, SolveOptions(max_iter=1))
        assert info.value.grad_norm > 0

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_unbounded_objective(self):
        L = Lagrangian(lambda t, u, v: u - v * v, lambda t, u, v: 1.0 + 0.0 * u, lambda t, u, v: -2.0 * v)
        pr = VariationalProblem(L, 0.0, 1.0, 0.0, 1.0, QOmegaParams(0.5, 0.25))
        with pytest.raises(MaxIterations):
            solve_direct(pr, 10, SolveOptions(max_iter=200))

    def test_stationary_start_is_returned(self):
        # the linear start is the stationary point of -v^2; no descent is claimed
        L = Lagrangian(lambda t, u, v: -v * v, lambda t, u, v: 0.0 * u, lambda t, u, v: -2.0 * v)
        pr = VariationalProblem(L, 0.0, 1.0, 0.0, 1.0, QOmegaParams(0.5, 0.25))
        traj = solve_direct(pr, 10)
        assert traj.info["iterations"] == 0


class TestIsoperimetric:
    def test_normal_case_residual(self):
        pr, con, y, lam = isoperimetric_instance()
        lat = check_lattice(pr.params, pr.a, pr.b)
        for t in lat.points:
            assert abs(isoperimetric_residual(pr, con, y, lam, 1.0, t)) < 1e-8

    def test_reductions(self):
        pr, con, y, lam = isoperimetric_instance()
        for t in (0.0, 0.25, 0.75):
            assert isoperimetric_residual(pr, con, y, 0.0, 1.0, t) == pytest.approx(el_residual(pr, y, t))
            g_only = VariationalProblem(con.g, pr.a, pr.b, pr.alpha, pr.beta, pr.params)
            assert isoperimetric_residual(pr, con, y, 1.0, 0.0, t) == pytest.approx(-el_residual(g_only, y, t))

    def test_both_zero(self):
        pr, con, y, _ = isoperimetric_instance()
        with pytest.raises(BothMultipliersZero):
            isoperimetric_residual(pr, con, y, 0.0, 0.0, 0.25)

    @pytest.mark.parametrize("k", [0.8, -0.4, 2.0])
    def test_estimate_multiplier_normal(self, k):
        pr, con, y, lam = isoperimetric_instance(k=k)
        pts = check_lattice(pr.params, pr.a, pr.b).points
        fit = estimate_multiplier(pr, con, y, pts)
        assert fit.lambda0 > 1e-3
        assert fit.ratio == pytest.approx(lam, abs=1e-8)
        assert math.hypot(fit.lambda0, fit.lam) == pytest.approx(1.0)
        assert fit.residual_norm < 1e-8

    def test_estimate_multiplier_abnormal(self):
        p = QOmegaParams(0.5, 0.25)
        f = Lagrangian(lambda t, u, v: v * v + u, lambda t, u, v: 1.0 + 0 * u, lambda t, u, v: 2 * v)
        pr = VariationalProblem(f, 0.0, 1.0, 0.0, 1.0, p)
        con = IsoperimetricConstraint(v_squared(), 1.0)
        fit = estimate_multiplier(pr, con, polynomial([0.0, 1.0]), check_lattice(p, 0, 1).points)
        assert abs(fit.lambda0) < 1e-8

    def test_estimate_multiplier_unrelated(self):
        pr, con, _, _ = isoperimetric_instance()
        y = polynomial([0, 0, 0, 1])
        fit = estimate_multiplier(pr, con, y, check_lattice(pr.params, 0, 1).points)
        assert fit.residual_norm > 0.1

    def test_degenerate(self):
        p = QOmegaParams(0.5, 0.25)
        pr = VariationalProblem(v_squared(), 0.0, 1.0, 0.0, 1.0, p)
        con = IsoperimetricConstraint(v_squared(), 1.0)
        with pytest.raises(DegenerateSystem):
            estimate_multiplier(pr, con, polynomial([0.0, 1.0]), [0.0, 0.25, 1.0])
        with pytest.raises(ValueError):
            estimate_multiplier(pr, con, polynomial([0.0, 1.0]), [0.0])

    def test_scale_invariance(self):
        pr, con, y, _ = isoperimetric_instance(k=0.3)
        pts = check_lattice(pr.params, 0, 1).points
        base = estimate_multiplier(pr, con, y, pts).ratio
        pr3 = VariationalProblem(pr.lagrangian.scaled(3.0), pr.a, pr.b, pr.alpha, pr.beta, pr.params)
        con3 = IsoperimetricConstraint(con.g.scaled(3.0), con.k)
        assert estimate_multiplier(pr3, con3, y, pts).ratio == pytest.approx(base, abs=1e-10)


class TestNonholonomic:
    def setup_method(self):
        self.p = QOmegaParams(0.5, 0.25)
        f = TwoVariableLagrangian(lambda t, u1, u2, v1, v2: v1**2 + v2**2)
        self.problem = TwoVariableProblem(f, 0.0, 1.0, (0.0, 1.0), (2.0, 3.0), self.p)
        self.g = TwoVariableLagrangian(lambda t, u1, u2, v1, v2: v1 - v2)

    def test_equal_slopes(self):
        ys = (polynomial([0.0, 2.0]), polynomial([1.0, 2.0]))
        for t in (0.0, 0.25, self.p.omega0, 0.75):
            res = nonholonomic_residual(self.problem, self.g, lambda t: 0.0, ys, t)
            assert abs(res.el1) < 1e-6 and abs(res.el2) < 1e-6
            assert abs(res.violation) < 1e-12

    def test_zero_constraint(self):
        zero = TwoVariableLagrangian(lambda t, u1, u2, v1, v2: 0.0)
        ys = (polynomial([0.0, 0.0, 1.0]), polynomial([1.0, 2.0]))
        res = nonholonomic_residual(self.problem, zero, lambda t: 5.0, ys, 0.25)
        # D(2 D t^2) = 2(1+q), second component affine
        assert res.el1 == pytest.approx(2 * 1.5, abs=1e-6)
        assert abs(res.el2) < 1e-6
        assert res.violation == 0.0

    def test_violation_reported(self):
        ys = (polynomial([0.0, 2.0]), polynomial([1.0, 2.5]))
        res = nonholonomic_residual(self.problem, self.g, lambda t: 0.0, ys, 0.25)
        assert res.violation == pytest.approx(-0.5)


class TestConvexity:
    def test_example_lagrangians_pass(self):
        for name in ("example1", "example2"):
            L = fixture(name).problem.lagrangian
            rep = check_joint_convexity(L, [0.0, 0.25, 0.5, 1.0], 200)
            assert rep.passed
            assert "not a proof" in rep.note

    def test_concave_fails(self):
        L = Lagrangian(lambda t, u, v: -v * v, lambda t, u, v: 0 * u, lambda t, u, v: -2 * v)
        rep = check_joint_convexity(L, [0.0], 100)
        assert not rep.passed and rep.worst_margin < 0

    def test_finite_difference_partials(self):
        rep = check_joint_convexity(Lagrangian(lambda t, u, v: u * u + np.exp(v)), [0.0, 1.0], 100, radius=3)
        assert rep.passed

import math

import numpy as np
import pytest

from dynflow import variational as V
from dynflow.diffchars import Region, ScalarGrid
from dynflow.expr import DSLError, parse_expr
from dynflow.polynomials import Polynomial, monomials, random_harmonic, trial_rng

XY = ("x1", "x2")


def solve(g_text, n=65, lo=-1.0, hi=1.0, **kw):
    region = Region.cube(2, lo, hi, n)
    g = parse_expr(g_text, XY)
    return V.relax_dirichlet(V.DirichletProblem.from_expr(g, region, **kw)), region, g


def exact(g, region):
    return ScalarGrid.sample(g, region).values


@pytest.mark.parametrize("a,b,tol,expected", [
    (1e-9, 1e-8, 1e-6, True),
    (1.0, 2.0, 1e-6, True),
    (1e-9, 1.0, 1e-6, False),
    (5e-6, 1.0, 1e-6, False),
    (5e-6, 5e-6, 1e-6, False),
])
def test_agreement_rule(a, b, tol, expected):
    assert V.agreement(a, b, tol) is expected


def test_nonincreasing_helper():
    assert V.nonincreasing([3.0, 2.0, 2.0])
    assert not V.nonincreasing([1.0, 1.0 + 1e-15])
    assert V.nonincreasing([1.0, 1.0 + 2.2e-16], ulps=2)


def test_monomials_graded_order():
    assert monomials(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_random_polynomials_are_reproducible():
    a = Polynomial.random(3, 3, trial_rng(7, 2))
    b = Polynomial.random(3, 3, trial_rng(7, 2))
    assert a == b
    assert a != Polynomial.random(3, 3, trial_rng(7, 3))


def test_random_harmonic_has_zero_laplacian():
    p = random_harmonic(3, trial_rng(0, 0))
    lap = p.derivative(0).derivative(0).terms + p.derivative(1).derivative(1).terms
    total = {}
    for e, c in lap:
        total[e] = total.get(e, 0.0) + c
    assert all(abs(c) <= 1e-12 for c in total.values())


def test_polynomial_derivative_and_expr_agree():
    p = Polynomial.random(2, 3, trial_rng(1, 1))
    pts = np.random.default_rng(0).uniform(-1, 1, (10, 2))
    from dynflow.expr import evaluate_on
    assert np.allclose(evaluate_on(p.to_expr(), XY, pts), p(pts), atol=1e-14)


def test_stokes_suite_small():
    table = V.verify_stokes_link(6, seed=3)
    assert table.all_agree
    for row in table.rows:
        if row.kind == "gradient":
            assert row.integral <= 1e-6 and row.differential <= 1e-6


def test_gauss_suite_small():
    table = V.verify_gauss_link(6, seed=3)
    assert table.all_agree
    assert [r.kind for r in table.rows[:2]] == ["solenoidal", "generic"]


def test_harmonic_suite_small():
    table = V.verify_harmonic_link(6, seed=3)
    assert table.all_agree


def test_suites_are_bitwise_reproducible():
    a = V.verify_stokes_link(4, seed=11, loops=5)
    b = V.verify_stokes_link(4, seed=11, loops=5)
    assert [(r.integral, r.differential) for r in a.rows] == [(r.integral, r.differential) for r in b.rows]


def test_rotation_trial_agrees_through_escape():
    from dynflow.diffchars import skew_residual
    from dynflow.expr import parse_flow_spec
    from dynflow.integral import circulation, parse_curve_spec
    f = parse_flow_spec("dim=2; a1=-x2; a2=x1")
    c = parse_curve_spec("dim=2; closed=true; x1(t)=cos(2*pi*t); x2(t)=sin(2*pi*t)")
    assert V.agreement(abs(circulation(f, c)), skew_residual(f, Region.cube(2)), 1e-6)


def test_constant_boundary_gives_constant_interior():
    res, region, _ = solve("0.1", n=17)
    assert np.all(res.grid.values == 0.1)


@pytest.mark.parametrize("g", ["x^2 - y^2", "x^3 - 3*x*y^2"])
def test_dirichlet_polynomial_fixtures(g):
    res, region, expr = solve(g)
    u = res.grid.values
    assert np.max(np.abs(u - exact(expr, region))) <= 5e-3
    mask = V.boundary_mask(u.shape)
    assert u[~mask].min() >= u[mask].min() and u[~mask].max() <= u[mask].max()
    assert res.residual_monotone
    assert res.residuals[-1] <= 1e-8


def test_dirichlet_second_order_convergence():
    # exp(x)sin(y) is harmonic but not reproduced exactly by the 5-point scheme
    errs = []
    for n in (9, 17, 33):
        res, region, g = solve("exp(x)*sin(y)", n=n, lo=0.0, hi=1.0, tol=1e-12)
        errs.append(np.max(np.abs(res.grid.values - exact(g, region))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 <= o <= 2.2 for o in orders), orders


def test_three_dimensional_dirichlet():
    region = Region.cube(3, 0.0, 1.0, 9)
    g = parse_expr("x1^2 - x3^2 + x1*x2", ("x1", "x2", "x3"))
    res = V.relax_dirichlet(V.DirichletProblem.from_expr(g, region, tol=1e-10))
    assert np.max(np.abs(res.grid.values - exact(g, region))) <= 1e-9
    assert res.residual_monotone


def test_sor_option_converges():
    res, region, g = solve("x^2 - y^2", n=33, omega=1.8)
    assert np.max(np.abs(res.grid.values - exact(g, region))) <= 1e-8


def test_nonconvergence_is_reported():
    with pytest.raises(V.NonConvergenceError):
        solve("x^2 - y^2", n=33, max_iters=3)


@pytest.mark.parametrize("kwargs", [dict(tol=0.0), dict(omega=2.0)])
def test_problem_validation(kwargs):
    region = Region.cube(2, 0, 1, 5)
    with pytest.raises(ValueError):
        V.DirichletProblem(region, np.zeros((5, 5)), **kwargs)


def test_energy_examples():
    region = Region.cube(2, 0.0, 1.0, 11)
    assert V.dirichlet_energy(ScalarGrid(region, np.full((11, 11), 3.0))) == 0.0
    x1 = ScalarGrid.sample(parse_expr("x1", XY), region)
    assert abs(V.dirichlet_energy(x1) - 1.0) <= 1e-12
    shifted = ScalarGrid(region, x1.values + 5.0)
    assert abs(V.dirichlet_energy(shifted) - V.dirichlet_energy(x1)) <= 1e-12


def test_energy_difference_matches_direct_difference():
    region = Region.cube(2, 0.0, 1.0, 9)
    rng = np.random.default_rng(0)
    phi = ScalarGrid(region, rng.uniform(-1, 1, (9, 9)))
    delta = V.random_perturbation((9, 9), rng, 0.1)
    direct = V.dirichlet_energy(ScalarGrid(region, phi.values + delta)) - V.dirichlet_energy(phi)
    assert abs(V.energy_difference(phi, delta) - direct) <= 1e-12


def test_gauss_seidel_sweeps_never_raise_energy():
    res, region, _ = solve("x^3 - 3*x*y^2", n=17, tol=1e-6)
    # replay the sweeps and record the energy
    from dynflow import _relax
    u = res.grid.values.copy()
    mask = V.boundary_mask(u.shape)
    u[~mask] = 0.0
    energies = []
    for _ in range(200):
        energies.append(V.dirichlet_energy(ScalarGrid(region, u)))
        _relax.sweep(u, region.spacing, 1.0)
    assert V.nonincreasing(energies, ulps=8)


def test_discrete_harmonic_strictly_minimizes_energy():
    res, _, _ = solve("x^3 - 3*x*y^2", n=33)
    stats = V.stationarity_probe(res.grid, 100, 1e-3, seed=0)
    assert stats.positive == 100
    half = V.stationarity_probe(res.grid, 100, 5e-4, seed=0)
    ratio = stats.energy_differences / half.energy_differences
    assert np.all((ratio > 3.9) & (ratio < 4.1))


def test_non_harmonic_has_descent_direction():
    region = Region.cube(2, -1.0, 1.0, 33)
    phi = ScalarGrid.sample(parse_expr("x^2 + y^2", XY), region)
    assert V.energy_difference(phi, V.descent_direction(phi, 1e-3)) < 0
    assert V.minimality_defect(phi, 10, 1e-3, 0) > 0


def test_perturbations_vanish_on_boundary():
    d = V.random_perturbation((9, 9), np.random.default_rng(1), 0.5)
    assert np.all(d[V.boundary_mask(d.shape)] == 0.0)
    assert np.max(np.abs(d)) == pytest.approx(0.5)


def test_boundary_file(fixture_text):
    g, region = V.parse_boundary_spec(fixture_text("cubic.bnd"), 17)
    assert region.lo == (-1.0, -1.0) and region.counts == (17, 17)
    g2, r2 = V.parse_boundary_spec("dim=2; g=x1", 5)
    assert r2.lo == (0.0, 0.0) and r2.hi == (1.0, 1.0)
    with pytest.raises(DSLError):
        V.parse_boundary_spec("dim=2; q=x1")

import math

import numpy as np
import pytest

from dynflow import diffchars as D
from dynflow.expr import FlowField, gradient_flow, parse_expr, parse_flow_spec

XY = ("x1", "x2")


def flow(text):
    return parse_flow_spec(text)


def test_region_validation():
    with pytest.raises(ValueError):
        D.Region((0.0,), (0.0,), (5,))
    with pytest.raises(ValueError):
        D.Region((0.0,), (1.0,), (1,))
    r = D.Region((0.0, -1.0), (2.0, 1.0), (3, 5))
    assert r.nodes().shape == (3, 5, 2)
    assert np.allclose(r.spacing, [1.0, 0.5])


def test_skew_residual_examples():
    region = D.Region.cube(2, -1, 1, 17)
    grad = gradient_flow(parse_expr("x1*x2", XY), dim=2)
    assert D.skew_residual(grad, region) <= 1e-10
    assert abs(D.skew_residual(flow("dim=2; a1=-x2; a2=x1"), region) - 2.0) <= 1e-9
    assert D.skew_residual(flow("dim=2; a1=3; a2=-2"), region) == 0.0


def test_divergence_residual_examples():
    assert D.divergence_residual(flow("dim=2; a1=-x2; a2=x1"), D.Region.cube(2, -1, 1, 9)) == 0.0
    ident = flow("dim=3; a1=x1; a2=x2; a3=x3")
    assert abs(D.divergence_residual(ident, D.Region.cube(3, -1, 1, 5)) - 3.0) <= 1e-9
    sq = flow("dim=2; a1=x1^2; a2=0")
    assert abs(D.divergence_residual(sq, D.Region.cube(2, 0, 1, 11)) - 2.0) <= 1e-9


def test_potential_reconstruction_staircase():
    f = flow("dim=2; a1=x2; a2=x1")
    region = D.Region((0.0, 0.0), (2.0, 3.0), (33, 33))
    phi, residual = D.reconstruct_potential(f, region)
    assert abs(phi.values[-1, -1] - phi.values[0, 0] - 6.0) <= 1e-6
    assert phi.values[0, 0] == 0.0
    assert residual <= 1e-9
    # nodal values match x1*x2 everywhere: trapezoid is exact on affine integrands
    x = region.nodes()
    assert np.max(np.abs(phi.values - x[..., 0] * x[..., 1])) <= 1e-12


def test_rotation_is_path_dependent():
    f = flow("dim=2; a1=-x2; a2=x1")
    for n in (9, 33, 65):
        _, residual = D.reconstruct_potential(f, D.Region.cube(2, 0, 1, n))
        assert residual >= 1.0


def test_gradient_path_residual_shrinks_quadratically():
    f = gradient_flow(parse_expr("sin(x1)*exp(x2)", XY), dim=2)
    res = [D.reconstruct_potential(f, D.Region.cube(2, 0, 1, n))[1] for n in (9, 17, 33)]
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert all(1.8 <= o <= 2.2 for o in orders), orders


def test_laplacian_residual_examples():
    region = D.Region.cube(2, 0, 1, 21)
    assert D.laplacian_residual(parse_expr("x1^2 - x2^2", XY), region) <= 1e-9
    assert abs(D.laplacian_residual(parse_expr("x1^2 + x2^2", XY), region) - 4.0) <= 1e-9
    assert D.laplacian_residual(parse_expr("x1^3 - 3*x1*x2^2", XY), region) <= 1e-7
    with pytest.raises(ValueError):
        D.laplacian_residual(parse_expr("x1", XY), D.Region.cube(2, 0, 1, 2))


@pytest.mark.parametrize("name,expected", [
    ("harmonic_grad.flow", dict(skew_closed=True, direct_closed=True, laminar=True, harmonic=True)),
    ("rot2d.flow", dict(skew_closed=False, direct_closed=True, laminar=False, harmonic=False)),
    ("identity3d.flow", dict(skew_closed=True, direct_closed=False, laminar=True, harmonic=False)),
])
def test_classification_fixtures(fixture_text, name, expected):
    f = parse_flow_spec(fixture_text(name))
    report = D.classify_flow(f, D.Region.cube(f.dim))
    assert report.verdicts == expected


def test_classification_verdicts_follow_residuals():
    f = flow("dim=2; a1=x1 + x2; a2=x1 - x2")
    report = D.classify_flow(f, D.Region.cube(2, -1, 1, 9))
    for key, name in (("skew", "skew_closed"), ("divergence", "direct_closed")):
        assert report.verdicts[name] == (report.residuals[key] <= report.tolerances[key])
    assert report.verdicts["harmonic"] <= report.verdicts["laminar"] <= report.verdicts["skew_closed"]


def test_gradient_skew_residual_order():
    phi = parse_expr("sin(x1)*exp(x2) + x1^4*x2", XY)
    region = D.Region.cube(2, -1, 1, 9)
    f = FlowField(2, (parse_expr("cos(x1)*exp(x2) + 4*x1^3*x2", XY),
                      parse_expr("sin(x1)*exp(x2) + x1^4", XY)))
    # exact gradient: skew residual is pure difference error of the mixed partials
    errs = [D.skew_residual(f, region, h) for h in (0.1, 0.05)]
    assert 1.8 <= math.log2(errs[0] / errs[1]) <= 2.2
    assert D.skew_residual(gradient_flow(phi, dim=2), region) <= 1e-6

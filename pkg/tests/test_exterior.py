import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynflow import exterior as ext
from dynflow.exterior import GradedElement as G


def perm_sign(seq):
    # parity by explicit transposition sorting
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        j = seq.index(min(seq[i:]), i)
        if j != i:
            seq[i], seq[j] = seq[j], seq[i]
            sign = -sign
    return sign


def laplace_det(m):
    m = [list(r) for r in m]
    if len(m) == 1:
        return m[0][0]
    return sum((-1) ** j * m[0][j] * laplace_det([r[:j] + r[j + 1:] for r in m[1:]]) for j in range(len(m)))


def oracle_wedge(u, v):
    # antisymmetrize the tensor product coefficient by coefficient
    out = {}
    for (I, a), (J, b) in itertools.product(zip(ext.basis(u.dim, u.grade), u.coeffs),
                                           zip(ext.basis(v.dim, v.grade), v.coeffs)):
        K = I + J
        if len(set(K)) < len(K):
            continue
        key = tuple(sorted(K))
        out[key] = out.get(key, 0.0) + perm_sign(K) * a * b
    return out


def random_element(rng, dim, grade):
    return G(dim, grade, rng.uniform(-1, 1, len(ext.basis(dim, grade))))


def test_basis_is_lexicographic():
    assert ext.basis(4, 2) == ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
    assert ext.basis(3, 0) == ((),)


@pytest.mark.parametrize("left,right,expected", [
    ("e1", "e2", "e12"),
    ("e2", "e1", "-1*e12"),
    ("e1", "e23", "e123"),
    ("e2", "e13", "-1*e123"),
])
def test_wedge_of_basis_blades(left, right, expected):
    u, v = ext.parse_element(left, 3), ext.parse_element(right, 3)
    assert ext.wedge(u, v).isclose(ext.parse_element(expected, 3))


def test_wedge_grade_overflow_and_dimension_mismatch():
    with pytest.raises(ext.GradeOverflowError):
        ext.wedge(G.blade(3, (1, 2)), G.blade(3, (1, 3)))
    with pytest.raises(ext.AlgebraError):
        ext.wedge(G.vector([1, 0]), G.vector([1, 0, 0]))


def test_wedge_with_itself_vanishes():
    v = G.vector([1.0, 2.0, 3.0])
    assert ext.norm(v ^ v) == 0.0


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
def test_wedge_matches_tensor_oracle(dim):
    rng = np.random.default_rng(dim)
    for _ in range(50):
        p = int(rng.integers(0, dim + 1))
        q = int(rng.integers(0, dim - p + 1))
        u, v = random_element(rng, dim, p), random_element(rng, dim, q)
        w = ext.wedge(u, v)
        expected = oracle_wedge(u, v)
        for idx, c in zip(ext.basis(dim, p + q), w.coeffs):
            assert abs(c - expected.get(idx, 0.0)) <= 1e-12


@pytest.mark.parametrize("dim,grade,expected", [
    (3, (1,), ((2, 3), 1)),
    (3, (2,), ((1, 3), -1)),
    (3, (1, 2), ((3,), 1)),
    (2, (1,), ((2,), 1)),
    (2, (2,), ((1,), -1)),
    (4, (1, 3), ((2, 4), -1)),
])
def test_hodge_of_basis_blades(dim, grade, expected):
    star = ext.hodge_dual(G.blade(dim, grade))
    idx, sign = expected
    assert star.isclose(G.blade(dim, idx, sign))


def test_hodge_sign_follows_pseudoscalar_definition():
    # e_I ^ *e_I = e_1..n for every basis blade
    for dim in range(1, 6):
        top = G.pseudoscalar(dim)
        for grade in range(dim + 1):
            for idx in ext.basis(dim, grade):
                e = G.blade(dim, idx)
                assert (e ^ ext.hodge_dual(e)).isclose(top)


def test_scalar_norm_and_cosine():
    u = ext.parse_element("3*e12 + 4*e13", 3)
    assert ext.norm(u) == 5.0
    assert ext.normalized_measure(u, u) == 1.0
    assert ext.normalized_measure(u, -u) == -1.0
    assert math.isclose(ext.norm((G.vector([1, 1, 0])) ^ G.vector([0, 0, 1])), math.sqrt(2))
    with pytest.raises(ext.AlgebraError):
        ext.normalized_measure(u, G.zero(3, 2))


def test_pairing_needs_form_and_vector():
    f = ext.conjugate(G.vector([1.0, 2.0]))
    assert ext.pair_form_vector(f, G.vector([3.0, 4.0])) == 11.0
    with pytest.raises(ext.AlgebraError):
        ext.pair_form_vector(G.vector([1.0, 2.0]), G.vector([3.0, 4.0]))


@pytest.mark.parametrize("m,n", [(1, 3), (2, 3), (2, 4), (3, 3), (3, 5), (4, 4)])
def test_blade_coefficients_are_minors(m, n):
    rng = np.random.default_rng(m * 10 + n)
    t = rng.uniform(-1, 1, (m, n))
    coeffs = ext.blade_coefficients(t)
    for idx, c in zip(ext.basis(n, m), coeffs):
        cols = [i - 1 for i in idx]
        assert abs(c - laplace_det(t[:, cols].T.tolist())) <= 1e-12
    assert np.allclose(coeffs, ext.blade_from_vectors(t).coeffs, atol=1e-12)


def test_blade_coefficients_batched_shape():
    t = np.zeros((5, 7, 2, 3))
    assert ext.blade_coefficients(t).shape == (5, 7, 3)


def test_parse_element_roundtrip_and_errors():
    u = ext.parse_element("2*e21", 3)
    assert u.isclose(G.blade(3, (1, 2), -2.0))
    assert ext.parse_element("e11", 3).isclose(G.zero(3, 2))
    for bad in ("", "e1 + e12", "3**e1"):
        with pytest.raises(ext.AlgebraError):
            ext.parse_element(bad, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_hodge_is_isometry_and_involution(dim, seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(0, dim + 1))
    u, v = random_element(rng, dim, p), random_element(rng, dim, p)
    assert math.isclose(ext.scalar_product(u, v), ext.scalar_product(ext.hodge_dual(u), ext.hodge_dual(v)),
                        abs_tol=1e-12)
    twice = ext.hodge_dual(ext.hodge_dual(u))
    assert twice.isclose((-1) ** (p * (dim - p)) * u)

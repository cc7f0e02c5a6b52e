import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpcid.basis import (
    PolynomialFamily,
    UnivariateBasis,
    evaluate_polynomial,
    gauss_quadrature,
    recurrence_coefficients,
    univariate_inner_product,
    weight_moment,
)
from oracles import orthonormal_value, weight_moment_mp

FAMILIES = [
    PolynomialFamily("hermite"),
    PolynomialFamily("legendre"),
    PolynomialFamily("laguerre", 0.0),
    PolynomialFamily("laguerre", 1.5),
    PolynomialFamily("jacobi", 0.5, 1.0),
    PolynomialFamily("jacobi", -0.5, -0.5),
    PolynomialFamily("jacobi", 2.0, 0.0),
]


def test_hermite_q1():
    rule = gauss_quadrature(PolynomialFamily("hermite"), 1)
    assert rule.nodes.tolist() == [0.0]
    assert rule.weights.tolist() == [1.0]


def test_hermite_q2():
    rule = gauss_quadrature(PolynomialFamily("hermite"), 2)
    np.testing.assert_allclose(rule.nodes, [-1, 1], atol=1e-14)
    np.testing.assert_allclose(rule.weights, [0.5, 0.5], atol=1e-14)


def test_legendre_q2():
    rule = gauss_quadrature(PolynomialFamily("legendre"), 2)
    np.testing.assert_allclose(rule.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-14)
    np.testing.assert_allclose(rule.weights, [0.5, 0.5], atol=1e-14)


def test_hermite_nodes_match_numpy():
    x, w = np.polynomial.hermite_e.hermegauss(12)
    rule = gauss_quadrature(PolynomialFamily("hermite"), 12)
    np.testing.assert_allclose(rule.nodes, x, atol=1e-12)
    np.testing.assert_allclose(rule.weights, w / w.sum(), atol=1e-13)


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.token)
def test_rule_structure(family):
    for q in range(1, 11):
        rule = gauss_quadrature(family, q)
        assert rule.order == q
        assert abs(rule.weights.sum() - 1) < 1e-12
        assert np.all(rule.weights > 0)
        assert np.all(np.diff(rule.nodes) > 0)


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.token)
def test_weight_moments_match_high_precision(family):
    for k in range(21):
        exact = weight_moment_mp(family.kind, k, family.a, family.b)
        assert weight_moment(family, k) == pytest.approx(exact, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.token)
def test_quadrature_exactness(family):
    for q in range(1, 11):
        rule = gauss_quadrature(family, q)
        for k in range(2 * q):
            exact = weight_moment(family, k)
            approx = rule.integrate(rule.nodes**k)
            # relative to E|X|^k, so odd (zero) moments are judged on the same
            # scale as the summands that cancel
            scale = max(abs(exact), rule.integrate(np.abs(rule.nodes) ** k))
            assert abs(approx - exact) <= 1e-10 * scale, (q, k)


def test_weight_moment_values():
    assert [weight_moment(PolynomialFamily("hermite"), k) for k in range(7)] == [1, 0, 1, 0, 3, 0, 15]
    leg = [weight_moment(PolynomialFamily("legendre"), k) for k in range(5)]
    np.testing.assert_allclose(leg, [1, 0, 1 / 3, 0, 1 / 5])
    # gamma(a+1): E[X] = a + 1
    assert weight_moment(PolynomialFamily("laguerre", 2.0), 1) == pytest.approx(3.0)


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.token)
def test_gram_identity(family):
    for d in range(0, 11):
        basis = UnivariateBasis(family, d)
        rule = gauss_quadrature(family, d + 1)
        V = basis.vandermonde(rule.nodes)
        gram = V.T @ (rule.weights[:, None] * V)
        np.testing.assert_allclose(gram, np.eye(d + 1), atol=1e-9)


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.token)
def test_unit_norm_at_order_j_plus_1(family):
    basis = UnivariateBasis(family, 10)
    for j in range(11):
        rule = gauss_quadrature(family, j + 1)
        vals = evaluate_polynomial(basis, j, rule.nodes)
        assert abs(rule.integrate(vals**2) - 1) < 1e-10


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.token)
def test_values_match_closed_forms(family):
    basis = UnivariateBasis(family, 8)
    x = np.linspace(-0.9, 0.9, 7) if family.kind in ("legendre", "jacobi") else np.linspace(0.1, 4, 7)
    for j in range(9):
        np.testing.assert_allclose(basis(j, x), orthonormal_value(family.kind, j, x, family.a, family.b),
                                   rtol=1e-9, atol=1e-9)


def test_hermite_values():
    b = UnivariateBasis(PolynomialFamily("hermite"), 3)
    assert evaluate_polynomial(b, 0, 12.3) == 1.0
    assert evaluate_polynomial(b, 1, 2.0) == pytest.approx(2.0, abs=1e-15)
    assert evaluate_polynomial(b, 3, 1.5) == pytest.approx((1.5**3 - 4.5) / math.sqrt(6), abs=1e-14)
    assert evaluate_polynomial(b, 3, 1.5) == pytest.approx(-0.45928, abs=1e-5)


def test_degree_index_error():
    b = UnivariateBasis(PolynomialFamily("hermite"), 2)
    with pytest.raises(IndexError):
        evaluate_polynomial(b, 3, 0.0)
    with pytest.raises(IndexError):
        evaluate_polynomial(b, -1, 0.0)


def test_norms_before_normalisation():
    b = UnivariateBasis(PolynomialFamily("hermite"), 5)
    np.testing.assert_allclose(b.norms, [math.factorial(j) for j in range(6)])


def test_inner_products():
    b = UnivariateBasis(PolynomialFamily("hermite"), 4)
    assert univariate_inner_product(b, [(0, 1)]) == pytest.approx(1.0)
    assert univariate_inner_product(b, [(1, 2)]) == pytest.approx(1.0)
    assert univariate_inner_product(b, [(1, 2), (2, 1)]) == pytest.approx(math.sqrt(2), abs=1e-13)
    # brute force at q=4 through numpy's rule
    x, w = np.polynomial.hermite_e.hermegauss(4)
    brute = np.dot(w / w.sum(), x**2 * (x**2 - 1) / math.sqrt(2))
    assert univariate_inner_product(b, [(1, 2), (2, 1)]) == pytest.approx(brute, abs=1e-13)


@pytest.mark.parametrize("bad", [("laguerre", -1.0, 0.0), ("jacobi", 0.0, -2.0), ("chebyshev", 0, 0)])
def test_invalid_family(bad):
    with pytest.raises(ValueError):
        PolynomialFamily(*bad)


def test_invalid_order():
    with pytest.raises(ValueError):
        gauss_quadrature(PolynomialFamily("hermite"), 0)


def test_token_round_trip():
    for fam in FAMILIES:
        assert PolynomialFamily.from_token(fam.token) == fam


def test_rule_prints_two_columns():
    text = str(gauss_quadrature(PolynomialFamily("legendre"), 3))
    rows = [line.split() for line in text.splitlines()]
    assert len(rows) == 3 and all(len(r) == 2 for r in rows)


def test_jacobi_recurrence_special_case():
    # a + b = -1 makes the generic k=1 formula 0/0
    alpha, beta = recurrence_coefficients(PolynomialFamily("jacobi", -0.5, -0.5), 4)
    assert np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))


@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_hermite_triple_products_symmetric(i, j, k):
    b = UnivariateBasis(PolynomialFamily("hermite"), 6)
    v = univariate_inner_product(b, [(i, 1), (j, 1), (k, 1)])
    w = univariate_inner_product(b, [(k, 1), (i, 1), (j, 1)])
    assert v == pytest.approx(w, abs=1e-12)
    if (i + j + k) % 2 or k > i + j or i > j + k or j > i + k:
        assert abs(v) < 1e-10

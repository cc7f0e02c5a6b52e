import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpcid.basis import PolynomialFamily
from gpcid.gpc import (
    CacheMismatchError,
    DegenerateDistributionError,
    GpcExpansion,
    InnerProductCache,
    MomentVector,
    PolynomialChaosExpansion,
    PropagationError,
    build_inner_product_cache,
    evaluate_expansion,
    expansion_moments,
    get_inner_product_cache,
    high_order_moment,
    low_order_moments,
    project,
    raw_to_central_standardized,
    tensor_quadrature,
)
from gpcid.models import camelback
from gpcid.multiindex import CapacityError, graded_basis_indices
from oracles import brute_force_cache, camelback_coefficient, camelback_moment, nested_sum_moment

H = PolynomialFamily("hermite")


def expansion(c, n=1, d=None):
    c = np.asarray(c, float)
    if d is None:
        d = next(k for k in range(20) if math.comb(n + k, k) == len(c))
    return GpcExpansion(c, (H,) * n, graded_basis_indices(n, d))


class Counter:
    def __init__(self, f):
        self.f, self.calls = f, 0

    def __call__(self, x):
        self.calls += 1
        return self.f(x)


def test_tensor_quadrature():
    tq = tensor_quadrature(H, 4, 3)
    assert len(tq) == 64
    assert abs(tq.weights.sum() - 1) < 1e-10


def test_identity_projection():
    exp = project(lambda t: t[0], tensor_quadrature(H, 3, 1), 2)
    np.testing.assert_allclose(exp.coefficients, [0, 1, 0], atol=1e-14)


def test_constant_projection():
    exp = project(lambda t: 7.0, tensor_quadrature(H, 3, 2), 2)
    np.testing.assert_allclose(exp.coefficients, [7, 0, 0, 0, 0, 0], atol=1e-13)


@pytest.mark.parametrize("n,q", [(1, 5), (2, 3), (3, 2)])
def test_evaluation_count(n, q):
    f = Counter(lambda t: float(np.sum(t**2)))
    exp = project(f, tensor_quadrature(H, q, n), q - 1)
    assert f.calls == q**n == exp.evaluations


def test_low_quadrature_warns():
    with pytest.warns(RuntimeWarning):
        project(lambda t: t[0], tensor_quadrature(H, 2, 1), 3)


def test_propagation_error_carries_node():
    def bad(t):
        if t[0] > 1:
            raise ValueError("boom")
        return 0.0

    with pytest.raises(PropagationError) as info:
        project(bad, tensor_quadrature(H, 3, 1), 2)
    assert info.value.node[0] > 1


def test_camelback_coefficients_match_integration():
    exp = project(lambda t: camelback(t[0]), tensor_quadrature(H, 5, 1), 4)
    ref = [camelback_coefficient(j) for j in range(5)]
    np.testing.assert_allclose(exp.coefficients, ref, atol=1e-3)


def test_camelback_coefficients_converge_in_q():
    ref = np.array([camelback_coefficient(j) for j in range(5)])
    errs = []
    for q in range(5, 13):
        exp = project(lambda t: camelback(t[0]), tensor_quadrature(H, q, 1), 4)
        errs.append(np.abs(exp.coefficients - ref).max())
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_camelback_expansion_at_zero():
    exp = project(lambda t: camelback(t[0]), tensor_quadrature(H, 5, 1), 4)
    assert abs(evaluate_expansion(exp, [0.0]) - math.exp(-1)) < 0.05


def test_evaluate_expansion():
    assert evaluate_expansion(expansion([3.5, 0, 0]), [12.0]) == 3.5
    assert evaluate_expansion(expansion([0, 1, 0]), [1.7]) == pytest.approx(1.7)
    vals = evaluate_expansion(expansion([0, 1, 0]), np.array([[1.0], [2.0]]))
    np.testing.assert_allclose(vals, [1, 2])


def test_low_order_moments():
    assert low_order_moments(expansion([0, 1, 0])) == (0.0, 1.0)
    assert low_order_moments(expansion([2, 3])) == (2.0, 13.0)


def test_camelback_low_moments():
    exp = project(lambda t: camelback(t[0]), tensor_quadrature(H, 5, 1), 4)
    mu1, mu2 = low_order_moments(exp)
    assert mu1 == pytest.approx(camelback_moment(1), rel=5e-3)
    assert mu2 == pytest.approx(camelback_moment(2), rel=5e-3)


def test_camelback_high_moments():
    exp = project(lambda t: camelback(t[0]), tensor_quadrature(H, 5, 1), 4)
    mv = expansion_moments(exp, 4)
    for m in (3, 4):
        assert mv[m] == pytest.approx(camelback_moment(m), rel=0.02)


def test_cache_tiny():
    cache = build_inner_product_cache(1, 1, 2, H)
    entries = {tuple(int(v) for v in i): a for i, a in zip(cache.multi_indices(), cache.values)}
    assert entries == {(0, 2): pytest.approx(1.0), (2, 0): pytest.approx(1.0)}
    assert cache.candidates == 3


def test_cache_matches_brute_force():
    cache = build_inner_product_cache(2, 2, 3, H)
    idx = [tuple(int(v) for v in r) for r in graded_basis_indices(2, 2).indices]
    brute = brute_force_cache(idx, 3, 2)
    got = {tuple(int(v) for v in i): a for i, a in zip(cache.multi_indices(), cache.values)}
    for key, value in brute.items():
        assert got.get(key, 0.0) == pytest.approx(value, abs=1e-10)
    assert all(abs(brute[k]) > 1e-12 for k in got)


def test_cache_candidate_count_4_3_5():
    cache = get_inner_product_cache(4, 3, 5, H)
    assert cache.candidates == 575_757
    assert cache.p == 35


def test_cache_invariants():
    cache = build_inner_product_cache(2, 3, 4, H)
    idx = cache.multi_indices()
    assert np.all(idx.sum(axis=1) == 4)
    assert np.all(np.abs(cache.values) > 0)
    keys = [tuple(r) for r in cache.slots.tolist()]
    assert keys == sorted(keys, reverse=True)


def test_cache_parallel_identical(tmp_path):
    a = build_inner_product_cache(2, 3, 4, H, workers=1)
    b = build_inner_product_cache(2, 3, 4, H, workers=3)
    a.save(tmp_path / "a")
    b.save(tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_cache_file_round_trip(tmp_path):
    cache = build_inner_product_cache(2, 2, 3, [H, PolynomialFamily("legendre")])
    path = tmp_path / "c.gpccache"
    cache.save(path)
    head = path.read_text().splitlines()[0]
    assert head.startswith("GPCCACHE v1 n=2 d=2 m=3 fam=")
    assert "tol=" in head
    back = InnerProductCache.load(path)
    assert back.families == cache.families
    assert np.array_equal(back.slots, cache.slots)
    assert np.array_equal(back.values, cache.values)


def test_cache_guard():
    with pytest.raises(CapacityError):
        build_inner_product_cache(4, 3, 5, H, size_guard=1000)
    with pytest.raises(ValueError):
        build_inner_product_cache(1, 2, 6, H)


def test_cache_mismatch():
    cache = build_inner_product_cache(1, 2, 3, H)
    with pytest.raises(CacheMismatchError):
        high_order_moment(expansion([1, 0, 0, 0]), cache)
    with pytest.raises(CacheMismatchError):
        high_order_moment(expansion([1, 0, 0]), cache, m=4)


def test_disk_cache_reused(tmp_path):
    from gpcid import gpc

    gpc._memory_caches.clear()
    get_inner_product_cache(1, 2, 3, H, cache_dir=tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    gpc._memory_caches.clear()
    cached = get_inner_product_cache(1, 2, 3, H, cache_dir=tmp_path)
    fresh = build_inner_product_cache(1, 2, 3, H)
    assert np.array_equal(cached.slots, fresh.slots)
    assert np.array_equal(cached.values, fresh.values)


def test_gaussian_raw_moments():
    exp = expansion([0, 1, 0])
    assert high_order_moment(exp, build_inner_product_cache(1, 2, 3, H)) == pytest.approx(0, abs=1e-14)
    assert high_order_moment(exp, build_inner_product_cache(1, 2, 4, H)) == pytest.approx(3)


@pytest.mark.parametrize("m", [3, 4, 5])
def test_constant_moments(m):
    exp = expansion([1.7, 0, 0, 0, 0, 0], n=2)
    assert high_order_moment(exp, get_inner_product_cache(2, 2, m, H)) == pytest.approx(1.7**m)


@pytest.mark.parametrize("n,d,m", [(1, 2, 3), (2, 2, 3), (2, 3, 4)])
def test_nested_sum_equivalence(n, d, m):
    rng = np.random.default_rng(n * 100 + d * 10 + m)
    idx = [tuple(int(v) for v in r) for r in graded_basis_indices(n, d).indices]
    cache = get_inner_product_cache(n, d, m, H)
    for _ in range(5):
        c = rng.normal(size=len(idx))
        got = high_order_moment(expansion(c, n, d), cache)
        ref = nested_sum_moment(c, idx, m, n)
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-12)


@settings(max_examples=10)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_sampling_consistency(c):
    exp = expansion(c, n=2, d=2)
    theta = np.random.default_rng(0).standard_normal((1_000_000, 2))
    y = evaluate_expansion(exp, theta)
    mv = expansion_moments(exp, 4)
    for m in range(1, 5):
        sample = y**m
        se = sample.std() / math.sqrt(len(y))
        assert abs(sample.mean() - mv[m]) <= 4 * se + 1e-12


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_variance_non_negative(c):
    for coeffs, n in ((c[:3], 1), (c, 2)):
        mu1, mu2 = low_order_moments(expansion(coeffs, n=n))
        assert mu2 - mu1**2 >= -1e-12 * (1 + mu2)


def test_moment_vector_validation():
    mv = MomentVector((1.0, 2.0, 4.0))
    assert mv[1] == 1.0 and mv[0] == 1.0 and mv.order == 3
    assert mv.variance == 1.0
    with pytest.raises(ValueError):
        MomentVector(())
    with pytest.raises(ValueError):
        MomentVector((1.0, math.nan))


def test_central_conversions():
    s = raw_to_central_standardized((0.0, 1.0))
    assert (s.mean, s.variance) == (0.0, 1.0)
    s = raw_to_central_standardized((1.0, 2.0, 4.0))
    assert s.variance == pytest.approx(1.0)
    assert s.central[2] == pytest.approx(0.0)
    assert s.skewness == pytest.approx(0.0)
    with pytest.raises(DegenerateDistributionError):
        raw_to_central_standardized((2.0, 4.0))


def test_central_against_shifted_sample():
    rng = np.random.default_rng(3)
    y = rng.gamma(2.0, size=200_000)
    raw = [np.mean(y**k) for k in range(1, 5)]
    s = raw_to_central_standardized(raw)
    z = y - y.mean()
    assert s.central[2] == pytest.approx(np.mean(z**3), rel=1e-8)
    assert s.central[3] == pytest.approx(np.mean(z**4), rel=1e-8)


def test_estimator_interface():
    est = PolynomialChaosExpansion(degree=3)
    assert est.get_params()["degree"] == 3
    quad = est.quadrature(1)
    est.fit(quad.nodes, quad.nodes[:, 0] ** 2, sample_weight=quad.weights)
    np.testing.assert_allclose(est.coef_, [1, 0, math.sqrt(2), 0], atol=1e-13)
    assert est.predict([[2.0]])[0] == pytest.approx(4.0)
    assert est.moments_[4] == pytest.approx(105.0)


def test_estimator_fit_model():
    est = PolynomialChaosExpansion(degree=2, max_moment=3).fit_model(lambda t: t[0] + t[1], 2)
    assert est.moments_[2] == pytest.approx(2.0)
    assert est.expansion_.evaluations == 9

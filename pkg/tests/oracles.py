"""Independent reference computations used by the tests.

None of these call into the package's numerical kernels: they use plain
recursion, numpy's own Gauss rules, scipy adaptive integration, mpmath and a
dense LP, so agreement is a genuine cross-check.
"""
from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np
from scipy import integrate
from scipy.optimize import linprog
from scipy.special import eval_genlaguerre, eval_hermitenorm, eval_jacobi, eval_legendre, gammaln


def compositions(m: int, p: int):
    """All length-``p`` tuples of non-negative ints summing to ``m`` (recursive)."""
    if p == 1:
        yield (m,)
        return
    for first in range(m + 1):
        for rest in compositions(m - first, p - 1):
            yield (first,) + rest


def total_degree_set(n: int, d: int) -> set[tuple[int, ...]]:
    return {i for i in itertools.product(range(d + 1), repeat=n) if sum(i) <= d}


# --- univariate families via scipy closed forms ---------------------------

def orthonormal_value(kind: str, j: int, x, a: float = 0.0, b: float = 0.0):
    """Orthonormal polynomial of degree ``j`` from scipy's classical forms."""
    x = np.asarray(x, dtype=float)
    if kind == "hermite":
        return eval_hermitenorm(j, x) / math.sqrt(math.factorial(j))
    if kind == "legendre":
        return eval_legendre(j, x) * math.sqrt(2 * j + 1)
    if kind == "laguerre":
        # norm of L_j^a under the gamma(a+1) probability weight
        norm2 = math.exp(gammaln(j + a + 1) - gammaln(j + 1) - gammaln(a + 1))
        # classical L_j has leading sign (-1)^j; the package's basis is positive
        return (-1) ** j * eval_genlaguerre(j, a, x) / math.sqrt(norm2)
    if kind == "jacobi":
        # probability weight (1-x)^a (1+x)^b / (2^(a+b+1) B(a+1, b+1))
        log_c = (a + b + 1) * math.log(2) + gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2)
        if j == 0:
            return np.ones_like(x)
        log_h = ((a + b + 1) * math.log(2) - math.log(2 * j + a + b + 1) + gammaln(j + a + 1) + gammaln(j + b + 1)
                 - gammaln(j + a + b + 1) - gammaln(j + 1))
        return eval_jacobi(j, a, b, x) / math.sqrt(math.exp(log_h - log_c))
    raise ValueError(kind)


def weight_moment_mp(kind: str, k: int, a: float = 0.0, b: float = 0.0) -> float:
    """``E[X^k]`` of the probability weight at 50 digits."""
    with mpmath.workdps(50):
        if kind == "hermite":
            return float(0 if k % 2 else mpmath.fac2(k - 1))
        if kind == "legendre":
            return float(0 if k % 2 else mpmath.mpf(1) / (k + 1))
        if kind == "laguerre":
            return float(mpmath.rf(a + 1, k))
        # X = 2T - 1, T ~ Beta(b + 1, a + 1)
        p, q = mpmath.mpf(b) + 1, mpmath.mpf(a) + 1
        total = mpmath.mpf(0)
        for r in range(k + 1):
            total += mpmath.binomial(k, r) * 2**r * (-1) ** (k - r) * mpmath.rf(p, r) / mpmath.rf(p + q, r)
        return float(total)


def hermite_expectation(f, order: int = 80) -> float:
    """E[f(Z)], Z ~ N(0,1), by numpy's Gauss-HermiteE rule."""
    x, w = np.polynomial.hermite_e.hermegauss(order)
    return float(np.dot(w, f(x)) / math.sqrt(2 * math.pi))


# --- expansion moments by nested sums --------------------------------------

def nested_sum_moment(coefficients, indices, m: int, n: int) -> float:
    """``sum_{k1..km} c_k1..c_km <psi_k1 .. psi_km>`` with Hermite tensor rules.

    Products of ``m`` basis functions are integrated exactly by a tensor rule
    of order ``ceil((m d + 1) / 2)`` built from numpy's Gauss-HermiteE.
    """
    d = int(max(sum(i) for i in indices))
    q = max(1, math.ceil((m * d + 1) / 2))
    x, w = np.polynomial.hermite_e.hermegauss(q)
    w = w / w.sum()
    grid = np.array(list(itertools.product(x, repeat=n)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=n))), axis=1)
    psi = np.ones((len(indices), len(grid)))
    for k, idx in enumerate(indices):
        for dim, deg in enumerate(idx):
            psi[k] *= orthonormal_value("hermite", int(deg), grid[:, dim])
    c = np.asarray(coefficients, dtype=float)
    total = 0.0
    for combo in itertools.product(range(len(c)), repeat=m):
        prod_c = np.prod(c[list(combo)])
        if prod_c == 0.0:
            continue
        integrand = np.prod(psi[list(combo)], axis=0)
        total += prod_c * float(np.dot(wts, integrand))
    return total


def brute_force_cache(indices, m: int, n: int) -> dict[tuple[int, ...], float]:
    """``a_i`` for every ``|i| = m`` by full tensor quadrature of the product."""
    d = int(max(sum(i) for i in indices))
    q = max(1, math.ceil((m * d + 1) / 2))
    x, w = np.polynomial.hermite_e.hermegauss(q)
    w = w / w.sum()
    grid = np.array(list(itertools.product(x, repeat=n)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=n))), axis=1)
    psi = np.ones((len(indices), len(grid)))
    for k, idx in enumerate(indices):
        for dim, deg in enumerate(idx):
            psi[k] *= orthonormal_value("hermite", int(deg), grid[:, dim])
    out = {}
    for i in compositions(m, len(indices)):
        integrand = np.ones(len(grid))
        coef = math.factorial(m)
        for k, e in enumerate(i):
            if e:
                integrand = integrand * psi[k] ** e
                coef //= math.factorial(e)
        out[i] = coef * float(np.dot(wts, integrand))
    return out


# --- camelback integrals -----------------------------------------------------

def _camelback(x):
    return math.tan(x / 4) + math.exp(x / 3 - 1) + math.tanh(x)


def camelback_moment(m: int) -> float:
    """E[camelback(X)^m], X ~ N(0,1) restricted to |x| <= 6."""
    f = lambda x: _camelback(x) ** m * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return integrate.quad(f, -6, 6, epsabs=1e-14, epsrel=1e-13, limit=400)[0]


def camelback_coefficient(j: int) -> float:
    f = lambda x: (_camelback(x) * float(orthonormal_value("hermite", j, x))
                   * math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi))
    return integrate.quad(f, -6, 6, epsabs=1e-14, epsrel=1e-13, limit=400)[0]


# --- normal distribution -----------------------------------------------------

def phi_cdf_mp(z, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        return float(mpmath.ncdf(z))


def phi_quantile_mp(p, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


# --- transport ---------------------------------------------------------------

def emd_lp(x, u, y, v) -> float:
    """Dense transportation LP, written separately from the package."""
    x = np.asarray(x, float).reshape(len(u), -1)
    y = np.asarray(y, float).reshape(len(v), -1)
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    D = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2)
    k, l = D.shape
    A_ub = np.zeros((k + l, k * l))
    for i in range(k):
        A_ub[i, i * l:(i + 1) * l] = 1.0
    for j in range(l):
        A_ub[k + j, j::l] = 1.0
    flow = min(u.sum(), v.sum())
    res = linprog(D.ravel(), A_ub=A_ub, b_ub=np.concatenate([u, v]), A_eq=np.ones((1, k * l)), b_eq=[flow],
                  bounds=(0, None), method="highs-ds")
    assert res.success, res.message
    return float(res.fun / flow)

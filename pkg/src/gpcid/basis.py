"""Univariate orthonormal polynomial families of the Wiener-Askey scheme.

All weights are probability densities, so quadrature weights sum to one and
inner products are expectations:

========  =====================================  ============
kind      weight                                 support
========  =====================================  ============
hermite   standard normal                        (-inf, inf)
legendre  uniform                                [-1, 1]
laguerre  gamma, x^a e^-x / Gamma(a+1)           [0, inf)
jacobi    (1-x)^a (1+x)^b, normalised            [-1, 1]
========  =====================================  ============

Polynomials are evaluated through the three-term recurrence of the monic
family and rescaled to unit norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

__all__ = [
    "PolynomialFamily",
    "UnivariateBasis",
    "QuadratureRule",
    "recurrence_coefficients",
    "gauss_quadrature",
    "evaluate_polynomial",
    "univariate_inner_product",
    "weight_moment",
]

KINDS = ("hermite", "legendre", "laguerre", "jacobi")


@dataclass(frozen=True)
class PolynomialFamily:
    """Orthogonal polynomial family with its probability weight.

    Parameters
    ----------
    kind : {'hermite', 'legendre', 'laguerre', 'jacobi'}
    a, b : float
        Shape parameters. ``a`` is used by Laguerre and Jacobi, ``b`` by
        Jacobi only. Both must exceed -1.
    """

    kind: str = "hermite"
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"unknown polynomial family {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind in ("laguerre", "jacobi") and not self.a > -1:
            raise ValueError(f"{kind} parameter a must be > -1, got {self.a}")
        if kind == "jacobi" and not self.b > -1:
            raise ValueError(f"jacobi parameter b must be > -1, got {self.b}")
        if kind in ("hermite", "legendre"):
            # parameters are meaningless here; normalise so equality/hashing work
            object.__setattr__(self, "a", 0.0)
            object.__setattr__(self, "b", 0.0)
        elif kind == "laguerre":
            object.__setattr__(self, "b", 0.0)

    @property
    def token(self) -> str:
        """Compact string form, e.g. ``'hermite'`` or ``'jacobi:0.5:1'``."""
        if self.kind == "laguerre":
            return f"laguerre:{self.a:g}"
        if self.kind == "jacobi":
            return f"jacobi:{self.a:g}:{self.b:g}"
        return self.kind

    @classmethod
    def from_token(cls, token: str) -> "PolynomialFamily":
        parts = token.strip().split(":")
        params = [float(v) for v in parts[1:]]
        return cls(parts[0], *params)

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "hermite":
            return (-math.inf, math.inf)
        if self.kind == "laguerre":
            return (0.0, math.inf)
        return (-1.0, 1.0)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss rule for a probability weight: ``sum_j w_j f(nodes_j) ~ E[f]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def __str__(self) -> str:
        return "\n".join(f"{x:+.17e} {w:.17e}" for x, w in zip(self.nodes, self.weights))


def recurrence_coefficients(family: PolynomialFamily, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(alpha, beta)`` of the monic recurrence, each of length ``n``.

    ``p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x)`` with
    ``beta_0 = 1`` (the total mass of the probability weight).
    """
    k = np.arange(n, dtype=float)
    alpha = np.zeros(n)
    beta = np.ones(n)
    if family.kind == "hermite":
        beta[1:] = k[1:]
    elif family.kind == "legendre":
        beta[1:] = k[1:] ** 2 / (4.0 * k[1:] ** 2 - 1.0)
    elif family.kind == "laguerre":
        a = family.a
        alpha[:] = 2.0 * k + a + 1.0
        beta[1:] = k[1:] * (k[1:] + a)
    else:
        a, b = family.a, family.b
        ab = a + b
        if n > 0:
            alpha[0] = (b - a) / (ab + 2.0)
        kk = k[1:]
        s = 2.0 * kk + ab
        alpha[1:] = (b * b - a * a) / (s * (s + 2.0))
        if n > 1:
            # k = 1 separately: the general formula is 0/0 when a + b = -1
            beta[1] = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) ** 2 * (3.0 + ab))
        if n > 2:
            kk = k[2:]
            s = 2.0 * kk + ab
            beta[2:] = (4.0 * kk * (kk + a) * (kk + b) * (kk + ab)) / (s * s * (s + 1.0) * (s - 1.0))
    return alpha, beta


@lru_cache(maxsize=256)
def _gauss_cached(family: PolynomialFamily, q: int) -> QuadratureRule:
    alpha, beta = recurrence_coefficients(family, q)
    if q == 1:
        nodes = alpha[:1].copy()
        weights = np.ones(1)
    else:
        try:
            nodes, vecs = eigh_tridiagonal(alpha, np.sqrt(beta[1:]))
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise ArithmeticError(f"eigen-solver failed for {family} q={q}") from exc
        weights = vecs[0, :] ** 2
        order = np.argsort(nodes)
        nodes, weights = nodes[order], weights[order]
        weights = weights / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights)


def gauss_quadrature(family: PolynomialFamily, q: int) -> QuadratureRule:
    """Gauss quadrature of order ``q`` by the Golub-Welsch eigenvalue method.

    The rule integrates polynomials of degree ``2q - 1`` exactly against the
    family's probability weight.
    """
    if int(q) != q or q < 1:
        raise ValueError(f"quadrature order must be a positive integer, got {q}")
    return _gauss_cached(family, int(q))


@dataclass(frozen=True)
class UnivariateBasis:
    """Orthonormal polynomials ``phi_0 .. phi_d`` of one family.

    Attributes
    ----------
    alpha, beta : ndarray
        Monic recurrence coefficients up to degree ``d``.
    norms : ndarray
        ``<p_j^2>`` of the monic polynomials, i.e. the norms before
        normalisation (``j!`` for Hermite).
    """

    family: PolynomialFamily
    degree: int
    alpha: np.ndarray = field(init=False, repr=False, compare=False)
    beta: np.ndarray = field(init=False, repr=False, compare=False)
    norms: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        alpha, beta = recurrence_coefficients(self.family, self.degree + 1)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "norms", np.cumprod(beta))

    def vandermonde(self, x) -> np.ndarray:
        """Values ``phi_j(x)`` for all ``j``; shape ``x.shape + (d + 1,)``."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (self.degree + 1,))
        out[..., 0] = 1.0
        if self.degree >= 1:
            sb = np.sqrt(self.beta)
            out[..., 1] = (x - self.alpha[0]) / sb[1]
            for j in range(1, self.degree):
                out[..., j + 1] = ((x - self.alpha[j]) * out[..., j] - sb[j] * out[..., j - 1]) / sb[j + 1]
        return out

    def __call__(self, j: int, x):
        return evaluate_polynomial(self, j, x)


def evaluate_polynomial(basis: UnivariateBasis, j: int, x):
    """Orthonormal ``phi_j(x)``; ``x`` may be a scalar or an array."""
    if not 0 <= j <= basis.degree:
        raise IndexError(f"degree index {j} outside 0..{basis.degree}")
    values = basis.vandermonde(x)[..., j]
    return float(values) if np.ndim(values) == 0 else values


def univariate_inner_product(basis: UnivariateBasis, exponents: Iterable[tuple[int, int]]) -> float:
    """``<prod phi_j^e>`` under the family weight, for ``(j, e)`` pairs.

    The quadrature order is chosen so the integrand degree ``sum(j * e)`` is
    integrated exactly.
    """
    exponents = [(int(j), int(e)) for j, e in exponents if e]
    total = sum(j * e for j, e in exponents)
    q = max(1, math.ceil((total + 1) / 2))
    rule = gauss_quadrature(basis.family, q)
    vals = basis.vandermonde(rule.nodes)
    integrand = np.ones_like(rule.nodes)
    for j, e in exponents:
        if not 0 <= j <= basis.degree:
            raise IndexError(f"degree index {j} outside 0..{basis.degree}")
        integrand = integrand * vals[:, j] ** e
    return float(np.dot(rule.weights, integrand))


def weight_moment(family: PolynomialFamily, k: int) -> float:
    """Analytic ``E[X^k]`` of the family's probability weight."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    if family.kind == "hermite":
        return 0.0 if k % 2 else float(np.prod(np.arange(k - 1, 0, -2, dtype=float)))
    if family.kind == "legendre":
        return 0.0 if k % 2 else 1.0 / (k + 1)
    if family.kind == "laguerre":
        a = family.a
        return float(np.exp(gammaln(a + 1 + k) - gammaln(a + 1)))
    # from d/dx[(1-x)^(a+1) (1+x)^(b+1) x^k] integrating to zero:
    # (k + a + b + 2) m_{k+1} = (b - a) m_k + k m_{k-1}
    a, b = family.a, family.b
    prev, cur = 0.0, 1.0
    for j in range(k):
        prev, cur = cur, ((b - a) * cur + j * prev) / (j + a + b + 2.0)
    return cur


def as_families(families: Sequence[PolynomialFamily | str] | PolynomialFamily | str, n: int) -> tuple[PolynomialFamily, ...]:
    """Broadcast a family argument to ``n`` entries."""
    if isinstance(families, (PolynomialFamily, str)):
        families = [families] * n
    fams = tuple(f if isinstance(f, PolynomialFamily) else PolynomialFamily.from_token(f) for f in families)
    if len(fams) != n:
        raise ValueError(f"expected {n} families, got {len(fams)}")
    return fams

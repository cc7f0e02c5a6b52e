"""Polynomial chaos expansions by quadrature projection, and their moments.

Raw moments of order ``m`` are evaluated from a sparse table of

    a_i = multinomial(m, i) * prod_j < prod_k phi^(j)_{K_k(j)} ^ i_k >

over the multi-indices ``i`` with ``|i| = m`` whose inner product is
nonzero, so that ``E[Y^m] = sum_i a_i prod_k c_k^i_k``. Building the table is
the expensive step; it depends only on ``(n, d, m, families)`` and is cached.
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .basis import PolynomialFamily, UnivariateBasis, as_families, gauss_quadrature, univariate_inner_product
from .multiindex import (
    DEFAULT_SIZE_GUARD,
    CapacityError,
    ConstantSumIterator,
    GradedIndexSet,
    count_constant_sum,
    graded_basis_indices,
    multinomial_coefficient,
)

log = logging.getLogger(__name__)

__all__ = [
    "PropagationError",
    "CacheMismatchError",
    "DegenerateDistributionError",
    "TensorQuadrature",
    "tensor_quadrature",
    "GpcExpansion",
    "project",
    "evaluate_expansion",
    "low_order_moments",
    "InnerProductCache",
    "build_inner_product_cache",
    "get_inner_product_cache",
    "high_order_moment",
    "expansion_moments",
    "MomentVector",
    "CentralSummary",
    "raw_to_central_standardized",
    "PolynomialChaosExpansion",
    "MAX_MOMENT",
    "CACHE_DIR_ENV",
]

MAX_MOMENT = 5
ZERO_TOL = 1e-12
CACHE_DIR_ENV = "GPCID_CACHE_DIR"


class PropagationError(RuntimeError):
    """The forward model failed at a quadrature node."""

    def __init__(self, node, cause):
        super().__init__(f"model evaluation failed at node {np.asarray(node).tolist()}: {cause}")
        self.node = np.asarray(node)
        self.cause = cause


class CacheMismatchError(ValueError):
    """Inner-product cache does not belong to the expansion."""


class DegenerateDistributionError(ValueError):
    """Variance is not positive."""


@dataclass(frozen=True)
class TensorQuadrature:
    """Full tensor product of univariate Gauss rules (``q**n`` nodes)."""

    families: tuple[PolynomialFamily, ...]
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.families)

    def __len__(self) -> int:
        return len(self.weights)


def tensor_quadrature(families, q: int, n: int | None = None) -> TensorQuadrature:
    if n is None:
        n = 1 if isinstance(families, (str, PolynomialFamily)) else len(families)
    fams = as_families(families, n)
    rules = [gauss_quadrature(f, q) for f in fams]
    grids = np.meshgrid(*[r.nodes for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r.weights for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=1), axis=1)
    return TensorQuadrature(fams, int(q), nodes, weights)


@lru_cache(maxsize=128)
def _bases(families: tuple[PolynomialFamily, ...], d: int) -> tuple[UnivariateBasis, ...]:
    return tuple(UnivariateBasis(f, d) for f in families)


def basis_matrix(index_set: GradedIndexSet, families: tuple[PolynomialFamily, ...], x) -> np.ndarray:
    """``psi_i(x_r)`` for rows ``x_r``; shape ``(len(x), p)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.ones((x.shape[0], index_set.size))
    for j, basis in enumerate(_bases(families, index_set.d)):
        vals = basis.vandermonde(x[:, j])
        out *= vals[:, index_set.indices[:, j]]
    return out


@dataclass(frozen=True)
class GpcExpansion:
    """``y(theta) ~ sum_i c_i psi_i(theta)`` over a graded orthonormal basis."""

    coefficients: np.ndarray
    families: tuple[PolynomialFamily, ...]
    index_set: GradedIndexSet
    evaluations: int = 0
    node_values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.index_set.size,):
            raise ValueError(f"expected {self.index_set.size} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite expansion coefficients")
        object.__setattr__(self, "coefficients", c)

    @property
    def n(self) -> int:
        return self.index_set.n

    @property
    def d(self) -> int:
        return self.index_set.d

    def __call__(self, theta):
        return evaluate_expansion(self, theta)


def project(
    model: Callable,
    quad: TensorQuadrature,
    d: int,
    *,
    vectorized: bool = False,
    workers: int = 1,
) -> GpcExpansion:
    """Coefficients ``c_i = sum_j model(theta_j) psi_i(theta_j) w_j``.

    ``model`` takes one node (length-``n`` array) and returns a float, or,
    with ``vectorized=True``, takes the ``(q**n, n)`` node array at once. The
    model is evaluated exactly ``q**n`` times either way.
    """
    if quad.order < d + 1:
        warnings.warn(f"quadrature order {quad.order} < d + 1 = {d + 1}; high-order coefficients are aliased",
                      RuntimeWarning, stacklevel=2)
    index_set = graded_basis_indices(quad.n, d)
    nodes = quad.nodes
    if vectorized:
        try:
            values = np.asarray(model(nodes), dtype=float).reshape(len(nodes))
        except Exception as exc:
            raise PropagationError(nodes, exc) from exc
        bad = ~np.isfinite(values)
        if bad.any():
            raise PropagationError(nodes[np.argmax(bad)], "non-finite output")
    else:
        values = np.empty(len(nodes))
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_safe_call, [model] * len(nodes), list(nodes)))
        else:
            results = [_safe_call(model, node) for node in nodes]
        for r, (value, err) in enumerate(results):
            if err is not None or not np.isfinite(value):
                raise PropagationError(nodes[r], err if err is not None else "non-finite output")
            values[r] = value
    psi = basis_matrix(index_set, quad.families, nodes)
    coefficients = psi.T @ (quad.weights * values)
    return GpcExpansion(coefficients, quad.families, index_set, evaluations=len(nodes), node_values=values)


def _safe_call(model, node):
    try:
        return float(model(node)), None
    except Exception as exc:  # carried back to the caller with the node
        return math.nan, exc


def evaluate_expansion(expansion: GpcExpansion, theta):
    """Evaluate the expansion at one point or at rows of a 2-D array."""
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim <= 1
    x = theta.reshape(1, -1) if single else theta
    if x.shape[1] != expansion.n:
        raise ValueError(f"expected points of dimension {expansion.n}, got {x.shape[1]}")
    y = basis_matrix(expansion.index_set, expansion.families, x) @ expansion.coefficients
    return float(y[0]) if single else y


def low_order_moments(expansion: GpcExpansion) -> tuple[float, float]:
    """Mean ``c_0`` and raw second moment ``sum c_i^2`` (orthonormal basis)."""
    c = expansion.coefficients
    return float(c[0]), float(np.dot(c, c))


# ---------------------------------------------------------------------------
# inner-product cache
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnerProductCache:
    """Nonzero ``a_i`` for ``|i| = m`` over the ``p`` basis slots.

    ``slots[e]`` lists the ``m`` basis positions of entry ``e`` with
    multiplicity (sorted), which is all a moment evaluation needs;
    :meth:`multi_indices` recovers the length-``p`` form.
    """

    n: int
    d: int
    m: int
    families: tuple[PolynomialFamily, ...]
    tol: float
    slots: np.ndarray
    values: np.ndarray
    candidates: int = 0

    @property
    def p(self) -> int:
        return math.comb(self.n + self.d, self.d)

    def __len__(self) -> int:
        return len(self.values)

    def multi_indices(self) -> np.ndarray:
        out = np.zeros((len(self.values), self.p), dtype=np.int64)
        for k in range(self.m):
            np.add.at(out, (np.arange(len(self.values)), self.slots[:, k]), 1)
        return out

    def header(self) -> str:
        fam = ",".join(f.token for f in self.families)
        return f"GPCCACHE v1 n={self.n} d={self.d} m={self.m} fam={fam} tol={self.tol!r}"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.header().encode()).hexdigest()[:16]

    def matches(self, expansion: GpcExpansion) -> bool:
        return (self.n, self.d, self.families) == (expansion.n, expansion.d, tuple(expansion.families))

    def save(self, path) -> None:
        path = Path(path)
        lines = [self.header()]
        for row, a in zip(self.multi_indices(), self.values):
            lines.append(",".join(map(str, row)) + " " + float(a).hex())
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text("\n".join(lines) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "InnerProductCache":
        with open(path) as fh:
            header = fh.readline().split()
            if header[:2] != ["GPCCACHE", "v1"]:
                raise ValueError(f"{path}: not a GPCCACHE v1 file")
            fields = dict(tok.split("=", 1) for tok in header[2:])
            n, d, m = int(fields["n"]), int(fields["d"]), int(fields["m"])
            families = tuple(PolynomialFamily.from_token(t) for t in fields["fam"].split(","))
            rows, values = [], []
            for line in fh:
                if not line.strip():
                    continue
                idx, a = line.split()
                rows.append([int(v) for v in idx.split(",")])
                values.append(float.fromhex(a))
        p = math.comb(n + d, d)
        index = np.array(rows, dtype=np.int64).reshape(len(rows), p)
        slots = np.array([np.repeat(np.arange(p), r) for r in index], dtype=np.int64).reshape(len(rows), m)
        return cls(n, d, m, families, float(fields["tol"]), slots, np.array(values), count_constant_sum(m, p))


def _cache_range(n, d, m, families, tol, start, count):
    """Entries of the cache for lexicographic ranks ``[start, start + count)``."""
    index_set = graded_basis_indices(n, d)
    degrees = index_set.indices.tolist()
    bases = _bases(families, d)
    p = index_set.size
    memo: dict[tuple[int, tuple[int, ...]], float] = {}
    slots_out: list[list[int]] = []
    values_out: list[float] = []
    it = ConstantSumIterator(m, p, start=start)
    for _ in range(count):
        index = it.next()
        if index is None:
            break
        nz = [(k, e) for k, e in enumerate(index) if e]
        inner = 1.0
        for j in range(n):
            key = tuple(sorted(deg for k, e in nz for deg in [degrees[k][j]] * e if deg))
            val = memo.get((j, key))
            if val is None:
                counts: dict[int, int] = {}
                for deg in key:
                    counts[deg] = counts.get(deg, 0) + 1
                val = univariate_inner_product(bases[j], counts.items())
                memo[(j, key)] = val
            inner *= val
            if inner == 0.0:
                break
        multinom = multinomial_coefficient(m, index)
        a = multinom * inner
        if abs(a) > tol * max(1.0, multinom):
            slots_out.append([k for k, e in nz for _ in range(e)])
            values_out.append(a)
    return slots_out, values_out


def build_inner_product_cache(
    n: int,
    d: int,
    m: int,
    families=PolynomialFamily("hermite"),
    *,
    workers: int = 1,
    tol: float = ZERO_TOL,
    max_moment: int = MAX_MOMENT,
    size_guard: int = DEFAULT_SIZE_GUARD,
) -> InnerProductCache:
    """Enumerate ``|i| = m`` by push/fork and keep the nonzero ``a_i``.

    With ``workers > 1`` the rank range is split into contiguous partitions,
    each processed by an iterator positioned at its start rank; the merged
    result is identical to the single-worker build.
    """
    if m < 1 or m > max_moment:
        raise ValueError(f"moment order {m} outside 1..{max_moment}")
    fams = as_families(families, n)
    p = math.comb(n + d, d)
    total = count_constant_sum(m, p)
    if total > size_guard:
        raise CapacityError(f"{total} candidate multi-indices exceed guard {size_guard}")
    if workers > 1 and total > 1:
        chunks = min(total, workers * 4)
        bounds = [total * k // chunks for k in range(chunks + 1)]
        args = [(n, d, m, fams, tol, bounds[k], bounds[k + 1] - bounds[k]) for k in range(chunks)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_cache_range, *zip(*args)))
    else:
        parts = [_cache_range(n, d, m, fams, tol, 0, total)]
    slots = [s for part in parts for s in part[0]]
    values = [v for part in parts for v in part[1]]
    slots_arr = np.array(slots, dtype=np.int64).reshape(len(slots), m)
    values_arr = np.array(values, dtype=float)
    if len(values_arr):
        # canonical order: multi-index ascending == slot tuples descending
        order = np.lexsort((-slots_arr).T[::-1])
        slots_arr, values_arr = slots_arr[order], values_arr[order]
    return InnerProductCache(n, d, m, fams, tol, slots_arr, values_arr, total)


def _cache_path(directory: Path, n, d, m, fams) -> Path:
    tag = "-".join(f.token.replace(":", "_") for f in fams)
    return directory / f"ipc_n{n}_d{d}_m{m}_{tag}.gpccache"


_memory_caches: dict[tuple, InnerProductCache] = {}


def get_inner_product_cache(n, d, m, families=PolynomialFamily("hermite"), *, cache_dir=None, workers=1):
    """Cached :func:`build_inner_product_cache`.

    Kept in memory for the process lifetime, and persisted under
    ``cache_dir`` (or ``$GPCID_CACHE_DIR``) when a directory is configured.
    A file whose header does not match is rebuilt.
    """
    fams = as_families(families, n)
    key = (n, d, m, fams)
    if key in _memory_caches:
        return _memory_caches[key]
    directory = cache_dir if cache_dir is not None else os.environ.get(CACHE_DIR_ENV)
    cache = None
    if directory:
        directory = Path(directory)
        path = _cache_path(directory, n, d, m, fams)
        if path.exists():
            try:
                loaded = InnerProductCache.load(path)
                if (loaded.n, loaded.d, loaded.m, loaded.families) == key:
                    cache = loaded
                else:
                    log.info("cache %s has a different fingerprint, rebuilding", path)
            except (ValueError, KeyError, OSError) as exc:
                log.warning("unreadable cache %s (%s), rebuilding", path, exc)
        if cache is None:
            cache = build_inner_product_cache(n, d, m, fams, workers=workers)
            directory.mkdir(parents=True, exist_ok=True)
            cache.save(path)
    else:
        cache = build_inner_product_cache(n, d, m, fams, workers=workers)
    _memory_caches[key] = cache
    return cache


def high_order_moment(expansion: GpcExpansion, cache: InnerProductCache, m: int | None = None) -> float:
    """Raw moment ``E[Y^m]`` of the expansion from the sparse cache."""
    if m is not None and m != cache.m:
        raise CacheMismatchError(f"cache holds order {cache.m}, asked for {m}")
    if not cache.matches(expansion):
        raise CacheMismatchError(
            f"cache (n={cache.n}, d={cache.d}, fam={[f.token for f in cache.families]}) does not match expansion "
            f"(n={expansion.n}, d={expansion.d}, fam={[f.token for f in expansion.families]})")
    if not len(cache):
        return 0.0
    c = expansion.coefficients
    return float(np.dot(cache.values, np.prod(c[cache.slots], axis=1)))


# ---------------------------------------------------------------------------
# moment vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentVector:
    """Raw moments ``mu_1 .. mu_M`` (about zero)."""

    raw: tuple[float, ...]

    def __post_init__(self):
        raw = tuple(float(v) for v in self.raw)
        if not raw:
            raise ValueError("empty moment vector")
        if not all(math.isfinite(v) for v in raw):
            raise ValueError(f"non-finite moments {raw}")
        object.__setattr__(self, "raw", raw)

    @property
    def order(self) -> int:
        return len(self.raw)

    def __getitem__(self, m: int) -> float:
        """1-based access: ``mv[1]`` is the mean."""
        if m == 0:
            return 1.0
        return self.raw[m - 1]

    @property
    def variance(self) -> float:
        if self.order < 2:
            raise ValueError("variance needs two moments")
        return self.raw[1] - self.raw[0] ** 2

    def is_valid(self) -> bool:
        return self.order < 2 or self.variance >= -1e-9 * (1.0 + abs(self.raw[1]))

    def standardized(self, shift: float, scale: float) -> np.ndarray:
        """Raw moments of ``(Y - shift) / scale``, orders ``1 .. M``."""
        out = np.empty(self.order)
        for k in range(1, self.order + 1):
            s = sum(math.comb(k, j) * self[j] * (-shift) ** (k - j) for j in range(k + 1))
            out[k - 1] = s / scale**k
        return out


def expansion_moments(expansion: GpcExpansion, M: int, *, cache_dir=None) -> MomentVector:
    """Raw moments up to order ``M`` (``M <= MAX_MOMENT``)."""
    if M < 1 or M > MAX_MOMENT:
        raise ValueError(f"moment order {M} outside 1..{MAX_MOMENT}")
    mu1, mu2 = low_order_moments(expansion)
    raw = [mu1, mu2][:M]
    for m in range(3, M + 1):
        cache = get_inner_product_cache(expansion.n, expansion.d, m, expansion.families, cache_dir=cache_dir)
        raw.append(high_order_moment(expansion, cache))
    return MomentVector(tuple(raw))


@dataclass(frozen=True)
class CentralSummary:
    mean: float
    variance: float
    central: tuple[float, ...]
    standardized: tuple[float, ...]

    @property
    def skewness(self) -> float:
        return self.standardized[2] if len(self.standardized) > 2 else math.nan

    @property
    def kurtosis(self) -> float:
        return self.standardized[3] if len(self.standardized) > 3 else math.nan


def raw_to_central_standardized(moments: MomentVector | Sequence[float]) -> CentralSummary:
    """Central moments ``E[(Y-mean)^k]`` and standardized ones ``/ sd^k``.

    ``central[k-1]`` and ``standardized[k-1]`` hold order ``k``, so
    ``standardized[2]`` is the skewness and ``standardized[3]`` the kurtosis.
    """
    mv = moments if isinstance(moments, MomentVector) else MomentVector(tuple(moments))
    mean = mv[1]
    central = tuple(
        sum(math.comb(k, j) * mv[j] * (-mean) ** (k - j) for j in range(k + 1)) for k in range(1, mv.order + 1))
    if mv.order < 2:
        return CentralSummary(mean, math.nan, central, ())
    variance = central[1]
    if not variance > 0:
        raise DegenerateDistributionError(f"non-positive variance {variance!r}")
    sd = math.sqrt(variance)
    return CentralSummary(mean, variance, central, tuple(c / sd ** (k + 1) for k, c in enumerate(central)))


# ---------------------------------------------------------------------------
# estimator interface
# ---------------------------------------------------------------------------


class PolynomialChaosExpansion(RegressorMixin, BaseEstimator):
    """Projection-based polynomial chaos surrogate.

    ``fit`` expects the model evaluated at the tensor Gauss nodes returned by
    :meth:`quadrature`, with the node weights passed as ``sample_weight``;
    :meth:`fit_model` does both steps for a callable.

    Parameters
    ----------
    degree : int
        Total polynomial degree ``d``.
    quad_order : int or None
        Univariate quadrature order; defaults to ``degree + 1``.
    family : str or sequence of str
        Polynomial family token(s), one per input or broadcast.
    max_moment : int
        Highest raw moment computed into ``moments_``.

    Attributes
    ----------
    expansion_ : GpcExpansion
    coef_ : ndarray of shape (p,)
    moments_ : MomentVector
    """

    def __init__(self, degree=4, quad_order=None, family="hermite", max_moment=4):
        self.degree = degree
        self.quad_order = quad_order
        self.family = family
        self.max_moment = max_moment

    def quadrature(self, n_features: int) -> TensorQuadrature:
        q = self.quad_order if self.quad_order is not None else self.degree + 1
        return tensor_quadrature(self.family, q, n_features)

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, ensure_min_samples=1)
        y = np.asarray(y, dtype=float).ravel()
        if sample_weight is None:
            raise ValueError("projection needs the quadrature weights as sample_weight")
        w = np.asarray(sample_weight, dtype=float).ravel()
        if not (len(X) == len(y) == len(w)):
            raise ValueError("X, y and sample_weight lengths differ")
        fams = as_families(self.family, X.shape[1])
        index_set = graded_basis_indices(X.shape[1], self.degree)
        coef = basis_matrix(index_set, fams, X).T @ (w * y)
        self._set_expansion(GpcExpansion(coef, fams, index_set, evaluations=len(y), node_values=y))
        return self

    def fit_model(self, model, n_features: int, vectorized=False, workers=1):
        quad = self.quadrature(n_features)
        self._set_expansion(project(model, quad, self.degree, vectorized=vectorized, workers=workers))
        return self

    def _set_expansion(self, expansion):
        self.expansion_ = expansion
        self.coef_ = expansion.coefficients
        self.n_features_in_ = expansion.n
        self.moments_ = expansion_moments(expansion, self.max_moment)

    def predict(self, X):
        check_is_fitted(self, "expansion_")
        X = check_array(X)
        return evaluate_expansion(self.expansion_, X)

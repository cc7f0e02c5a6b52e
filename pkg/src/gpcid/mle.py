"""Likelihood of experiment sets under an input probability model, and its
maximisation by a seeded differential-evolution search.

For each experiment the output density of ``model(config, x(theta | alpha))``
is obtained by one of four propagation methods:

* ``gpc_gaussian``  polynomial chaos moments, normal fit
* ``gpc_maxent``    polynomial chaos moments, maximum-entropy fit
* ``mc``            seeded Monte Carlo samples, smoothed histogram
* ``qmc``           equal-probability midpoint grid, smoothed histogram
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .basis import PolynomialFamily
from .density import (
    GaussianDensity,
    HistogramDensity,
    MaxEntFitError,
    fit_gaussian,
    fit_maxent,
    maxent_support,
)
from .gpc import DegenerateDistributionError, PropagationError, expansion_moments, project, tensor_quadrature
from .models import ExperimentConfig
from .transform import InputProbabilityModel, std_normal_quantile, to_physical

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentSet",
    "PropagationMethod",
    "Diagnostics",
    "IdentificationResult",
    "propagate_density",
    "log_likelihood",
    "mc_propagate",
    "qmc_propagate",
    "qmc_nodes",
    "differential_evolution",
    "OptimizerConfig",
    "OptimizationResult",
    "identify",
    "least_squares_baseline",
    "reference_log_likelihoods",
    "benchmark_mae",
    "matching_sample_count",
    "gen_synthetic",
    "InputModelIdentifier",
    "FAILURE_LOGL",
    "REFERENCE_SAMPLES",
]

# log-likelihood assigned to an experiment whose model runs fail
FAILURE_LOGL = -1.0e4
REFERENCE_SAMPLES = 200_000
SIGMA_FLOOR = 1e-9

CSV_FIELDS = ("l", "dt_s", "u0_A", "du_A", "omega_m_rpm", "load", "y_s")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSet:
    """Experiment configurations with observed outputs, ordered by id."""

    configs: tuple[ExperimentConfig, ...]
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if len(y) != len(self.configs):
            raise ValueError("one observation per experiment is required")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        ids = [c.l for c in self.configs]
        if len(set(ids)) != len(ids):
            raise ValueError("experiment ids must be unique")
        order = np.argsort(ids, kind="stable")
        y = y[order]
        y.setflags(write=False)
        object.__setattr__(self, "configs", tuple(self.configs[i] for i in order))
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def ids(self) -> list[int]:
        return [c.l for c in self.configs]

    @classmethod
    def from_csv(cls, path) -> "ExperimentSet":
        configs, ys = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    configs.append(ExperimentConfig(int(row["l"]), float(row["dt_s"]), float(row["u0_A"]),
                                                    float(row["du_A"]), float(row["omega_m_rpm"]), row["load"].strip()))
                    ys.append(float(row["y_s"]))
                except (ValueError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return cls(tuple(configs), np.array(ys))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_FIELDS)
            for c, y in zip(self.configs, self.y):
                w.writerow([c.l, repr(c.dt_s), repr(c.u0_A), repr(c.du_A), repr(c.omega_m_rpm), c.load, repr(float(y))])


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropagationMethod:
    """How the output density of one experiment is built.

    ``kind`` is one of ``gpc_gaussian``, ``gpc_maxent``, ``mc``, ``qmc``.
    ``degree``/``quad_order``/``n_moments`` apply to the chaos methods,
    ``samples``/``seed`` to the sampling ones.
    """

    kind: str = "gpc_maxent"
    degree: int = 4
    quad_order: int | None = None
    n_moments: int = 4
    samples: int = 1000
    seed: int = 0

    KINDS = ("gpc_gaussian", "gpc_maxent", "mc", "qmc")
    ALIASES = {"gpc-gauss": "gpc_gaussian", "gpc-gaussian": "gpc_gaussian", "gpc-maxent": "gpc_maxent"}

    def __post_init__(self):
        kind = self.ALIASES.get(self.kind, self.kind)
        if kind not in self.KINDS:
            raise ValueError(f"unknown propagation method {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "gpc_maxent" and self.n_moments not in (2, 3, 4, 5):
            raise ValueError("n_moments must be in 2..5")
        if kind in ("mc", "qmc") and self.samples < 2:
            raise ValueError("sampling methods need at least two samples")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")

    @property
    def q(self) -> int:
        return self.quad_order if self.quad_order is not None else self.degree + 1

    def evaluations(self, n: int) -> int:
        """Model runs per experiment."""
        if self.kind.startswith("gpc"):
            return self.q**n
        if self.kind == "qmc":
            return _grid_size(self.samples, n) ** n
        return self.samples


@dataclass
class Diagnostics:
    """Counters collected while evaluating likelihoods."""

    maxent_fallbacks: int = 0
    model_failures: int = 0
    evaluations: int = 0

    def merge(self, other: "Diagnostics") -> None:
        self.maxent_fallbacks += other.maxent_fallbacks
        self.model_failures += other.model_failures
        self.evaluations += other.evaluations


def _batch(model, config, X) -> np.ndarray:
    if hasattr(model, "evaluate_batch"):
        return np.asarray(model.evaluate_batch(config, X), dtype=float).reshape(len(X))
    return np.array([model.evaluate(config, x) for x in X], dtype=float)


def _grid_size(S: int, n: int) -> int:
    k = max(1, int(round(S ** (1.0 / n))))
    return k + 1 if k**n < S and (k + 1) ** n - S < S - k**n else k


def qmc_nodes(S: int, n: int) -> np.ndarray:
    """Tensor grid of midpoint quantiles ``Phi^-1((j - 1/2) / k)``, ``k**n ~ S``."""
    k = _grid_size(S, n)
    u = (np.arange(1, k + 1) - 0.5) / k
    axis = std_normal_quantile(u)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def mc_propagate(alpha: InputProbabilityModel, config, S: int, seed, model) -> HistogramDensity:
    """Smoothed-histogram density of ``S`` seeded model runs."""
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((S, alpha.n))
    return HistogramDensity(_batch(model, config, to_physical(theta, alpha)))


def qmc_propagate(alpha: InputProbabilityModel, config, S: int, model) -> HistogramDensity:
    """As :func:`mc_propagate` on the deterministic midpoint-quantile grid."""
    return HistogramDensity(_batch(model, config, to_physical(qmc_nodes(S, alpha.n), alpha)))


def _gpc_density(alpha, config, model, method: PropagationMethod, diag: Diagnostics):
    quad = tensor_quadrature(PolynomialFamily("hermite"), method.q, alpha.n)
    exp = project(lambda th: _batch(model, config, to_physical(th, alpha)), quad, method.degree, vectorized=True)
    diag.evaluations += exp.evaluations
    M = 2 if method.kind == "gpc_gaussian" else method.n_moments
    mv = expansion_moments(exp, M)
    mean = mv[1]
    var = mv.variance
    floor = SIGMA_FLOOR * max(1.0, abs(mean))
    if not var > floor * floor:
        return GaussianDensity(mean, floor)
    gauss = fit_gaussian(mv)
    if method.kind == "gpc_gaussian":
        return gauss
    try:
        return fit_maxent(mv, maxent_support(mv, exp.node_values))
    except (MaxEntFitError, DegenerateDistributionError) as exc:
        diag.maxent_fallbacks += 1
        log.debug("maxent fit failed for experiment %s: %s", config.l, exc)
        return gauss


def _sample_seed(method: PropagationMethod, config) -> list[int]:
    return [int(method.seed), int(config.l)]


def propagate_density(alpha: InputProbabilityModel, config, model, method: PropagationMethod,
                      diag: Diagnostics | None = None):
    """Output density of one experiment. Model failures propagate."""
    diag = diag if diag is not None else Diagnostics()
    if method.kind.startswith("gpc"):
        return _gpc_density(alpha, config, model, method, diag)
    if method.kind == "mc":
        diag.evaluations += method.samples
        return mc_propagate(alpha, config, method.samples, _sample_seed(method, config), model)
    diag.evaluations += method.evaluations(alpha.n)
    return qmc_propagate(alpha, config, method.samples, model)


_MODEL_FAILURES = (PropagationError, ArithmeticError, RuntimeError, ValueError)


def log_likelihood(alpha: InputProbabilityModel, experiments: ExperimentSet, model, method: PropagationMethod,
                   diag: Diagnostics | None = None) -> tuple[float, np.ndarray]:
    """Total and per-experiment log-likelihood of the observations.

    An experiment whose model runs fail (timeout, domain error) or whose
    sample density is degenerate contributes :data:`FAILURE_LOGL`.
    """
    diag = diag if diag is not None else Diagnostics()
    per = np.empty(len(experiments))
    for k, (config, y) in enumerate(zip(experiments.configs, experiments.y)):
        try:
            dens = propagate_density(alpha, config, model, method, diag)
            per[k] = dens.log_pdf(y)
        except _MODEL_FAILURES as exc:
            diag.model_failures += 1
            log.debug("experiment %s failed: %s", config.l, exc)
            per[k] = FAILURE_LOGL
        if not np.isfinite(per[k]):
            per[k] = FAILURE_LOGL
    return float(math.fsum(per)), per


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    """Differential evolution (rand/1/bin) settings."""

    population: int = 50
    generations: int = 60
    mutation: float = 0.6
    crossover: float = 0.9
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be at least 4")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if not (0 < self.mutation <= 2 and 0 <= self.crossover <= 1):
            raise ValueError("mutation must lie in (0, 2] and crossover in [0, 1]")


@dataclass(frozen=True)
class OptimizationResult:
    x: np.ndarray
    value: float
    trace: np.ndarray
    evaluations: int
    converged: bool


def _evaluate_population(fun, pop, pool):
    if pool is not None:
        return np.array(list(pool.map(fun, list(pop))), dtype=float)
    return np.array([fun(x) for x in pop], dtype=float)


def differential_evolution(fun: Callable, lower, upper, config: OptimizerConfig = OptimizerConfig(),
                           xtol: float = 0.0) -> OptimizationResult:
    """Maximise ``fun`` over the box ``[lower, upper]``.

    Trial vectors are drawn for the whole generation before any is
    evaluated, and selection compares values only, so results do not depend
    on ``config.workers``. The trace holds the best value after the initial
    population and after each generation. ``converged`` is set when the
    population collapses below ``xtol`` (relative to the box) before the
    budget runs out.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or not np.all(lower < upper):
        raise ValueError("bounds must satisfy lower < upper componentwise")
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        return _de_loop(fun, lower, upper, config, xtol, pool)
    finally:
        if pool is not None:
            pool.shutdown()


def _de_loop(fun, lower, upper, config, xtol, pool):
    dim = len(lower)
    span = upper - lower
    rng = np.random.default_rng(config.seed)
    NP = config.population
    pop = lower + span * rng.random((NP, dim))
    values = _evaluate_population(fun, pop, pool)
    values = np.where(np.isfinite(values), values, -np.inf)
    evals = NP
    best = int(np.argmax(values))
    trace = [values[best]]
    converged = False
    for _ in range(config.generations):
        trials = np.empty_like(pop)
        for i in range(NP):
            r = rng.choice(NP - 1, 3, replace=False)
            r[r >= i] += 1
            a, b, c = pop[r]
            mutant = a + config.mutation * (b - c)
            # reflect back into the box
            mutant = np.where(mutant < lower, lower + (lower - mutant) % span, mutant)
            mutant = np.where(mutant > upper, upper - (mutant - upper) % span, mutant)
            cross = rng.random(dim) < config.crossover
            cross[rng.integers(dim)] = True
            trials[i] = np.where(cross, mutant, pop[i])
        trial_values = _evaluate_population(fun, trials, pool)
        trial_values = np.where(np.isfinite(trial_values), trial_values, -np.inf)
        evals += NP
        better = trial_values >= values
        pop[better] = trials[better]
        values[better] = trial_values[better]
        best = int(np.argmax(values))
        trace.append(max(trace[-1], values[best]))
        if xtol > 0 and np.all(np.ptp(pop, axis=0) <= xtol * span):
            converged = True
            break
    return OptimizationResult(pop[best].copy(), float(values[best]), np.array(trace), evals, converged)


# ---------------------------------------------------------------------------
# identification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _LikelihoodObjective:
    experiments: ExperimentSet
    model: object
    method: PropagationMethod
    clip_lower: np.ndarray | None
    clip_upper: np.ndarray | None

    def __call__(self, alpha_vec) -> float:
        alpha = InputProbabilityModel.from_alpha(alpha_vec, self.clip_lower, self.clip_upper)
        return log_likelihood(alpha, self.experiments, self.model, self.method)[0]


@dataclass(frozen=True)
class IdentificationResult:
    alpha: InputProbabilityModel
    log_likelihood: float
    trace: np.ndarray
    per_experiment: np.ndarray
    evaluations: int
    model_evaluations: int
    converged: bool
    diagnostics: Diagnostics

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.to_dict(),
            "log_likelihood": self.log_likelihood,
            "trace": self.trace.tolist(),
            "per_experiment": self.per_experiment.tolist(),
            "likelihood_evaluations": self.evaluations,
            "model_evaluations": self.model_evaluations,
            "converged": self.converged,
            "maxent_fallbacks": self.diagnostics.maxent_fallbacks,
            "model_failures": self.diagnostics.model_failures,
        }


def identify(experiments: ExperimentSet, model, alpha_lower, alpha_upper,
             method: PropagationMethod = PropagationMethod(), optimizer: OptimizerConfig = OptimizerConfig(),
             clip_lower=None, clip_upper=None) -> IdentificationResult:
    """Maximum-likelihood input model ``alpha = (means, stds)`` within a box.

    ``clip_lower``/``clip_upper`` fix the support of the clipped normals.
    """
    lo = np.asarray(alpha_lower, dtype=float)
    hi = np.asarray(alpha_upper, dtype=float)
    n = len(lo) // 2
    if len(lo) != 2 * n or len(hi) != len(lo):
        raise ValueError("alpha bounds must hold n means followed by n stds")
    if not np.all(lo[n:] > 0):
        raise ValueError("lower bounds on the standard deviations must be positive")
    objective = _LikelihoodObjective(experiments, model, method,
                                     None if clip_lower is None else np.asarray(clip_lower, float),
                                     None if clip_upper is None else np.asarray(clip_upper, float))
    opt = differential_evolution(objective, lo, hi, optimizer)
    alpha = InputProbabilityModel.from_alpha(opt.x, objective.clip_lower, objective.clip_upper)
    diag = Diagnostics()
    total, per = log_likelihood(alpha, experiments, model, method, diag)
    per_run = method.evaluations(n) * len(experiments)
    return IdentificationResult(alpha, total, opt.trace, per, opt.evaluations, opt.evaluations * per_run,
                                opt.converged, diag)


def least_squares_baseline(experiments: ExperimentSet, model, lower, upper,
                           optimizer: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Point estimate minimising ``sum (y_l - model(l, x))^2`` over a box.

    The returned ``value`` is the (negated) sum of squares.
    """
    return differential_evolution(_SSE(experiments, model), lower, upper, optimizer)


@dataclass(frozen=True)
class _SSE:
    experiments: ExperimentSet
    model: object

    def __call__(self, x):
        try:
            r = [y - self.model.evaluate(c, x) for c, y in zip(self.experiments.configs, self.experiments.y)]
        except _MODEL_FAILURES:
            return -math.inf
        return -math.fsum(v * v for v in r)


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


def reference_log_likelihoods(alpha: InputProbabilityModel, experiments: ExperimentSet, model,
                              S: int = REFERENCE_SAMPLES, seed: int = 12345, cache_path=None) -> np.ndarray:
    """Per-experiment log-likelihoods under a large seeded Monte Carlo run.

    With ``cache_path`` the values are stored as JSON (keyed by alpha, S and
    seed) and reused when the key matches.
    """
    key = {"alpha": alpha.to_dict(), "S": S, "seed": seed, "ids": experiments.ids,
           "y": [float(v).hex() for v in experiments.y]}
    if cache_path is not None and Path(cache_path).exists():
        try:
            stored = json.loads(Path(cache_path).read_text())
            if stored.get("key") == key:
                return np.array([float.fromhex(v) for v in stored["logl"]])
        except (ValueError, KeyError):
            pass
    ref = log_likelihood(alpha, experiments, model, PropagationMethod("mc", samples=S, seed=seed))[1]
    if cache_path is not None:
        Path(cache_path).write_text(json.dumps({"key": key, "logl": [float(v).hex() for v in ref]}))
    return ref


def benchmark_mae(alpha: InputProbabilityModel, experiments: ExperimentSet, model,
                  methods: Sequence[PropagationMethod], reference: np.ndarray, replicates: int = 1) -> list[dict]:
    """MAE of per-experiment log-likelihoods against ``reference``.

    Monte Carlo methods are averaged over ``replicates`` seeds
    (``seed, seed + 1, ...``); deterministic methods run once.
    """
    rows = []
    for method in methods:
        reps = replicates if method.kind == "mc" else 1
        maes = []
        for r in range(reps):
            m = replace(method, seed=method.seed + r)
            per = log_likelihood(alpha, experiments, model, m)[1]
            maes.append(float(np.mean(np.abs(per - reference))))
        rows.append({
            "method": method.kind,
            "samples": method.samples if method.kind in ("mc", "qmc") else None,
            "evaluations": method.evaluations(alpha.n),
            "mae": float(np.mean(maes)),
            "mae_sd": float(np.std(maes, ddof=1)) if reps > 1 else 0.0,
        })
    return rows


def matching_sample_count(evaluations: Sequence[int], maes: Sequence[float], target: float) -> float:
    """Evaluation count at which a decreasing MAE curve reaches ``target``.

    Linear interpolation in log-log coordinates between the last point above
    and the first point at or below the target; ``inf`` if never reached and
    the first count if already below at the start.
    """
    S = np.asarray(evaluations, dtype=float)
    e = np.asarray(maes, dtype=float)
    order = np.argsort(S)
    S, e = S[order], e[order]
    hit = np.flatnonzero(e <= target)
    if not len(hit):
        return math.inf
    j = int(hit[0])
    if j == 0:
        return float(S[0])
    x0, x1 = math.log(S[j - 1]), math.log(S[j])
    y0, y1 = math.log(e[j - 1]), math.log(e[j])
    if y1 == y0:
        return float(S[j])
    return float(math.exp(x0 + (math.log(target) - y0) * (x1 - x0) / (y1 - y0)))


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


def gen_synthetic(alpha: InputProbabilityModel, model, configs: Sequence[ExperimentConfig], seed: int,
                  max_redraws: int = 100) -> ExperimentSet:
    """One observation per configuration from ``model(config, X)``, ``X ~ alpha``.

    Draws whose model run fails are redrawn (up to ``max_redraws`` times).
    """
    rng = np.random.default_rng(seed)
    ys = []
    for config in configs:
        for _ in range(max_redraws):
            x = alpha.sample(1, rng)[0]
            try:
                ys.append(float(model.evaluate(config, x)))
                break
            except _MODEL_FAILURES:
                continue
        else:
            raise RuntimeError(f"experiment {config.l}: every draw failed")
    return ExperimentSet(tuple(configs), np.array(ys))


class InputModelIdentifier(BaseEstimator):
    """Estimator wrapper around :func:`identify`.

    ``fit`` takes an :class:`ExperimentSet`. ``alpha_bounds`` is
    ``(lower, upper)`` over ``(means, stds)``; ``clip_bounds`` is
    ``(lower, upper)`` over the inputs or ``None``.

    Attributes
    ----------
    alpha_ : InputProbabilityModel
    log_likelihood_ : float
    trace_ : ndarray
    result_ : IdentificationResult
    """

    def __init__(self, model=None, method="gpc_maxent", degree=4, quad_order=None, n_moments=4, samples=1000,
                 alpha_bounds=None, clip_bounds=None, population=50, generations=60, seed=0, workers=1):
        self.model = model
        self.method = method
        self.degree = degree
        self.quad_order = quad_order
        self.n_moments = n_moments
        self.samples = samples
        self.alpha_bounds = alpha_bounds
        self.clip_bounds = clip_bounds
        self.population = population
        self.generations = generations
        self.seed = seed
        self.workers = workers

    def _method(self) -> PropagationMethod:
        return PropagationMethod(self.method, self.degree, self.quad_order, self.n_moments, self.samples, self.seed)

    def fit(self, X, y=None):
        if self.model is None or self.alpha_bounds is None:
            raise ValueError("model and alpha_bounds are required")
        clip = self.clip_bounds or (None, None)
        opt = OptimizerConfig(self.population, self.generations, seed=self.seed, workers=self.workers)
        self.result_ = identify(X, self.model, self.alpha_bounds[0], self.alpha_bounds[1], self._method(), opt,
                                clip[0], clip[1])
        self.alpha_ = self.result_.alpha
        self.log_likelihood_ = self.result_.log_likelihood
        self.trace_ = self.result_.trace
        return self

    def score(self, X, y=None) -> float:
        return log_likelihood(self.alpha_, X, self.model, self._method())[0]

"""Polynomial chaos uncertainty propagation and maximum-likelihood
identification of input probability models."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

from .basis import PolynomialFamily, QuadratureRule, UnivariateBasis, gauss_quadrature
from .density import GaussianDensity, MaxEntDensity, MomentDensityEstimator, fit_gaussian, fit_maxent
from .gpc import GpcExpansion, InnerProductCache, MomentVector, PolynomialChaosExpansion
from .mle import ExperimentSet, InputModelIdentifier, PropagationMethod, identify, log_likelihood
from .transform import InputProbabilityModel, to_physical

__all__ = [
    "PolynomialFamily",
    "QuadratureRule",
    "UnivariateBasis",
    "gauss_quadrature",
    "GaussianDensity",
    "MaxEntDensity",
    "MomentDensityEstimator",
    "fit_gaussian",
    "fit_maxent",
    "GpcExpansion",
    "InnerProductCache",
    "MomentVector",
    "PolynomialChaosExpansion",
    "ExperimentSet",
    "InputModelIdentifier",
    "PropagationMethod",
    "identify",
    "log_likelihood",
    "InputProbabilityModel",
    "to_physical",
]

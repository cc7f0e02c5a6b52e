"""Map standard normal variables onto (clipped) normal model parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = ["InputProbabilityModel", "to_physical", "std_normal_cdf", "std_normal_quantile", "U_CLAMP"]

U_CLAMP = 1e-15


def std_normal_cdf(z):
    """Standard normal CDF."""
    return ndtr(z)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf`; ``p`` must lie in (0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)) or np.any(np.isnan(p_arr)):
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    return ndtri(p)


@dataclass(frozen=True)
class InputProbabilityModel:
    """Independent normals ``N(mean_i, std_i^2)`` clipped to ``[lower_i, upper_i]``.

    Bounds may be infinite. ``alpha`` in the identification code is
    ``(*mean, *std)``; the bounds are fixed by the problem.
    """

    mean: np.ndarray
    std: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        std = np.atleast_1d(np.asarray(self.std, dtype=float))
        n = len(mean)
        lower = np.full(n, -np.inf) if self.lower is None else np.broadcast_to(np.asarray(self.lower, float), (n,)).copy()
        upper = np.full(n, np.inf) if self.upper is None else np.broadcast_to(np.asarray(self.upper, float), (n,)).copy()
        if std.shape != (n,):
            raise ValueError("mean and std lengths differ")
        if not np.all(std > 0):
            raise ValueError(f"standard deviations must be positive, got {std}")
        if not np.all(lower < upper):
            raise ValueError("clip bounds must satisfy lower < upper")
        for name, val in (("mean", mean), ("std", std), ("lower", lower), ("upper", upper)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return len(self.mean)

    @property
    def alpha(self) -> np.ndarray:
        return np.concatenate([self.mean, self.std])

    @classmethod
    def from_alpha(cls, alpha, lower=None, upper=None) -> "InputProbabilityModel":
        alpha = np.asarray(alpha, dtype=float)
        n = len(alpha) // 2
        return cls(alpha[:n], alpha[n:], lower, upper)

    def to_physical(self, theta):
        return to_physical(theta, self)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draws of ``X`` via standard normal draws pushed through the clip map."""
        return to_physical(rng.standard_normal((size, self.n)), self)

    def to_dict(self) -> dict:
        def enc(v):
            return [None if not np.isfinite(x) else float(x) for x in v]
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "lower": enc(self.lower), "upper": enc(self.upper)}

    @classmethod
    def from_dict(cls, data: dict) -> "InputProbabilityModel":
        def dec(v, fill):
            if v is None:
                return None
            return [fill if x is None else x for x in v]
        return cls(data["mean"], data["std"], dec(data.get("lower"), -np.inf), dec(data.get("upper"), np.inf))


def to_physical(theta, model: InputProbabilityModel) -> np.ndarray:
    """``x = mean + std * clip(theta)`` with the clip done by inverse-CDF sampling.

    ``theta`` has shape ``(n,)`` or ``(N, n)``. Each component is mapped to a
    uniform on ``[Phi(t-), Phi(t+)]`` (``t+- = (bound - mean) / std``) and back
    through ``Phi^-1``; the output is monotone in ``theta`` and stays strictly
    inside the clip box.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != model.n:
        raise ValueError(f"expected {model.n} components, got {theta.shape[-1]}")
    mean, std, lower, upper = model.mean, model.std, model.lower, model.upper
    clipped = np.isfinite(lower) | np.isfinite(upper)
    if not clipped.any():
        return mean + std * theta
    t_lo = (lower - mean) / std
    t_hi = (upper - mean) / std
    cdf_lo, cdf_hi = ndtr(t_lo), ndtr(t_hi)
    width = cdf_hi - cdf_lo
    u = cdf_lo + ndtr(theta) * width
    # 1 - u, computed without cancellation for the upper tail
    v = ndtr(-theta) * width + ndtr(-t_hi)
    lower_half = u <= 0.5
    tilde = np.where(lower_half,
                     ndtri(np.clip(u, U_CLAMP, 0.5)),
                     -ndtri(np.clip(v, U_CLAMP, 0.5)))
    x = mean + std * tilde
    x = np.where(clipped, x, mean + std * theta)
    # rounding can land exactly on a bound; keep the box open
    return np.clip(x, np.nextafter(lower, np.inf), np.nextafter(upper, -np.inf))

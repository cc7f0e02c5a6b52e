"""Forward models: the camelback test function and a wet-clutch engagement simulator.

The clutch parameters shipped here are synthetic. They produce qualitatively
sensible traces (pressure ripple while filling, output shaft pulled up to
synchronous speed in about a second) but do not describe any real clutch.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "DomainError",
    "EngagementTimeout",
    "SingularityError",
    "ExperimentConfig",
    "ForwardModel",
    "camelback",
    "CamelbackModel",
    "CamelbackExperiments",
    "IdentityModel",
    "LinearModel",
    "ProfileShape",
    "feedforward_signal",
    "feedforward_breakpoints",
    "WetClutchParams",
    "SimulationTrace",
    "simulate_engagement",
    "simulate_trace",
    "ClutchModel",
    "factorial_design",
]

CAMELBACK_LIMIT = 6.0
RPM = 2.0 * math.pi / 60.0


class DomainError(ValueError):
    """Model input outside its admissible domain."""


class EngagementTimeout(RuntimeError):
    """No synchronisation within the simulation horizon."""


class SingularityError(ArithmeticError):
    """The Couette gap closed with torque still carried by the oil film."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Operating point of one experiment.

    ``load`` selects the brake level (``'low'`` or ``'high'``).
    """

    l: int = 1
    dt_s: float = 0.12
    u0_A: float = 0.30
    du_A: float = 0.10
    omega_m_rpm: float = 1350.0
    load: str = "low"

    def __post_init__(self):
        if not self.dt_s > 0:
            raise ValueError("dt_s must be positive")
        if not self.omega_m_rpm > 0:
            raise ValueError("omega_m_rpm must be positive")
        if self.load not in ("low", "high"):
            raise ValueError(f"load must be 'low' or 'high', got {self.load!r}")


def factorial_design(dts=(0.10, 0.12, 0.14), u0s=(0.27, 0.30, 0.33), dus=(0.08, 0.12),
                     speeds=(1200.0, 1350.0, 1500.0), loads=("low", "high")) -> list[ExperimentConfig]:
    """Full factorial grid of operating points (108 with the defaults)."""
    out = []
    for dt in dts:
        for u0 in u0s:
            for du in dus:
                for w in speeds:
                    for load in loads:
                        out.append(ExperimentConfig(len(out) + 1, dt, u0, du, w, load))
    return out


class ForwardModel(Protocol):
    n_inputs: int
    pure: bool

    def evaluate(self, config: ExperimentConfig, x) -> float: ...


# ---------------------------------------------------------------------------
# analytic models
# ---------------------------------------------------------------------------


def camelback(x):
    """``tan(x/4) + exp(x/3 - 1) + tanh(x)`` on ``|x| <= 6``.

    Pushes a standard normal input to a bimodal output density.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > CAMELBACK_LIMIT) or np.any(np.isnan(arr)):
        raise DomainError(f"camelback is only defined for |x| <= {CAMELBACK_LIMIT}")
    y = np.tan(arr / 4.0) + np.exp(arr / 3.0 - 1.0) + np.tanh(arr)
    return float(y) if np.ndim(y) == 0 else y


class CamelbackModel:
    """One-input camelback, ignoring the experiment."""

    n_inputs = 1
    pure = True

    def evaluate(self, config, x) -> float:
        return camelback(np.asarray(x, dtype=float).reshape(-1)[0])

    def evaluate_batch(self, config, X) -> np.ndarray:
        return camelback(np.asarray(X, dtype=float)[:, 0])


@dataclass(frozen=True)
class CamelbackExperiments:
    """Two-input camelback experiments, designed by the experiment index ``l``.

    ``y_l(x) = camelback(k_l (x_j - r_l) + s_l (x_o - c_o))`` where odd ``l``
    mostly probe ``x_1`` and even ``l`` mostly probe ``x_2``; the gain
    ``k_l`` cycles through 5..9, the offset ``r_l`` through ``c_j - 0.05,
    c_j, c_j + 0.05``, and the cross gain ``s_l`` alternates in sign.
    The other operating-point fields of the config are ignored.
    """

    centers: tuple[float, float] = (0.9, 0.6)
    cross_gain: float = 0.8
    n_inputs: int = field(default=2, init=False)
    pure: bool = field(default=True, init=False)

    def design(self, l: int) -> tuple[np.ndarray, float]:
        """Gain vector and constant so that the argument is ``gains @ x - const``."""
        main = (l - 1) % 2
        other = 1 - main
        step = (l - 1) // 2
        k = 5.0 + step % 5
        r = self.centers[main] + 0.05 * (step % 3 - 1)
        s = self.cross_gain * (1.0 if l % 4 < 2 else -1.0)
        gains = np.zeros(2)
        gains[main] = k
        gains[other] = s
        return gains, k * r + s * self.centers[other]

    def argument(self, config: ExperimentConfig, x) -> np.ndarray:
        gains, const = self.design(config.l)
        return np.asarray(x, dtype=float) @ gains - const

    def evaluate(self, config, x) -> float:
        return camelback(float(self.argument(config, x)))

    def evaluate_batch(self, config, X) -> np.ndarray:
        return camelback(self.argument(config, np.asarray(X, dtype=float)))


class IdentityModel:
    """``y = x_1``."""

    n_inputs = 1
    pure = True

    def evaluate(self, config, x) -> float:
        return float(np.asarray(x, dtype=float).reshape(-1)[0])

    def evaluate_batch(self, config, X) -> np.ndarray:
        return np.asarray(X, dtype=float)[:, 0].copy()


class LinearModel:
    """``y = x_1 * l``: one gain, experiment index as regressor."""

    n_inputs = 1
    pure = True

    def evaluate(self, config, x) -> float:
        return float(np.asarray(x, dtype=float).reshape(-1)[0]) * config.l

    def evaluate_batch(self, config, X) -> np.ndarray:
        return np.asarray(X, dtype=float)[:, 0] * config.l


# ---------------------------------------------------------------------------
# feedforward current profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileShape:
    """Breakpoints of the feedforward current beyond the first pulse.

    Times are measured from the end of the first pulse (``dt``). Every level
    change is a linear ramp of ``ramp`` seconds so the current derivative
    stays bounded.
    """

    u_max: float = 0.8
    hold_s: float = 0.20
    pulse_s: float = 0.15
    flank_s: float = 0.30
    final_s: float = 1.20
    u_final: float = 0.8
    ramp_s: float = 1e-3


def feedforward_breakpoints(config: ExperimentConfig, shape: ProfileShape = ProfileShape()):
    """Piecewise-linear ``(t, u)`` breakpoints of the current profile."""
    r = shape.ramp_s
    t1 = config.dt_s
    t2 = t1 + shape.hold_s
    t3 = t2 + shape.pulse_s
    t4 = t3 + shape.flank_s
    t5 = t1 + shape.final_s
    if not (t4 <= t5):
        raise ValueError("final hold starts before the flank ends")
    u0, du = config.u0_A, config.du_A
    t = [0.0, t1, t1 + r, t2, t2 + r, t3, t4, t5, t5 + r]
    u = [shape.u_max, shape.u_max, u0, u0, u0 + du, u0 + du, u0, u0, shape.u_final]
    return np.array(t), np.array(u)


def feedforward_signal(t, config: ExperimentConfig, shape: ProfileShape = ProfileShape()):
    """Current ``u(t)`` in A: full pulse for ``dt``, drop to ``u0``, second
    pulse ``u0 + du`` with a linear downward flank, then a final high hold."""
    bt, bu = feedforward_breakpoints(config, shape)
    return np.interp(t, bt, bu)


def _profile_slopes(bt, bu):
    dt = np.diff(bt)
    return np.where(dt > 0, np.diff(bu) / np.where(dt > 0, dt, 1.0), 0.0)


# ---------------------------------------------------------------------------
# wet clutch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WetClutchParams:
    """Parameters of the engagement model (SI units, synthetic defaults).

    Pressure/piston state ``s = (p_hc, dp_hc/dt, z~)`` follows
    ``ds/dt = A s + B (u, du/dt) + c`` with
    ``A = [[0, 1, 0], [a1, a2, 0], [a3, a4, a5]]``, ``B = [[0, 0], [b1, b2],
    [0, 0]]``, ``c = (0, c1, c2)``. Piston position is
    ``z = clip(z_scale * z~ + z_offset, 0, z_M)``.

    ``ft`` and ``fc`` are polynomial coefficients (constant term first) of the
    torque-ratio and capacity-factor maps over the speed ratio
    ``omega_1 / omega_m``.
    """

    a1: float = -1600.0
    a2: float = -28.0
    a3: float = 5.5e-9
    a4: float = 0.0
    a5: float = -2.0
    b1: float = 3.2e9
    b2: float = 1.6e7
    c1: float = -3.2e8
    c2: float = 2.5e-3
    z_scale: float = 1.0
    z_offset: float = 0.0
    z_p: float = 1.5e-3
    z_M: float = 2.0e-3
    gamma: float = 3.7e-4
    alpha_t: float = 6.0e-4
    R: float = 2.0
    J1: float = 0.15
    J2: float = 2.5
    Tb0_low: float = 20.0
    Tb0_high: float = 40.0
    b_visc: float = 0.05
    brake_eps: float = 1.0
    ft: tuple[float, ...] = (2.0, -0.5, -0.5)
    fc: tuple[float, ...] = (11.5, 0.0, 30.0)
    profile: ProfileShape = ProfileShape()

    def __post_init__(self):
        if not self.z_p < self.z_M:
            raise ValueError(f"need z_p < z_M, got z_p={self.z_p}, z_M={self.z_M}")
        if not (self.J1 > 0 and self.J2 > 0 and self.R > 0):
            raise ValueError("inertias and gear ratio must be positive")
        ratios = np.linspace(0.0, 1.0, 101)
        if np.any(np.polyval(self.fc[::-1], ratios) <= 0):
            raise ValueError("capacity factor fc must be positive on ratios [0, 1]")

    def brake_torque0(self, load: str) -> float:
        return self.Tb0_high if load == "high" else self.Tb0_low

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "WetClutchParams":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown clutch parameters: {sorted(unknown)}")
        if "profile" in data and isinstance(data["profile"], dict):
            data["profile"] = ProfileShape(**data["profile"])
        for key in ("ft", "fc"):
            if key in data:
                data[key] = tuple(float(v) for v in data[key])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "WetClutchParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def couette_gain(z: float, z_p: float, z_M: float) -> float:
    """``(1 - delta_t(z)) / (z_M - z)`` with a cubic smoothstep ``delta_t``.

    Written in closed form so it stays finite (and tends to zero) at ``z_M``.
    """
    if z <= z_p:
        gap = z_M - z
        if gap <= 0:
            raise SingularityError(f"gap {gap} <= 0 with no plate contact")
        return 1.0 / gap
    s = min((z - z_p) / (z_M - z_p), 1.0)
    # 1 - (3 s^2 - 2 s^3) = (1 - s)^2 (1 + 2 s); one (1 - s) cancels the gap
    return (1.0 - s) * (1.0 + 2.0 * s) / (z_M - z_p)


def smoothstep(z: float, z_p: float, z_M: float) -> float:
    if z <= z_p:
        return 0.0
    s = min((z - z_p) / (z_M - z_p), 1.0)
    return s * s * (3.0 - 2.0 * s)


def clutch_torque(w1: float, w2: float, p_hc: float, z: float, params: WetClutchParams, z_p: float) -> float:
    """Blend of plate friction ``alpha_t p`` and Couette drag by ``delta_t(z)``."""
    z_M = params.z_M
    frac = max(0.0, (z - z_p) / (z_M - z_p))
    p = frac * p_hc
    delta = smoothstep(z, z_p, z_M)
    return delta * params.alpha_t * p + params.gamma * couette_gain(z, z_p, z_M) * (w1 - params.R * w2)


def _poly(coefs, r):
    out = 0.0
    for c in reversed(coefs):
        out = out * r + c
    return out


def converter_torque(omega_m: float, w1: float, params: WetClutchParams) -> float:
    """``T_1 = omega_m^2 f_t(r) / f_c(r)^2`` with ``r = omega_1 / omega_m``."""
    r = w1 / omega_m
    return omega_m * omega_m * _poly(params.ft, r) / _poly(params.fc, r) ** 2


@dataclass
class SimulationTrace:
    t: np.ndarray
    p_hc: np.ndarray
    dp_hc: np.ndarray
    z: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    Tc: np.ndarray
    u: np.ndarray
    synchronous: np.ndarray
    shifting_time: float | None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "p_hc", "z", "omega1", "omega2", "Tc", "u"])
            for row in zip(self.t, self.p_hc, self.z, self.omega1, self.omega2, self.Tc, self.u):
                w.writerow([repr(float(v)) for v in row])


class _Engagement:
    """Right-hand sides and helpers for one (config, params, x) triple."""

    def __init__(self, config: ExperimentConfig, params: WetClutchParams, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if len(x) != 2:
            raise ValueError("clutch uncertainty vector must have two scalers (c2, z_p)")
        self.P = params
        self.c2 = params.c2 * float(x[0])
        self.z_p = params.z_p * float(x[1])
        if not 0.0 <= self.z_p < params.z_M:
            raise DomainError(f"scaled z_p={self.z_p} outside [0, z_M={params.z_M})")
        self.omega_m = config.omega_m_rpm * RPM
        self.Tb0 = params.brake_torque0(config.load)
        self.bt, self.bu = feedforward_breakpoints(config, params.profile)
        self.slopes = _profile_slopes(self.bt, self.bu)

    def current(self, t: float) -> tuple[float, float]:
        bt = self.bt
        if t >= bt[-1]:
            return float(self.bu[-1]), 0.0
        k = int(np.searchsorted(bt, t, side="right")) - 1
        k = max(k, 0)
        u = self.bu[k] + self.slopes[k] * (t - bt[k])
        return float(u), float(self.slopes[k])

    def position(self, zt: float) -> float:
        z = self.P.z_scale * zt + self.P.z_offset
        return min(max(z, 0.0), self.P.z_M)

    def brake(self, w2: float) -> float:
        P = self.P
        return self.Tb0 * math.tanh(w2 / P.brake_eps) + P.b_visc * w2

    def pressure_rhs(self, t, p, dp, zt):
        P = self.P
        u, du = self.current(t)
        return (dp,
                P.a1 * p + P.a2 * dp + P.b1 * u + P.b2 * du + P.c1,
                P.a3 * p + P.a4 * dp + P.a5 * zt + self.c2)

    def rhs_async(self, t, s):
        p, dp, zt, w1, w2 = s
        P = self.P
        f0, f1, f2 = self.pressure_rhs(t, p, dp, zt)
        z = self.position(zt)
        tc = clutch_torque(w1, w2, p, z, P, self.z_p)
        t1 = converter_torque(self.omega_m, w1, P)
        return (f0, f1, f2, (t1 - tc) / P.J1, (P.R * tc - self.brake(w2)) / P.J2)

    def rhs_sync(self, t, s):
        p, dp, zt, w1, _ = s
        P = self.P
        f0, f1, f2 = self.pressure_rhs(t, p, dp, zt)
        t1 = converter_torque(self.omega_m, w1, P)
        dw1 = (t1 - self.brake(w1 / P.R) / P.R) / (P.J1 + P.J2 / P.R**2)
        return (f0, f1, f2, dw1, dw1 / P.R)

    def initial_state(self):
        P = self.P
        z0 = self.position(0.0)
        drag = P.gamma * couette_gain(z0, self.z_p, P.z_M)

        def balance(w1):
            return converter_torque(self.omega_m, w1, P) - drag * w1

        w1 = brentq(balance, 0.0, 2.0 * self.omega_m, xtol=1e-12)
        return (0.0, 0.0, 0.0, w1, 0.0)

    def slip(self, s) -> float:
        return s[3] - self.P.R * s[4]


def _rk4(f, t, s, h):
    k1 = f(t, s)
    s2 = tuple(a + 0.5 * h * b for a, b in zip(s, k1))
    k2 = f(t + 0.5 * h, s2)
    s3 = tuple(a + 0.5 * h * b for a, b in zip(s, k2))
    k3 = f(t + 0.5 * h, s3)
    s4 = tuple(a + h * b for a, b in zip(s, k3))
    k4 = f(t + h, s4)
    return tuple(a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4))


def _run(config, params, x, h, horizon, event_tol, record, post_sync):
    eng = _Engagement(config, params, x)
    s = eng.initial_state()
    t = 0.0
    rows = [] if record else None

    def log(t, s, sync):
        z = eng.position(s[2])
        tc = clutch_torque(s[3], s[4], s[0], z, params, eng.z_p) if not sync else float("nan")
        rows.append((t, s[0], s[1], z, s[3], s[4], tc, eng.current(t)[0], sync))

    if record:
        log(t, s, False)
    n_steps = int(math.ceil(horizon / h))
    t_shift = None
    for k in range(n_steps):
        s_new = _rk4(eng.rhs_async, t, s, h)
        if not all(math.isfinite(v) for v in s_new):
            raise ArithmeticError(f"non-finite state at t={t + h}")
        if eng.slip(s_new) <= 0.0:
            lo, hi = 0.0, h
            while hi - lo > event_tol:
                mid = 0.5 * (lo + hi)
                if eng.slip(_rk4(eng.rhs_async, t, s, mid)) > 0.0:
                    lo = mid
                else:
                    hi = mid
            tau = 0.5 * (lo + hi)
            s = _rk4(eng.rhs_async, t, s, tau)
            t_shift = t + tau
            t = t_shift
            if record:
                log(t, s, False)
            break
        s = s_new
        t = (k + 1) * h
        if record:
            log(t, s, False)
    if t_shift is None:
        raise EngagementTimeout(f"no synchronisation within {horizon} s")
    if record and post_sync > 0:
        s = (s[0], s[1], s[2], s[3], s[3] / params.R)
        t_end = t + post_sync
        while t < t_end - 1e-12:
            step = min(h, t_end - t)
            s = _rk4(eng.rhs_sync, t, s, step)
            t += step
            log(t, s, True)
    if not record:
        return t_shift, None
    cols = list(zip(*rows))
    trace = SimulationTrace(*(np.array(c, dtype=float) for c in cols[:8]), np.array(cols[8], dtype=bool),
                            shifting_time=t_shift)
    return t_shift, trace


def simulate_engagement(config: ExperimentConfig, params: WetClutchParams = WetClutchParams(), x=(1.0, 1.0), *,
                        h: float = 5e-4, horizon: float = 5.0, event_tol: float = 1e-6) -> float:
    """Shifting time in seconds: first time ``omega_1 = R omega_2``.

    ``x`` scales ``c2`` and ``z_p``. Integrates with fixed-step RK4 and
    locates the synchronisation by bisection on the step fraction.

    Raises
    ------
    EngagementTimeout
        If the shafts do not synchronise within ``horizon``.
    """
    return _run(config, params, x, h, horizon, event_tol, False, 0.0)[0]


def simulate_trace(config: ExperimentConfig, params: WetClutchParams = WetClutchParams(), x=(1.0, 1.0), *,
                   h: float = 5e-4, horizon: float = 5.0, event_tol: float = 1e-6,
                   post_sync: float = 0.2) -> SimulationTrace:
    """Like :func:`simulate_engagement` but records the full trace, continuing
    ``post_sync`` seconds into the synchronous phase."""
    return _run(config, params, x, h, horizon, event_tol, True, post_sync)[1]


@dataclass(frozen=True)
class ClutchModel:
    """Shifting-time model with ``x = (c2 scaler, z_p scaler)``."""

    params: WetClutchParams = WetClutchParams()
    h: float = 5e-4
    horizon: float = 5.0
    n_inputs: int = field(default=2, init=False)
    pure: bool = field(default=True, init=False)

    def evaluate(self, config, x) -> float:
        return simulate_engagement(config, self.params, x, h=self.h, horizon=self.horizon)

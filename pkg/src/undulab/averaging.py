"""First-order averaging for weakly nonlinear oscillators x'' + x = eps f(x, x'; t).

In polar form x = a sin(phi), x' = a cos(phi), phi = t + theta, the exact
slow flow is

    a'     =  eps f cos(phi)
    theta' = -(eps / a) f sin(phi)

and averaging over one period of phi gives a' = eps fc(a),
theta' = -(eps / a) fs(a) with (fc, fs) the first Fourier coefficients of f.

Forcing callables take ``(x, xdot, t)`` and must accept numpy arrays.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .oscillator_net import demodulate

Forcing = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class OscillatorProblem:
    forcing: Forcing
    epsilon: float
    autonomous: bool = True
    name: str = "custom"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.epsilon > 0.5:
            warnings.warn(f"epsilon={self.epsilon} is not small; averaging may be poor",
                          stacklevel=3)

    def with_epsilon(self, epsilon: float) -> "OscillatorProblem":
        return OscillatorProblem(self.forcing, epsilon, self.autonomous, self.name)


def van_der_pol(epsilon: float) -> OscillatorProblem:
    return OscillatorProblem(lambda x, v, t: (1 - x ** 2) * v, epsilon, True, "van_der_pol")


def forced_van_der_pol(epsilon: float, A: float, Omega: float) -> OscillatorProblem:
    return OscillatorProblem(lambda x, v, t: (1 - x ** 2) * v + A * np.cos(Omega * t),
                             epsilon, A == 0, "forced_van_der_pol")


def linear_growth(epsilon: float) -> OscillatorProblem:
    """f = x': exponential growth at rate eps / 2."""
    return OscillatorProblem(lambda x, v, t: v, epsilon, True, "linear_growth")


def circular_limit_cycle(epsilon: float) -> OscillatorProblem:
    """f = (1 - x^2 - x'^2) x', limit cycle of radius exactly 1."""
    return OscillatorProblem(lambda x, v, t: (1 - x ** 2 - v ** 2) * v, epsilon, True,
                             "circular_limit_cycle")


@dataclass(frozen=True)
class PolarState:
    a: float
    phi: float
    theta: float


def to_polar(x: float, xdot: float, t: float = 0.0) -> PolarState:
    if x == 0 and xdot == 0:
        raise ValueError("phase is undefined at the origin")
    phi = math.atan2(x, xdot)
    return PolarState(math.hypot(x, xdot), phi, phi - t)


def from_polar(p: PolarState) -> tuple[float, float]:
    return p.a * math.sin(p.phi), p.a * math.cos(p.phi)


def slow_flow_rhs(p: OscillatorProblem, a: float, phi: float, t: float) -> tuple[float, float]:
    """Exact polar equations ``(da/dt, dtheta/dt)``; no averaging."""
    if a <= 0:
        raise ValueError("amplitude must be positive")
    s, c = math.sin(phi), math.cos(phi)
    f = float(p.forcing(a * s, a * c, t))
    return p.epsilon * f * c, -(p.epsilon / a) * f * s


class QuadratureError(RuntimeError):
    pass


def averaged_rhs(p: OscillatorProblem, a: float, t: float | None = None,
                 rtol: float = 1e-12, max_points: int = 1 << 16) -> tuple[float, float]:
    """``(fc(a), fs(a))``, the cos/sin Fourier coefficients of f over phi.

    Periodic trapezoid rule with point doubling until successive estimates
    agree; exponentially convergent for smooth f. A non-autonomous forcing is
    averaged with ``t`` frozen and ``t`` must then be given.
    """
    if not p.autonomous and t is None:
        raise ValueError("non-autonomous forcing needs a frozen time t")
    tt = 0.0 if t is None else t
    n = 64
    prev = None
    while n <= max_points:
        phi = 2 * np.pi * np.arange(n) / n
        s, c = np.sin(phi), np.cos(phi)
        f = np.broadcast_to(p.forcing(a * s, a * c, tt), phi.shape)
        cur = np.array([np.mean(f * c), np.mean(f * s)])
        if prev is not None:
            scale = max(np.max(np.abs(cur)), abs(a), 1.0)
            if np.max(np.abs(cur - prev)) <= rtol * scale:
                return float(cur[0]), float(cur[1])
        prev = cur
        n *= 2
    raise QuadratureError(f"averaging integral did not converge with {max_points} points")


def limit_cycle_amplitude(p: OscillatorProblem, a_max: float = 10.0, grid: int = 2000,
                          xtol: float = 1e-12) -> list[tuple[float, str]]:
    """Positive roots of fc on (0, a_max] with their stability.

    A root is stable when fc decreases through it.
    """
    if not p.autonomous:
        raise ValueError("limit cycles are defined for autonomous forcing")
    a_grid = np.linspace(a_max / grid, a_max, grid)
    fc = np.array([averaged_rhs(p, a)[0] for a in a_grid])
    roots = []
    for i in range(grid - 1):
        lo, hi = a_grid[i], a_grid[i + 1]
        if fc[i] == 0.0:
            root = lo
        elif fc[i] * fc[i + 1] < 0:
            root = brentq(lambda a: averaged_rhs(p, a)[0], lo, hi, xtol=xtol)
        else:
            continue
        h = 1e-5 * max(root, 1.0)
        slope = (averaged_rhs(p, root + h)[0] - averaged_rhs(p, root - h)[0]) / (2 * h)
        roots.append((float(root), "stable" if slope < 0 else "unstable"))
    return roots


def _rk4(f, y, t, dt):
    k1 = f(y, t)
    k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(y + dt * k3, t + dt)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_full(p: OscillatorProblem, x0: float, v0: float, dt: float, T: float,
                   allow_coarse: bool = False) -> dict[str, np.ndarray]:
    """RK4 on the second-order system; returns arrays ``t, x, v``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > 0.05 and not allow_coarse:
        raise ValueError("dt must be <= 0.05 to resolve the carrier")
    eps, f = p.epsilon, p.forcing

    def rhs(y, t):
        return np.array([y[1], -y[0] + eps * f(y[0], y[1], t)])

    steps = int(round(T / dt))
    out = np.empty((steps + 1, 2))
    y = np.array([x0, v0], dtype=float)
    out[0] = y
    for i in range(steps):
        y = _rk4(rhs, y, i * dt, dt)
        out[i + 1] = y
    t = dt * np.arange(steps + 1)
    return {"t": t, "x": out[:, 0], "v": out[:, 1]}


def integrate_slow(p: OscillatorProblem, a0: float, theta0: float, dt: float, T: float
                   ) -> dict[str, np.ndarray]:
    """RK4 on the averaged first-order system; returns ``t, a, theta``."""
    if a0 <= 0:
        raise ValueError("a0 must be positive")
    eps = p.epsilon

    def rhs(y, t):
        a = max(y[0], 1e-300)
        fc, fs = averaged_rhs(p, a, None if p.autonomous else t)
        return np.array([eps * fc, -(eps / a) * fs])

    steps = int(round(T / dt))
    out = np.empty((steps + 1, 2))
    y = np.array([a0, theta0], dtype=float)
    out[0] = y
    for i in range(steps):
        y = _rk4(rhs, y, i * dt, dt)
        out[i + 1] = y
    return {"t": dt * np.arange(steps + 1), "a": out[:, 0], "theta": out[:, 1]}


def integrate_polar(p: OscillatorProblem, a0: float, phi0: float, dt: float, T: float
                    ) -> dict[str, np.ndarray]:
    """RK4 on the exact (unaveraged) polar flow; returns ``t, a, phi``."""
    def rhs(y, t):
        da, dth = slow_flow_rhs(p, y[0], y[1], t)
        return np.array([da, 1.0 + dth])

    steps = int(round(T / dt))
    out = np.empty((steps + 1, 2))
    y = np.array([a0, phi0], dtype=float)
    out[0] = y
    for i in range(steps):
        y = _rk4(rhs, y, i * dt, dt)
        out[i + 1] = y
    return {"t": dt * np.arange(steps + 1), "a": out[:, 0], "phi": out[:, 1]}


def van_der_pol_averaged_amplitude(t, a0: float, epsilon: float):
    """Closed-form solution of a' = eps (a/2)(1 - a^2/4)."""
    return 2.0 / np.sqrt(1.0 + (4.0 / a0 ** 2 - 1.0) * np.exp(-epsilon * np.asarray(t)))


def demodulated_envelope(traj: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Slowly varying amplitude of a full trajectory via carrier demodulation."""
    dt = traj["t"][1] - traj["t"][0]
    d = demodulate(traj["x"], dt, 1.0)
    return d.t, d.carrier_amp + d.slow_amp


def _envelope_error(p: OscillatorProblem, x0: float, v0: float, T: float, dt: float) -> float:
    horizon = min(T, 1.0 / p.epsilon) if p.epsilon > 0 else T
    full = integrate_full(p, x0, v0, dt, horizon)
    # the polar radius is the exact amplitude variable of the slow flow
    a_full = np.hypot(full["x"], full["v"])
    start = to_polar(x0, v0)
    slow = integrate_slow(p, start.a, start.theta, dt, horizon)
    return float(np.max(np.abs(a_full - slow["a"])))


def compare_full_vs_averaged(p: OscillatorProblem, x0: float, v0: float, T: float,
                             dt: float = 0.01) -> dict[str, float]:
    """Max amplitude error between full and averaged dynamics on the horizon
    [0, min(T, 1/eps)], at eps and at eps/2, and their ratio."""
    if p.epsilon == 0:
        return {"error": 0.0, "error_half": 0.0, "ratio": float("nan")}
    err = _envelope_error(p, x0, v0, T, dt)
    err_half = _envelope_error(p.with_epsilon(p.epsilon / 2), x0, v0, T, dt)
    return {"error": err, "error_half": err_half,
            "ratio": err / err_half if err_half > 0 else float("inf")}


def response_frequency(t: np.ndarray, x: np.ndarray) -> float:
    """Angular frequency from upward zero crossings, linearly interpolated."""
    up = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    if up.size < 2:
        return float("nan")
    tc = t[up] - x[up] * (t[up + 1] - t[up]) / (x[up + 1] - x[up])
    return float(2 * np.pi * (tc.size - 1) / (tc[-1] - tc[0]))


def forced_response(epsilon: float, A: float, Omega: float, T: float = 2000.0,
                    dt: float = 0.05, x0: float = 0.5, v0: float = 0.0,
                    lock_tol: float = 1e-3) -> dict:
    """Forced van der Pol run; the response frequency is measured over the
    last half and compared with the drive frequency."""
    if epsilon > 0.3:
        raise ValueError("forced response is only meaningful for eps <= 0.3")
    p = forced_van_der_pol(epsilon, A, Omega)
    traj = integrate_full(p, x0, v0, dt, T)
    half = traj["t"].size // 2
    freq = response_frequency(traj["t"][half:], traj["x"][half:])
    locked = bool(A != 0 and abs(freq - Omega) <= lock_tol)
    return {"epsilon": epsilon, "A": A, "Omega": Omega, "response_freq": freq,
            "locked": locked, "max_error": abs(freq - Omega)}

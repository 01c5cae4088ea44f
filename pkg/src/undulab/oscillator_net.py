"""Kuramoto-type phase oscillators on graphs, order parameters, and
two-scale demodulation of undulating signals."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph_core import LOCAL, TRANSLOCAL, Graph, build_lattice_with_shortcuts

TWO_PI = 2 * np.pi


def wrap_phase(theta):
    """Map phases to [0, 2*pi)."""
    return np.mod(theta, TWO_PI)


def wrap_difference(d):
    """Map phase differences to [-pi, pi)."""
    return (np.asarray(d) + np.pi) % TWO_PI - np.pi


@dataclass
class OscillatorNetwork:
    graph: Graph
    theta: np.ndarray
    omega: np.ndarray
    coupling: float = 1.0
    j_local: float = 1.0
    j_translocal: float = 1.0
    edge_weight: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.graph.node_count
        self.theta = wrap_phase(np.asarray(self.theta, dtype=float))
        self.omega = np.asarray(self.omega, dtype=float)
        if self.theta.shape != (n,) or self.omega.shape != (n,):
            raise ValueError("theta and omega must have one entry per node")
        if not np.all(np.isfinite(self.omega)):
            raise ValueError("omega must be finite")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")

    def weight_matrix(self) -> sp.csr_matrix:
        """Symmetric matrix of per-edge coupling weights J."""
        n = self.graph.node_count
        rows, cols, vals = [], [], []
        for (u, v), kind in self.graph.edges.items():
            w = self.edge_weight.get((u, v))
            if w is None:
                w = self.j_local if kind == LOCAL else self.j_translocal
            rows += [u, v]
            cols += [v, u]
            vals += [w, w]
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class StabilityError(ValueError):
    pass


def _rk4_step(f, y, t, dt):
    k1 = f(y, t)
    k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(y + dt * k3, t + dt)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def kuramoto_rhs(net: OscillatorNetwork):
    w = net.weight_matrix()
    omega, alpha = net.omega, net.coupling

    def f(theta, t):
        s, c = np.sin(theta), np.cos(theta)
        # sum_j J_ij sin(theta_i - theta_j) = sin_i (J cos)_i - cos_i (J sin)_i
        return omega - alpha * (s * (w @ c) - c * (w @ s))

    return f


def integrate(net: OscillatorNetwork, dt: float, steps: int, method: str = "rk4",
              record_every: int = 1, allow_unstable: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the network; returns ``(t, theta)`` with wrapped phases of
    shape ``(records, N)``. The internal state is unwrapped."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    wmax = float(np.max(np.abs(net.omega))) if net.omega.size else 0.0
    if dt * wmax > 0.2 and not allow_unstable:
        raise StabilityError(f"dt*max|omega| = {dt * wmax:.3g} exceeds 0.2")
    f = kuramoto_rhs(net)
    y = net.theta.astype(float).copy()
    ts, out = [0.0], [wrap_phase(y)]
    for i in range(1, steps + 1):
        t = (i - 1) * dt
        if method == "rk4":
            y = _rk4_step(f, y, t, dt)
        else:
            y = y + dt * f(y, t)
        if i % record_every == 0 or i == steps:
            ts.append(i * dt)
            out.append(wrap_phase(y))
    return np.asarray(ts), np.asarray(out)


def write_trajectory_csv(path: str | Path, t: np.ndarray, theta: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node", "theta"])
        for ti, row in zip(t, theta):
            for node, th in enumerate(row):
                w.writerow([repr(float(ti)), node, repr(float(th))])


def order_parameter(theta) -> tuple[float, float]:
    """Modulus and argument of the mean unit phasor."""
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0:
        raise ValueError("need at least one phase")
    z = np.exp(1j * theta).mean()
    return float(min(abs(z), 1.0)), float(np.angle(z))


def pair_correlation(theta, positions, bin_width: float, side: int | None = None,
                     max_pairs: int = 200_000, seed: int = 0) -> dict[str, np.ndarray]:
    """Mean of cos(theta_i - theta_j) over node pairs, binned by distance.

    Distances are Euclidean, with the periodic minimum image when ``side``
    is given. All pairs are used up to 2000 nodes; larger networks are
    subsampled to ``max_pairs`` seeded random pairs. Empty bins are omitted.
    """
    theta = np.asarray(theta, dtype=float)
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    n = theta.size
    if pos.shape[0] != n:
        raise ValueError("positions must have one row per node")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if n <= 2000:
        i, j = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(n, size=max_pairs)
        j = rng.integers(n - 1, size=max_pairs)
        j = np.where(j >= i, j + 1, j)
    d = np.abs(pos[i] - pos[j])
    if side is not None:
        d = np.minimum(d, side - d)
    r = np.sqrt((d ** 2).sum(axis=1))
    b = np.floor(r / bin_width).astype(int)
    c = np.cos(theta[i] - theta[j])
    counts = np.bincount(b)
    sums = np.bincount(b, weights=c)
    keep = counts > 0
    idx = np.flatnonzero(keep)
    return {
        "r": (idx + 0.5) * bin_width,
        "C": sums[keep] / counts[keep],
        "pairs": counts[keep],
    }


def two_oscillator_lock(delta_omega: float, alpha: float, J: float = 1.0, T: float = 200.0,
                        dt: float = 0.01, theta0: float = 0.0, drift_tol: float = 0.05) -> dict:
    """Simulate two coupled oscillators and classify the phase difference.

    Locked means the unwrapped difference moves by less than ``drift_tol``
    over the second half of the run.
    """
    # for a pair the network equations reduce exactly to
    # dD/dt = delta_omega - 2 alpha J sin D, with D = theta_1 - theta_0
    k = 2.0 * alpha * J

    def f(d):
        return delta_omega - k * math.sin(d)

    steps = int(round(T / dt))
    half = steps // 2
    d = diff_half = float(theta0)
    for i in range(steps):
        k1 = f(d)
        k2 = f(d + 0.5 * dt * k1)
        k3 = f(d + 0.5 * dt * k2)
        k4 = f(d + dt * k3)
        d += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if i + 1 == half:
            diff_half = d
    diff_end = d
    drift = abs(diff_end - diff_half)
    locked = drift < drift_tol
    return {
        "locked": bool(locked),
        "phase_difference": float(wrap_difference(diff_end)),
        "drift": float(drift),
        "predicted": float(math.asin(delta_omega / (2 * alpha * J)))
        if abs(delta_omega) <= 2 * alpha * J else None,
    }


# -- synchronization ensembles ----------------------------------------------

def _initial_phases(rng, n, init):
    if init == "uniform":
        return rng.uniform(0, TWO_PI, n)
    if init == "half_circle":
        return rng.uniform(0, np.pi, n)
    raise ValueError(f"unknown initial condition {init!r}")


def sync_run(side: int, dims: int, shortcut_prob: float, sigma_omega: float, alpha: float,
             T: float, seed: int, dt: float = 0.05, mean_omega: float = 0.0,
             init: str = "uniform", bin_width: float = 1.0) -> dict:
    """One seeded run: graph, frequencies and initial phases all derive from
    ``seed``; the graph stream is independent of the dynamics stream so that
    a ``shortcut_prob = 0`` control sees identical frequencies and phases."""
    if sigma_omega < 0:
        raise ValueError("sigma_omega must be non-negative")
    graph_seed, dyn_seed = np.random.SeedSequence(seed).spawn(2)
    g = build_lattice_with_shortcuts(side, dims, shortcut_prob,
                                     int(graph_seed.generate_state(1)[0]))
    rng = np.random.default_rng(dyn_seed)
    n = g.node_count
    omega = mean_omega + sigma_omega * rng.standard_normal(n)
    theta0 = _initial_phases(rng, n, init)
    net = OscillatorNetwork(g, theta0, omega, coupling=alpha)
    steps = int(round(T / dt))
    _, traj = integrate(net, dt, steps, record_every=steps)
    final = traj[-1]
    R, phi = order_parameter(final)
    corr = pair_correlation(final, g.positions, bin_width, side=side, seed=seed)
    return {"seed": seed, "R": R, "phi": phi, "translocal_edges": g.edge_count(TRANSLOCAL),
            "corr_r": corr["r"], "corr_C": corr["C"]}


def sync_experiment(side: int, dims: int, shortcut_prob: float, sigma_omega: float,
                    alpha: float, T: float, seeds: Sequence[int], dt: float = 0.05,
                    mean_omega: float = 0.0, init: str = "uniform",
                    bin_width: float = 1.0) -> dict:
    """Mean final order parameter and phase correlation over seeds, for the
    requested shortcut density and for the shortcut-free control."""
    out = {}
    for label, p in (("shortcuts", shortcut_prob), ("control", 0.0)):
        runs = [sync_run(side, dims, p, sigma_omega, alpha, T, s, dt, mean_omega, init, bin_width)
                for s in seeds]
        Rs = np.array([r["R"] for r in runs])
        r_axis = runs[0]["corr_r"]
        Cs = np.array([r["corr_C"] for r in runs])
        out[label] = {
            "shortcut_prob": p,
            "R_per_seed": Rs.tolist(),
            "R_mean": float(Rs.mean()),
            "R_sem": float(Rs.std(ddof=1) / math.sqrt(len(Rs))) if len(Rs) > 1 else 0.0,
            "corr_r": r_axis.tolist(),
            "corr_C": Cs.mean(axis=0).tolist(),
        }
    out["R_gain"] = out["shortcuts"]["R_mean"] - out["control"]["R_mean"]
    return out


# -- undulation demodulation -------------------------------------------------

@dataclass
class UndulationDecomposition:
    """Carrier plus slow modulation: ``q ~ (A0 + a) sin(omega0 t + theta) + residual``.

    ``slow_amp`` is signed; an envelope that passes through zero keeps a
    continuous phase and changes sign instead.
    """

    t: np.ndarray
    carrier_amp: float
    carrier_freq: float
    slow_amp: np.ndarray
    slow_phase: np.ndarray
    residual: np.ndarray
    signal: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.carrier_amp + self.slow_amp) * np.sin(self.carrier_freq * self.t
                                                           + self.slow_phase)


def _boxcar_cascade(x: np.ndarray, width: int, stages: int) -> tuple[np.ndarray, int]:
    """Centred moving averages in 'valid' mode; the kernel is symmetric so
    the cascade has zero phase."""
    kernel = np.ones(width) / width
    full = kernel
    for _ in range(stages - 1):
        full = np.convolve(full, kernel)
    return np.convolve(x, full, mode="valid"), full.size


def demodulate(q, dt: float, omega0: float, cutoff: float | None = None,
               t0: float = 0.0, stages: int = 3) -> UndulationDecomposition:
    """Quadrature demodulation of ``q`` against the carrier ``omega0``.

    The products with ``2 sin`` and ``2 cos`` of the carrier are low-passed
    by a cascade of centred moving averages. Each average spans the smallest
    whole number of carrier half-periods not shorter than ``pi / cutoff``,
    which nulls the doubled-frequency ripple. Samples within half a kernel of
    either end are dropped, so the returned series is shorter than ``q``.
    """
    q = np.asarray(q, dtype=float)
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if cutoff is None:
        cutoff = 0.5 * omega0
    if not 0 < cutoff < omega0:
        raise ValueError("cutoff must lie in (0, omega0)")
    period = TWO_PI / omega0
    if period / dt < 10:
        raise ValueError("undersampled: need at least 10 samples per carrier period")
    if q.size * dt < 20 * period:
        raise ValueError("series must span at least 20 carrier periods")
    t = t0 + dt * np.arange(q.size)
    half_periods = math.ceil((np.pi / cutoff) / (np.pi / omega0) - 1e-9)
    width = max(1, int(round(half_periods * (np.pi / omega0) / dt)))
    i_raw = 2 * q * np.sin(omega0 * t)
    q_raw = 2 * q * np.cos(omega0 * t)
    i_lp, k = _boxcar_cascade(i_raw, width, stages)
    q_lp, _ = _boxcar_cascade(q_raw, width, stages)
    lo = (k - 1) // 2
    tv = t[lo: lo + i_lp.size]
    # phase modulo pi, unwrapped; the envelope is the signed projection
    theta = 0.5 * np.unwrap(2 * np.arctan2(q_lp, i_lp))
    amp = i_lp * np.cos(theta) + q_lp * np.sin(theta)
    if amp.mean() < 0:
        amp, theta = -amp, theta + np.pi
    shift = np.round(theta[0] / (2 * np.pi)) * 2 * np.pi
    theta = theta - shift
    a0 = float(amp.mean())
    a = amp - a0
    sig = q[lo: lo + i_lp.size]
    recon = amp * np.sin(omega0 * tv + theta)
    return UndulationDecomposition(tv, a0, omega0, a, theta, sig - recon, sig)


@dataclass
class SeparationReport:
    ratios: dict[str, float]
    factor: float

    @property
    def passed(self) -> dict[str, bool]:
        return {k: v <= self.factor for k, v in self.ratios.items()}

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


def scale_separation_check(d: UndulationDecomposition, factor: float = 0.1) -> SeparationReport:
    """Two-scale inequalities as ratios against ``factor``:

    - ``amplitude``: max|a| / A0
    - ``fast_amplitude``: max|residual| / A0
    - ``amplitude_rate``: max|da/dt| / (omega0 A0)
    - ``phase_rate``: max|dtheta/dt| / omega0
    """
    a0, w0 = d.carrier_amp, d.carrier_freq
    dt = d.t[1] - d.t[0] if d.t.size > 1 else 1.0
    a_dot = np.gradient(d.slow_amp, dt) if d.t.size > 1 else np.zeros(1)
    th_dot = np.gradient(d.slow_phase, dt) if d.t.size > 1 else np.zeros(1)
    scale = abs(a0) if a0 != 0 else float("nan")
    ratios = {
        "amplitude": float(np.max(np.abs(d.slow_amp)) / scale),
        "fast_amplitude": float(np.max(np.abs(d.residual)) / scale),
        "amplitude_rate": float(np.max(np.abs(a_dot)) / (w0 * scale)),
        "phase_rate": float(np.max(np.abs(th_dot)) / w0),
    }
    return SeparationReport(ratios, factor)

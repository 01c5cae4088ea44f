"""Schrodinger dynamics on periodic grids and its amplitude/phase form.

With psi = R exp(iS) (hbar = 1) the standard Madelung equations read

    d(R^2)/dt = -div(R^2 grad S / m)
    dS/dt     = -|grad S|^2 / 2m - V + (1 / 2m) lap R / R

The printed variant with the signs of V and the quantum potential flipped is
available as the ``"printed"`` convention so both can be checked against the
same trajectory.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

HBAR = 1.0
CONVENTIONS = ("standard", "printed")


@dataclass
class WaveFunction:
    """Complex amplitudes on a uniform periodic grid.

    ``masses`` has one entry per grid axis; a 2D grid holds two particles on
    a line (configuration space).
    """

    values: np.ndarray
    dx: float
    masses: tuple[float, ...] = (1.0,)
    origin: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim not in (1, 2):
            raise ValueError("wave functions live on 1D or 2D grids")
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        m = tuple(float(v) for v in np.atleast_1d(self.masses))
        if len(m) == 1 and self.values.ndim == 2:
            m = m * 2
        if len(m) != self.values.ndim or min(m) <= 0:
            raise ValueError("need one positive mass per axis")
        self.masses = m

    @classmethod
    def from_grid(cls, values, x: np.ndarray, masses=(1.0,)) -> "WaveFunction":
        """Build from values sampled on the uniform coordinates ``x``."""
        x = np.asarray(x, dtype=float)
        return cls(values, float(x[1] - x[0]), masses, float(x[0]))

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def axis(self, i: int = 0) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.values.shape[i])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.dx ** self.ndim))

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.values / self.norm(), self.dx, self.masses, self.origin)


def grid(n: int, length: float) -> tuple[np.ndarray, float]:
    """Centred periodic grid of ``n`` points over ``[-length/2, length/2)``."""
    dx = length / n
    return -length / 2 + dx * np.arange(n), dx


def gaussian_packet(x, x0: float = 0.0, sigma: float = 1.0, k0: float = 0.0) -> np.ndarray:
    """Normalized packet with position spread ``sigma`` (density std)."""
    x = np.asarray(x, dtype=float)
    return ((2 * np.pi * sigma ** 2) ** -0.25
            * np.exp(-((x - x0) ** 2) / (4 * sigma ** 2) + 1j * k0 * x))


def harmonic_ground_state(x, m: float = 1.0, w: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (m * w / np.pi) ** 0.25 * np.exp(-m * w * x ** 2 / 2) + 0j


def entangled_pair(x, d: float = 1.0, k0: float = 1.5, sigma: float = 1.0) -> np.ndarray:
    """Symmetrized two-particle state g_a(x1) g_b(x2) + g_b(x1) g_a(x2) with
    packets at +-d carrying momenta +-k0; its phase is not additive."""
    ga = gaussian_packet(x, -d, sigma, k0)
    gb = gaussian_packet(x, d, sigma, -k0)
    return np.outer(ga, gb) + np.outer(gb, ga)


def _k_axes(shape, dx):
    return [2 * np.pi * np.fft.fftfreq(n, dx) for n in shape]


def kinetic_symbol(shape, dx, masses) -> np.ndarray:
    ks = np.meshgrid(*_k_axes(shape, dx), indexing="ij")
    return sum(k ** 2 / (2 * m) for k, m in zip(ks, masses))


@dataclass
class Trajectory:
    t: np.ndarray
    psi: np.ndarray
    dx: float
    masses: tuple[float, ...]
    origin: float = 0.0
    V: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def snapshot(self, i: int) -> WaveFunction:
        return WaveFunction(self.psi[i], self.dx, self.masses, self.origin)


class StepGuardError(ValueError):
    pass


def _propagator(shape, dx, masses, V, dt):
    """One-step propagator for the spectrally discretized Hamiltonian.

    Exact exponential for constant V (pure Fourier phases) and for any V in
    1D (dense eigendecomposition); Strang splitting for 2D with a potential.
    """
    T = kinetic_symbol(shape, dx, masses)
    if V is None or np.ptp(V) == 0:
        phase = np.exp(-1j * dt * T)
        if V is not None and V.flat[0] != 0:
            phase = phase * np.exp(-1j * dt * V.flat[0])
        return lambda psi: np.fft.ifftn(phase * np.fft.fftn(psi))
    if len(shape) == 1:
        n = shape[0]
        F = np.fft.fft(np.eye(n), axis=0)
        H = (np.conj(F).T * T) @ F / n + np.diag(V)
        H = 0.5 * (H + np.conj(H).T)
        E, Q = np.linalg.eigh(H)
        U = (Q * np.exp(-1j * dt * E)) @ np.conj(Q).T
        return lambda psi: U @ psi
    half = np.exp(-0.5j * dt * V)
    kin = np.exp(-1j * dt * T)
    return lambda psi: half * np.fft.ifftn(kin * np.fft.fftn(half * psi))


def evolve(psi0: WaveFunction, V=None, dt: float = 1e-3, steps: int = 100, stride: int = 1,
           check_dt: bool = True) -> Trajectory:
    """Unitary evolution; snapshots every ``stride`` steps (plus the start).

    The guard ``dt <= dx^2 m`` keeps the step below the grid's fastest
    kinetic time scale; pass ``check_dt=False`` to override it.
    """
    if dt <= 0 or steps < 1 or stride < 1:
        raise ValueError("dt, steps and stride must be positive")
    if check_dt and dt > psi0.dx ** 2 * min(psi0.masses) * (1 + 1e-9):
        raise StepGuardError(f"dt={dt} exceeds dx^2 m={psi0.dx ** 2 * min(psi0.masses)}")
    if V is not None:
        V = np.broadcast_to(np.asarray(V, dtype=float), psi0.values.shape)
    step = _propagator(psi0.values.shape, psi0.dx, psi0.masses, V, dt)
    psi = psi0.values.copy()
    ts, snaps = [0.0], [psi.copy()]
    for i in range(1, steps + 1):
        psi = step(psi)
        if i % stride == 0:
            ts.append(i * dt)
            snaps.append(psi.copy())
    return Trajectory(np.asarray(ts), np.asarray(snaps), psi0.dx, psi0.masses, psi0.origin,
                      None if V is None else np.array(V))


def evolve_two_particle(psi0: np.ndarray, V, m1: float, m2: float, dx: float, dt: float,
                        steps: int, stride: int = 1, origin: float = 0.0,
                        check_dt: bool = True) -> Trajectory:
    psi0 = np.asarray(psi0)
    if psi0.ndim != 2 or psi0.shape[0] != psi0.shape[1]:
        raise ValueError("two-particle states live on an N x N grid")
    if psi0.shape[0] > 512:
        raise ValueError("N must be <= 512")
    return evolve(WaveFunction(psi0, dx, (m1, m2), origin), V, dt, steps, stride, check_dt)


# -- amplitude / phase split -------------------------------------------------

@dataclass
class MadelungPair:
    R: np.ndarray
    S: np.ndarray
    node_mask: np.ndarray
    branch_cuts: int = 0

    def reconstruct(self) -> np.ndarray:
        return np.where(self.node_mask, 0.0, self.R * np.exp(1j * np.nan_to_num(self.S)))

    def velocity(self, dx: float, masses: Sequence[float]) -> list[np.ndarray]:
        return [np.gradient(self.S, dx, axis=a) / m for a, m in enumerate(masses)]


def _grid_graph(mask: np.ndarray):
    """Sparse adjacency between 4-neighbour unmasked sites (no wrap)."""
    shape = mask.shape
    idx = np.arange(mask.size).reshape(shape)
    rows, cols = [], []
    for ax in range(mask.ndim):
        a = [slice(None)] * mask.ndim
        b = [slice(None)] * mask.ndim
        a[ax], b[ax] = slice(0, -1), slice(1, None)
        ok = ~mask[tuple(a)] & ~mask[tuple(b)]
        rows.append(idx[tuple(a)][ok])
        cols.append(idx[tuple(b)][ok])
    r = np.concatenate(rows) if rows else np.empty(0, int)
    c = np.concatenate(cols) if cols else np.empty(0, int)
    data = np.ones(r.size)
    return coo_matrix((data, (r, c)), shape=(mask.size, mask.size)).tocsr(), r, c


def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def split(psi: WaveFunction | np.ndarray, floor: float = 1e-6) -> MadelungPair:
    """``R = |psi|`` and a path-unwrapped phase ``S`` (times hbar).

    Sites with ``R < floor * max R`` are masked and carry ``S = nan``. The
    phase is accumulated along a breadth-first spanning tree from the largest
    amplitude of each connected unmasked region; adjacent unmasked pairs that
    still differ by pi or more are counted as branch cuts, not repaired.
    """
    values = psi.values if isinstance(psi, WaveFunction) else np.asarray(psi, dtype=complex)
    R = np.abs(values)
    if R.max() == 0:
        raise ValueError("wave function vanishes everywhere")
    mask = R < floor * R.max()
    if mask.all():
        raise ValueError("every site is below the amplitude floor")
    raw = np.angle(values).ravel()
    flat_mask = mask.ravel()
    Rf = R.ravel()
    adj, r_idx, c_idx = _grid_graph(mask)
    ncomp, labels = connected_components(adj, directed=False)
    S = np.full(values.size, np.nan)
    done = flat_mask.copy()
    for _ in range(ncomp):
        free = np.flatnonzero(~done)
        if free.size == 0:
            break
        root = free[np.argmax(Rf[free])]
        order, pred = breadth_first_order(adj, root, directed=False, return_predecessors=True)
        S[root] = raw[root]
        for node in order[1:]:
            p = pred[node]
            S[node] = S[p] + _wrap(raw[node] - raw[p])
        done[order] = True
    cuts = int(np.sum(np.abs(S[r_idx] - S[c_idx]) >= np.pi)) if r_idx.size else 0
    return MadelungPair(R, (S * HBAR).reshape(values.shape), mask, cuts)


def _laplacian_4th(f: np.ndarray, dx: float, axis: int) -> np.ndarray:
    """Fourth-order central second difference along one periodic axis."""
    r = lambda s: np.roll(f, s, axis=axis)
    return (-r(2) + 16 * r(1) - 30 * f + 16 * r(-1) - r(-2)) / (12 * dx ** 2)


def _stencil_mask(mask: np.ndarray, reach: int, periodic: bool) -> np.ndarray:
    """Grow a mask by ``reach`` sites along every axis."""
    out = mask.copy()
    for ax in range(mask.ndim):
        for s in range(1, reach + 1):
            for sign in (1, -1):
                out |= np.roll(mask, sign * s, axis=ax)
    if not periodic:
        for ax in range(mask.ndim):
            idx = [slice(None)] * mask.ndim
            idx[ax] = slice(0, reach)
            out[tuple(idx)] = True
            idx[ax] = slice(-reach, None)
            out[tuple(idx)] = True
    return out


def quantum_potential(R: np.ndarray, m, dx: float, mask: np.ndarray | None = None,
                      periodic: bool = True) -> np.ndarray:
    """``-(hbar^2 / 2m) lap R / R`` with a fourth-order central Laplacian.

    ``m`` may be a scalar or one mass per axis. Masked sites, and sites whose
    stencil touches one, are returned as nan.
    """
    R = np.asarray(R, dtype=float)
    masses = np.broadcast_to(np.asarray(m, dtype=float), (R.ndim,))
    bad = (R <= 0) if mask is None else (np.asarray(mask) | (R <= 0))
    bad = _stencil_mask(bad, 2, periodic)
    out = np.zeros_like(R)
    for ax in range(R.ndim):
        out += -(HBAR ** 2 / (2 * masses[ax])) * _laplacian_4th(R, dx, ax)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = out / R
    out[bad] = np.nan
    return out


# -- residuals ---------------------------------------------------------------

@dataclass
class Residual:
    max: float
    l2: float
    points: int

    def as_dict(self) -> dict:
        return {"max": self.max, "l2": self.l2, "points": self.points}


def _summarize(r: np.ndarray, valid: np.ndarray, measure: float) -> Residual:
    vals = r[valid]
    if vals.size == 0:
        return Residual(0.0, 0.0, 0)
    return Residual(float(np.max(np.abs(vals))), float(np.sqrt(np.sum(vals ** 2) * measure)),
                    int(vals.size))


def _terms(traj: Trajectory, floor: float):
    """Finite-difference pieces of both Madelung equations at interior snapshots."""
    if traj.psi.shape[0] < 3:
        raise ValueError("need at least 3 snapshots for centred time differences")
    psi = traj.psi
    dt, dx = traj.dt, traj.dx
    nd = psi.ndim - 1
    rho = np.abs(psi) ** 2
    R = np.sqrt(rho)
    rmax = R.reshape(R.shape[0], -1).max(axis=1).reshape((-1,) + (1,) * nd)
    masked = R < floor * rmax
    cur = slice(1, -1)
    drho_dt = (rho[2:] - rho[:-2]) / (2 * dt)
    dS_dt = np.angle(psi[2:] * np.conj(psi[:-2])) / (2 * dt)
    p = psi[cur]
    div = np.zeros(p.shape)
    grad2 = np.zeros(p.shape)
    for ax, m in enumerate(traj.masses):
        a = ax + 1
        fwd = np.roll(p, -1, axis=a)
        bwd = np.roll(p, 1, axis=a)
        r_here = rho[cur]
        flux_plus = 0.5 * (r_here + np.roll(r_here, -1, axis=a)) * np.angle(fwd * np.conj(p)) / dx / m
        flux_minus = np.roll(flux_plus, 1, axis=a)
        div += (flux_plus - flux_minus) / dx
        gS = np.angle(fwd * np.conj(bwd)) / (2 * dx)
        grad2 += gS ** 2 / (2 * m)
    Vq = np.stack([quantum_potential(R[i], traj.masses, dx, masked[i])
                   for i in range(1, psi.shape[0] - 1)])
    bad = masked[2:] | masked[:-2] | masked[cur]
    valid = ~np.stack([_stencil_mask(b, 2, True) for b in bad]) & np.isfinite(Vq)
    V = np.zeros(p.shape[1:]) if traj.V is None else traj.V
    measure = dx ** nd * dt
    return drho_dt, div, dS_dt, grad2, Vq, V, valid, measure


def continuity_residual(traj: Trajectory, floor: float = 1e-6) -> Residual:
    """``d(R^2)/dt + div(R^2 grad S / m)`` over unmasked space-time points."""
    drho_dt, div, *_, valid, measure = _terms(traj, floor)
    return _summarize(drho_dt + div, valid, measure)


def hj_residual(traj: Trajectory, V=None, sign_convention: str = "standard",
                floor: float = 1e-6) -> Residual:
    """Residual of the phase equation under either sign convention.

    standard: dS/dt + |grad S|^2/2m + V + Vq
    printed:  dS/dt + |grad S|^2/2m - V - Vq
    """
    if sign_convention not in CONVENTIONS:
        raise ValueError(f"sign_convention must be one of {CONVENTIONS}")
    _, _, dS_dt, grad2, Vq, Vtraj, valid, measure = _terms(traj, floor)
    V = Vtraj if V is None else np.broadcast_to(np.asarray(V, dtype=float), Vtraj.shape)
    sign = 1.0 if sign_convention == "standard" else -1.0
    r = dS_dt + grad2 + sign * (V + np.nan_to_num(Vq))
    return _summarize(r, valid, measure)


def residual_report(traj: Trajectory, V=None, floor: float = 1e-6) -> dict:
    return {
        "continuity": continuity_residual(traj, floor).as_dict(),
        "hj_standard": hj_residual(traj, V, "standard", floor).as_dict(),
        "hj_printed": hj_residual(traj, V, "printed", floor).as_dict(),
    }


def two_particle_residuals(traj: Trajectory, V=None, floor: float = 1e-6) -> dict:
    if traj.psi.ndim != 3:
        raise ValueError("expected a two-particle (N x N) trajectory")
    return residual_report(traj, V, floor)


def separability_residual(pair: MadelungPair, weights: np.ndarray | None = None,
                          tol: float = 1e-14, max_iter: int = 10_000) -> float:
    """Relative distance of S(x1, x2) from the nearest S1(x1) + S2(x2).

    Weighted least squares (default weights R^2, zero on masked sites),
    solved by alternating weighted means; normalized by the weighted spread
    of S about its mean.
    """
    S = np.where(pair.node_mask, 0.0, np.nan_to_num(pair.S))
    w = pair.R ** 2 if weights is None else np.asarray(weights, dtype=float)
    w = np.where(pair.node_mask, 0.0, w)
    wsum = w.sum()
    mean = float((w * S).sum() / wsum)
    denom = float(np.sqrt((w * (S - mean) ** 2).sum()))
    if denom == 0:
        return 0.0
    row_w = w.sum(axis=1)
    col_w = w.sum(axis=0)
    s1 = np.zeros(S.shape[0])
    s2 = np.zeros(S.shape[1])
    prev = np.inf
    for _ in range(max_iter):
        with np.errstate(invalid="ignore", divide="ignore"):
            s1 = np.where(row_w > 0, (w * (S - s2[None, :])).sum(axis=1) / row_w, 0.0)
            s2 = np.where(col_w > 0, (w * (S - s1[:, None])).sum(axis=0) / col_w, 0.0)
        resid = float(np.sqrt((w * (S - s1[:, None] - s2[None, :]) ** 2).sum()))
        if prev - resid <= tol * denom:
            break
        prev = resid
    return resid / denom


# -- projections -------------------------------------------------------------

@dataclass(frozen=True)
class Projector:
    """Indicator projector: ``kind`` is ``"position"`` or ``"momentum"``."""

    kind: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.kind not in ("position", "momentum"):
            raise ValueError("kind must be 'position' or 'momentum'")
        if not self.lo < self.hi:
            raise ValueError("window must have lo < hi")


def position_window(a: float, b: float) -> Projector:
    return Projector("position", a, b)


def momentum_window(k1: float, k2: float) -> Projector:
    return Projector("momentum", k1, k2)


def project(psi: WaveFunction, P: Projector) -> WaveFunction:
    if psi.ndim != 1:
        raise ValueError("projections are defined for one-particle states")
    if P.kind == "position":
        x = psi.axis()
        keep = (x >= P.lo) & (x <= P.hi)
        if not keep.any():
            raise ValueError("position window contains no grid points")
        out = psi.values * keep
    else:
        k = _k_axes(psi.values.shape, psi.dx)[0]
        keep = (k >= P.lo) & (k <= P.hi)
        if not keep.any():
            raise ValueError("momentum window contains no resolved wavenumbers")
        out = np.fft.ifft(np.fft.fft(psi.values) * keep)
    return WaveFunction(out, psi.dx, psi.masses, psi.origin)


def commutator_gap(psi: WaveFunction, A: Projector, B: Projector) -> float:
    """``|| P_A P_B psi - P_B P_A psi || / || psi ||``."""
    ab = project(project(psi, B), A).values
    ba = project(project(psi, A), B).values
    return float(np.sqrt(np.sum(np.abs(ab - ba) ** 2)) / np.sqrt(np.sum(np.abs(psi.values) ** 2)))


# -- output ------------------------------------------------------------------

def write_snapshot_csv(path: str | Path, psi: WaveFunction, floor: float = 1e-6) -> None:
    pair = split(psi, floor)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if psi.ndim == 1:
            w.writerow(["x", "re", "im", "R", "S"])
            for x, v, r, s in zip(psi.axis(), psi.values, pair.R, pair.S):
                w.writerow([repr(float(x)), repr(v.real), repr(v.imag), repr(float(r)),
                            repr(float(s))])
        else:
            w.writerow(["x1", "x2", "re", "im", "R", "S"])
            x1, x2 = psi.axis(0), psi.axis(1)
            for i in range(psi.values.shape[0]):
                for j in range(psi.values.shape[1]):
                    v = psi.values[i, j]
                    w.writerow([repr(float(x1[i])), repr(float(x2[j])), repr(v.real),
                                repr(v.imag), repr(float(pair.R[i, j])),
                                repr(float(pair.S[i, j]))])


def write_report_json(path: str | Path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

"""Two field levels linked by nonlocal influence functions.

A micro field v(y) is lifted to a macro field V(x) = sum_y F(x, y) v(y) dx.
A second micro field u is driven so that its lift U = G u dx obeys the local
law dU/dt = lap V, even though v itself may mix values between arbitrarily
distant sites. All kernels are time independent and the ring is periodic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse

from .graph_core import LOCAL, build_lattice_with_shortcuts


@dataclass
class InfluenceKernel:
    matrix: np.ndarray
    dx: float

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("kernel must be a square matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("kernel entries must be finite")
        if self.dx <= 0:
            raise ValueError("dx must be positive")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def to_text(self) -> str:
        rows = [" ".join(repr(float(v)) for v in row) for row in self.matrix]
        return f"dx {self.dx!r}\n" + "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "InfluenceKernel":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        tag, dx = lines[0].split()
        if tag != "dx":
            raise ValueError("kernel file must start with 'dx <spacing>'")
        return cls(np.array([[float(v) for v in ln.split()] for ln in lines[1:]]), float(dx))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "InfluenceKernel":
        return cls.from_text(Path(path).read_text())


def identity_kernel(n: int, dx: float) -> InfluenceKernel:
    """Discrete delta: lifting returns the field unchanged."""
    return InfluenceKernel(np.eye(n) / dx, dx)


def constant_kernel(n: int, dx: float, c: float) -> InfluenceKernel:
    return InfluenceKernel(np.full((n, n), float(c)), dx)


def two_peak_kernel(n: int, dx: float) -> InfluenceKernel:
    """delta(y - x) + delta(y - x - L/2): every site also sees its antipode."""
    if n % 2:
        raise ValueError("two-peak kernel needs an even number of sites")
    idx = np.arange(n)
    m = np.zeros((n, n))
    m[idx, idx] += 1.0 / dx
    m[idx, (idx + n // 2) % n] += 1.0 / dx
    return InfluenceKernel(m, dx)


def smoothing_kernel(n: int, dx: float, width: float) -> InfluenceKernel:
    """Periodic Gaussian of the given width with rows integrating to one."""
    if width <= 0:
        raise ValueError("width must be positive")
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    d = np.minimum(d, n - d) * dx
    m = np.exp(-0.5 * (d / width) ** 2)
    m /= m.sum(axis=1, keepdims=True) * dx
    return InfluenceKernel(m, dx)


def lift(v: np.ndarray, F: InfluenceKernel) -> np.ndarray:
    """``V(x) = sum_y F(x, y) v(y) dx``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (F.size,):
        raise ValueError(f"field of shape {v.shape} does not match kernel size {F.size}")
    return F.matrix @ v * F.dx


def periodic_laplacian(n: int, dx: float) -> np.ndarray:
    lap = -2.0 * np.eye(n) + np.roll(np.eye(n), 1, axis=1) + np.roll(np.eye(n), -1, axis=1)
    return lap / dx ** 2


@dataclass
class MicroRule:
    """Linear micro dynamics dv/dt = A v on a ring of ``A.shape[0]`` sites."""

    A: sparse.csr_matrix
    name: str = "custom"

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.A @ v

    def coupling_range(self) -> int:
        """Largest ring distance between two sites coupled by A."""
        coo = sparse.coo_matrix(self.A)
        n = self.A.shape[0]
        if coo.nnz == 0:
            return 0
        d = np.abs(coo.row - coo.col)
        d = np.minimum(d, n - d)
        return int(d[coo.data != 0].max(initial=0))


def static_rule(n: int) -> MicroRule:
    return MicroRule(sparse.csr_matrix((n, n)), "static")


def diffusive_rule(n: int, dx: float, rate: float = 1.0) -> MicroRule:
    return MicroRule(sparse.csr_matrix(rate * periodic_laplacian(n, dx)), "diffusive")


def translocal_mixing_rule(n: int, shortcut_prob: float = 0.1, rate: float = 1.0,
                           seed: int = 0) -> MicroRule:
    """Graph diffusion -rate * L v on a ring with random translocal shortcuts."""
    g = build_lattice_with_shortcuts(n, 1, shortcut_prob, seed)
    rows, cols = [], []
    for (a, b) in g.edges:
        rows += [a, b]
        cols += [b, a]
    adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = sparse.diags(deg) - adj
    name = "translocal_mixing" if g.edge_count() > g.edge_count(LOCAL) else "ring_diffusion"
    return MicroRule(sparse.csr_matrix(-rate * lap), name)


@dataclass
class TwoLevelReport:
    t: np.ndarray
    V: np.ndarray
    U: np.ndarray
    chain_residual: float
    law_residual: float
    locality_residual: float
    coupling_range: int

    def as_dict(self) -> dict:
        return {
            "chain_residual": self.chain_residual,
            "law_residual": self.law_residual,
            "locality_residual": self.locality_residual,
            "coupling_range": self.coupling_range,
            "steps": int(self.t.size - 1),
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")


def two_level_demo(v0: np.ndarray, F: InfluenceKernel, micro_rule: Callable | None = None,
                   dt: float = 1e-3, steps: int = 100, G: InfluenceKernel | None = None,
                   u0: np.ndarray | None = None) -> TwoLevelReport:
    """Evolve (v, u) with RK4 and check the macro law at every step.

    The default micro rule is ``translocal_mixing_rule(n)``.

    ``u`` is driven by du/dt = D v with D the least-squares solution of
    G D dx = lap_x F dx, so that the chained derivative of U = lift(u, G)
    equals sum_y lap_x F(x, y) v(y) dx. Reported maxima over all steps:

    chain_residual     |G du/dt dx - lap V|, the algebraic identity
    law_residual       |centred time difference of U - lap V|, includes time stepping
    locality_residual  |lift(dv/dt, F) - lap V|, whether V alone obeys the local law
    """
    v0 = np.asarray(v0, dtype=float)
    n = F.size
    if v0.shape != (n,):
        raise ValueError("v0 does not match kernel size")
    G = identity_kernel(n, F.dx) if G is None else G
    if G.size != n or G.dx != F.dx:
        raise ValueError("kernels F and G must share size and spacing")
    rule = translocal_mixing_rule(n) if micro_rule is None else micro_rule
    lap = periodic_laplacian(n, F.dx)
    lapF = lap @ F.matrix
    D = np.linalg.lstsq(G.matrix * G.dx, lapF * F.dx, rcond=None)[0]
    u = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float).copy()

    def rhs(state):
        vv, _ = state
        return np.stack([rule(vv), D @ vv])

    state = np.stack([v0.copy(), u])
    ts, Vs, Us = [0.0], [lift(state[0], F)], [lift(state[1], G)]
    chain = locality = 0.0
    for i in range(steps + 1):
        vv, uu = state
        lapV = lap @ lift(vv, F)
        dU = lift(D @ vv, G)
        chain = max(chain, float(np.max(np.abs(dU - lapV))))
        locality = max(locality, float(np.max(np.abs(lift(rule(vv), F) - lapV))))
        if i == steps:
            break
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ts.append((i + 1) * dt)
        Vs.append(lift(state[0], F))
        Us.append(lift(state[1], G))
    V, U = np.array(Vs), np.array(Us)
    law = 0.0
    if steps >= 2:
        dUdt = (U[2:] - U[:-2]) / (2 * dt)
        lapV = V[1:-1] @ lap.T
        law = float(np.max(np.abs(dUdt - lapV)))
    rng = rule.coupling_range() if isinstance(rule, MicroRule) else -1
    return TwoLevelReport(np.array(ts), V, U, chain, law, locality, rng)

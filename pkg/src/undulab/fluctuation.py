"""Zero-mean lattice fields with power-law spectra, windowed-sum variance
scaling, spectral exponent estimation and block averaging.

A field whose spectrum vanishes like |k|^alpha at k = 0 has windowed-sum
variance growing like R^(n - alpha) in n dimensions; alpha = 0 is the
independent (central-limit) case.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


@dataclass
class LatticeField:
    dims: int
    side: int
    values: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValueError("dims must be 1, 2 or 3")
        self.values = np.asarray(self.values, dtype=float).reshape((self.side,) * self.dims)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def to_text(self) -> str:
        lines = [f"{self.dims} {self.side} {self.spacing!r}"]
        lines += [repr(float(v)) for v in self.values.ravel()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LatticeField":
        lines = text.split("\n")
        dims, side, spacing = lines[0].split()
        vals = np.array([float(v) for v in lines[1:] if v.strip()])
        return cls(int(dims), int(side), vals, float(spacing))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "LatticeField":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class Window:
    """Radial profile equal to 1 on [0, 1] and 0 beyond ``support_radius``."""

    profile: Callable[[np.ndarray], np.ndarray]
    support_radius: float

    def __call__(self, u):
        return self.profile(np.asarray(u, dtype=float))


def raised_cosine_window(support_radius: float = 2.0) -> Window:
    if support_radius <= 1:
        raise ValueError("support_radius must exceed 1")
    width = support_radius - 1.0

    def profile(u):
        x = np.clip((u - 1.0) / width, 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(np.pi * x))

    return Window(profile, support_radius)


def sharp_window() -> Window:
    return Window(lambda u: (u <= 1.0).astype(float), 1.0)


def _wavenumber_modulus(dims: int, side: int, real: bool = False) -> np.ndarray:
    k1 = 2 * np.pi * np.fft.fftfreq(side)
    axes = [k1] * dims
    if real:
        axes[-1] = 2 * np.pi * np.fft.rfftfreq(side)
    grids = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(g ** 2 for g in grids))


def synthesize_field(dims: int, side: int, alpha: float, seed: int,
                     spacing: float = 1.0) -> LatticeField:
    """Gaussian random field with power spectrum proportional to |k|^alpha.

    White noise is filtered by |k|^(alpha/2) in Fourier space (the real
    transform keeps conjugate symmetry), the zero mode is removed so the
    sample mean is exactly zero, and the result is scaled to unit mean square.
    """
    if side < 2 or side & (side - 1):
        raise ValueError("side must be a power of two")
    if not 0 <= alpha <= 4:
        raise ValueError("alpha must lie in [0, 4]")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((side,) * dims)
    spec = np.fft.rfftn(noise)
    k = _wavenumber_modulus(dims, side, real=True)
    filt = np.zeros_like(k)
    nz = k > 0
    filt[nz] = k[nz] ** (alpha / 2)
    values = np.fft.irfftn(spec * filt, s=(side,) * dims, axes=tuple(range(dims)))
    values -= values.mean()
    values /= math.sqrt(np.mean(values ** 2))
    return LatticeField(dims, side, values, spacing)


def power_spectrum(field: LatticeField) -> np.ndarray:
    """|FFT|^2 / N, so that its sum equals the sum of squared values."""
    f = np.fft.fftn(field.values)
    return np.abs(f) ** 2 / field.values.size


def _min_image_distance(dims: int, side: int, center: Sequence[float]) -> np.ndarray:
    idx = np.indices((side,) * dims, dtype=float)
    d2 = np.zeros((side,) * dims)
    for ax in range(dims):
        d = np.abs(idx[ax] - center[ax])
        d = np.minimum(d, side - d)
        d2 += d ** 2
    return np.sqrt(d2)


def windowed_sum(field: LatticeField, w: Window, R: float, center: Sequence[float]) -> float:
    """Sum of ``w(|x - center| / R) q(x)`` with periodic minimum-image distances
    (in lattice units)."""
    if R <= 0:
        raise ValueError("R must be positive")
    if R * w.support_radius > field.side / 2:
        raise ValueError("window exceeds half the box")
    center = np.broadcast_to(np.asarray(center, dtype=float), (field.dims,))
    dist = _min_image_distance(field.dims, field.side, center)
    return float(np.sum(w(dist / R) * field.values))


def _window_kernel(dims: int, side: int, w: Window, R: float) -> np.ndarray:
    return w(_min_image_distance(dims, side, (0.0,) * dims) / R)


def windowed_sums_all(field: LatticeField, w: Window, R: float) -> np.ndarray:
    """Windowed sum centred on every site at once (circular convolution)."""
    if R * w.support_radius > field.side / 2:
        raise ValueError("window exceeds half the box")
    ker = _window_kernel(field.dims, field.side, w, R)
    return np.real(np.fft.ifftn(np.fft.fftn(field.values) * np.fft.fftn(ker)))


def ols_loglog(x, y) -> tuple[float, float, float]:
    """Slope, its standard error and intercept of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    n = lx.size
    resid = ly - A @ coef
    dof = max(n - 2, 1)
    s2 = float(resid @ resid) / dof
    sxx = float(((lx - lx.mean()) ** 2).sum())
    stderr = math.sqrt(s2 / sxx) if sxx > 0 else float("inf")
    return float(coef[0]), stderr, float(coef[1])


@dataclass
class ScalingFit:
    radii: list[float]
    variance: list[float]
    variance_stderr: list[float]
    beta: float
    beta_stderr: float

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["R", "variance", "stderr"])
            for r, v, e in zip(self.radii, self.variance, self.variance_stderr):
                wr.writerow([repr(float(r)), repr(float(v)), repr(float(e))])


def variance_vs_radius(ensemble: Sequence[LatticeField], w: Window, radii: Sequence[float],
                       centers_per_field: int = 64, seed: int = 0) -> ScalingFit:
    """Ensemble variance of the windowed sum against R, with a log-log fit.

    For each field the windowed sums at ``centers_per_field`` seeded random
    sites are pooled.
    """
    if len(ensemble) < 20:
        raise ValueError("need at least 20 ensemble members")
    radii = sorted(float(r) for r in radii)
    if len(radii) < 4 or radii[-1] / radii[0] < 4:
        raise ValueError("need at least 4 radii spanning a factor of 4")
    rng = np.random.default_rng(seed)
    first = ensemble[0]
    picks = [rng.integers(first.side, size=(centers_per_field, first.dims)) for _ in ensemble]
    var, err = [], []
    for R in radii:
        samples = []
        for fld, pick in zip(ensemble, picks):
            allq = windowed_sums_all(fld, w, R)
            samples.append(allq[tuple(pick.T)])
        s = np.concatenate(samples)
        v = float(np.mean(s ** 2))
        # per-field means are independent; their scatter gives the error bar
        per_field = np.array([np.mean(x ** 2) for x in samples])
        var.append(v)
        err.append(float(per_field.std(ddof=1) / math.sqrt(len(per_field))))
    beta, beta_err, _ = ols_loglog(radii, var)
    return ScalingFit(radii, var, err, beta, beta_err)


def radial_power(field: LatticeField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Radially averaged power in integer |k| bins (units of 2*pi/side).

    Returns bin wavenumbers (radians per site), mean power and mode counts;
    the zero mode is excluded.
    """
    p = power_spectrum(field)
    kidx = _wavenumber_modulus(field.dims, field.side) * field.side / (2 * np.pi)
    b = np.rint(kidx).astype(int).ravel()
    counts = np.bincount(b)
    sums = np.bincount(b, weights=p.ravel())
    kbin = np.arange(counts.size)
    keep = (counts > 0) & (kbin > 0)
    return 2 * np.pi * kbin[keep] / field.side, sums[keep] / counts[keep], counts[keep]


def spectral_exponent(field: LatticeField, k_max_fraction: float = 0.25,
                      min_bins: int = 8) -> tuple[float, float]:
    """Low-wavenumber power-law exponent and its standard error.

    Fits log power against log |k| over radial bins with
    ``|k| <= k_max_fraction * pi``.
    """
    if not 0 < k_max_fraction <= 0.25:
        raise ValueError("k_max_fraction must lie in (0, 0.25]")
    if field.side < 256:
        raise ValueError("side must be at least 256")
    k, p, _ = radial_power(field)
    band = k <= k_max_fraction * np.pi
    if band.sum() < min_bins:
        raise ValueError("too few modes in the fit band")
    if np.any(p[band] <= 0):
        raise ValueError("degenerate spectrum: zero power in the fit band")
    slope, err, _ = ols_loglog(k[band], p[band])
    return slope, err


def correlation_volume_integral(ensemble: Sequence[LatticeField], x: Sequence[int],
                                radii: Sequence[float], stationary: bool = True) -> dict:
    """Sum of <q(x) q(y)> over y in balls of growing radius around x.

    With ``stationary`` the covariance is averaged over translations as well
    as over the ensemble (circular autocorrelation), which is valid for
    statistically homogeneous fields; otherwise only the ensemble is used.
    The table is reported raw and relative to the single-site variance.
    """
    if len(ensemble) < 50:
        raise ValueError("need at least 50 ensemble members")
    first = ensemble[0]
    dims, side = first.dims, first.side
    x = tuple(int(c) for c in np.broadcast_to(np.asarray(x), (dims,)))
    if stationary:
        acc = np.zeros((side,) * dims)
        for f in ensemble:
            F = np.fft.fftn(f.values)
            acc += np.real(np.fft.ifftn(np.abs(F) ** 2)) / f.values.size
        cov = acc / len(ensemble)
        dist = _min_image_distance(dims, side, (0.0,) * dims)
    else:
        cov = np.zeros((side,) * dims)
        for f in ensemble:
            cov += f.values[x] * f.values
        cov /= len(ensemble)
        dist = _min_image_distance(dims, side, x)
    var0 = float(cov[(0,) * dims] if stationary else cov[x])
    table = []
    for r in radii:
        total = float(cov[dist <= r].sum())
        table.append({"radius": float(r), "sites": int((dist <= r).sum()), "I": total,
                      "relative": total / var0 if var0 > 0 else 0.0})
    return {"site_variance": var0, "table": table}


def block_average(field: LatticeField, block: int, renorm_exponent: float) -> LatticeField:
    """Coarse field of block sums scaled by ``N**-renorm_exponent``, N = block**dims."""
    if block < 2:
        raise ValueError("block must be >= 2")
    if field.side % block:
        raise ValueError("block must divide side")
    m = field.side // block
    shape = []
    for _ in range(field.dims):
        shape += [m, block]
    sums = field.values.reshape(shape).sum(axis=tuple(range(1, 2 * field.dims, 2)))
    n = block ** field.dims
    return LatticeField(field.dims, m, sums * float(n) ** (-renorm_exponent),
                        field.spacing * block)

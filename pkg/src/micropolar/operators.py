"""Fourier multipliers, cutoffs, mollified advection and pressure recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
import scipy.fft as sfft

from .spectral import (
    Field,
    Grid,
    ScalarField,
    SpectralVectorField,
    _check_same_grid,
    _workers,
    dealias_mask,
    forward,
    from_padded,
    like,
    to_padded,
)

DifferentialKind = Literal["gradient", "divergence", "curl", "laplacian"]


# --------------------------------------------------------------------------
# differentials


def _ixi(grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple(1j * x for x in grid.xi)  # type: ignore[return-value]


def grad_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    d1, d2, d3 = _ixi(grid)
    return np.stack([d1 * c, d2 * c, d3 * c])


def div_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    d1, d2, d3 = _ixi(grid)
    return d1 * c[0] + d2 * c[1] + d3 * c[2]


def curl_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    d1, d2, d3 = _ixi(grid)
    return np.stack([d2 * c[2] - d3 * c[1], d3 * c[0] - d1 * c[2], d1 * c[1] - d2 * c[0]])


def differential(f: Field, kind: DifferentialKind) -> Field:
    """Exact spectral gradient, divergence, curl or Laplacian."""
    grid = f.grid
    vector = isinstance(f, SpectralVectorField)
    if kind == "gradient":
        if vector:
            raise ValueError("gradient takes a scalar field")
        return SpectralVectorField(grid, grad_coeffs(grid, f.coeffs))
    if kind == "divergence":
        if not vector:
            raise ValueError("divergence takes a vector field")
        return ScalarField(grid, div_coeffs(grid, f.coeffs))
    if kind == "curl":
        if not vector:
            raise ValueError("curl takes a vector field")
        return SpectralVectorField(grid, curl_coeffs(grid, f.coeffs))
    if kind == "laplacian":
        return like(f, -grid.xi2 * f.coeffs)
    raise ValueError(f"unknown differential {kind!r}")


def leray_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    xi = grid.xi
    xi2 = grid.xi2
    inv = np.zeros_like(xi2)
    np.divide(1.0, xi2, out=inv, where=xi2 > 0)
    proj = (xi[0] * c[0] + xi[1] * c[1] + xi[2] * c[2]) * inv
    return np.stack([c[0] - xi[0] * proj, c[1] - xi[1] * proj, c[2] - xi[2] * proj])


def leray_project(v: SpectralVectorField) -> SpectralVectorField:
    """Orthogonal projection onto divergence-free fields; the mean passes through."""
    return SpectralVectorField(v.grid, leray_coeffs(v.grid, v.coeffs))


# --------------------------------------------------------------------------
# resolvent and its symbol


@dataclass(frozen=True)
class ResolventSpec:
    epsilon: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and 0 < self.epsilon <= 1):
            raise ValueError(f"epsilon must be in (0,1], got {self.epsilon}")
        if not 1.0 <= self.sigma <= 2.0:
            raise ValueError(f"sigma must be in [1, 2], got {self.sigma}")


@lru_cache(maxsize=32)
def _resolvent_symbol(grid: Grid, epsilon: float) -> np.ndarray:
    xi2 = grid.xi2
    denom = epsilon * xi2 * xi2 + xi2
    out = np.zeros_like(xi2)
    np.divide(1.0, denom, out=out, where=xi2 > 0)
    out.flags.writeable = False
    return out


def resolvent_coeffs(grid: Grid, c: np.ndarray, epsilon: float) -> np.ndarray:
    return c * _resolvent_symbol(grid, float(epsilon))


def resolvent(v: Field, spec: ResolventSpec | float) -> Field:
    """Apply ``1 / (eps Delta^2 - Delta)``; the zero mode is sent to 0."""
    eps = spec.epsilon if isinstance(spec, ResolventSpec) else float(spec)
    if not eps > 0:
        raise ValueError(f"epsilon must be > 0, got {eps}")
    return like(v, resolvent_coeffs(v.grid, v.coeffs, eps))


def multiplier_symbol(xi: np.ndarray, epsilon: float, sigma: float) -> np.ndarray:
    """``|xi|^(2 sigma) / (eps |xi|^4 + |xi|^2)`` written stably for small ``|xi|``."""
    xi = np.asarray(xi, dtype=float)
    return xi ** (2.0 * sigma - 2.0) / (epsilon * xi * xi + 1.0)


def multiplier_sup(spec: ResolventSpec, xi_max: float, samples: int = 200_001) -> float:
    """Supremum of the smoothing symbol over a dense sample of ``(0, xi_max]``."""
    if not xi_max > 0:
        raise ValueError("xi_max must be positive")
    lo = xi_max * 1e-9
    xs = np.concatenate(
        [np.geomspace(lo, xi_max, samples), np.linspace(xi_max / samples, xi_max, samples)]
    )
    return float(np.max(multiplier_symbol(xs, spec.epsilon, spec.sigma)))


# --------------------------------------------------------------------------
# cutoffs


@dataclass(frozen=True)
class CutoffSpec:
    """Radial cutoff: 1 on ``|x| <= R``, 0 beyond ``2R``, quintic smoothstep between.

    ``family`` only records which role the cutoff plays (``theta`` for the
    mollified system, ``phi`` for the local energy ledger); the profile is
    the same.
    """

    radius: float
    family: Literal["theta", "phi"] = "theta"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius >= 1.0):
            raise ValueError(f"cutoff radius must be >= 1, got {self.radius}")
        if self.family not in ("theta", "phi"):
            raise ValueError(f"unknown cutoff family {self.family!r}")

    def check_fits(self, grid: Grid) -> None:
        if 2.0 * self.radius > math.pi * grid.L:
            raise ValueError(
                f"cutoff support 2R = {2 * self.radius} exceeds box half-width {math.pi * grid.L:.6g}"
            )


def _smoothstep(t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = np.clip(t, 0.0, 1.0)
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    ds = 30.0 * t * t * (1.0 - t) ** 2
    d2s = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    return s, ds, d2s


def cutoff_profile(r: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Radial profile value and its first two radial derivatives."""
    t = np.asarray(r, dtype=float) / radius - 1.0
    s, ds, d2s = _smoothstep(t)
    return 1.0 - s, -ds / radius, -d2s / radius**2


def cutoff_field(spec: CutoffSpec, grid: Grid) -> np.ndarray:
    """Physical samples of the cutoff on the grid."""
    spec.check_fits(grid)
    return cutoff_profile(grid.radius(), spec.radius)[0]


def cutoff_derivatives(spec: CutoffSpec, grid: Grid, refine: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form samples of the cutoff, its gradient and its Laplacian."""
    spec.check_fits(grid)
    g = grid.refined(refine) if refine > 1 else grid
    x = g.coords()
    r = g.radius()
    val, d1, d2 = cutoff_profile(r, spec.radius)
    safe = np.where(r > 0, r, 1.0)
    radial = np.where(r > 0, d1 / safe, 0.0)
    gradient = np.stack([np.broadcast_to(radial * xi, g.shape) for xi in x])
    lap = d2 + 2.0 * radial
    return val, gradient, lap


# --------------------------------------------------------------------------
# padded-grid machinery


@lru_cache(maxsize=8)
def _padded_wavenumbers(m: int, L: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = np.fft.fftfreq(m, d=1.0 / m)
    k[m // 2] = 0.0
    kh = np.arange(m // 2 + 1, dtype=float)
    kh[-1] = 0.0
    return (k[:, None, None] / L, k[None, :, None] / L, kh[None, None, :] / L)


def padded_gradient(values: np.ndarray, L: float) -> np.ndarray:
    """Spectral gradient of real samples on an ``m^3`` grid.

    Returns shape ``(3, *values.shape)``; exact when the sampled function has
    degree below ``m/2``.
    """
    m = values.shape[-1]
    x1, x2, x3 = _padded_wavenumbers(m, L)
    h = sfft.rfftn(values, axes=(-3, -2, -1), workers=_workers())
    parts = [1j * x1 * h, 1j * x2 * h, 1j * x3 * h]
    return np.stack(
        [sfft.irfftn(p, s=(m, m, m), axes=(-3, -2, -1), workers=_workers()) for p in parts]
    )


class Mollifier:
    """Cutoff ``theta_R`` as a trigonometric polynomial, sampled on the padded grid.

    The cutoff is represented by its grid interpolant (Nyquist removed), so
    every product formed on the padded grid is the exact product of smooth
    periodic functions. That keeps the integration-by-parts identities used
    by the energy ledger exact up to round-off.
    """

    def __init__(self, grid: Grid, radius: float):
        spec = CutoffSpec(radius, "theta")
        spec.check_fits(grid)
        self.grid = grid
        self.radius = float(radius)
        self.m = 2 * grid.n
        self.coeffs = forward(grid, cutoff_field(spec, grid))
        self.theta = to_padded(grid, self.coeffs, self.m)
        self.theta2 = self.theta * self.theta
        self.mask = dealias_mask(grid)

    def pad(self, c: np.ndarray) -> np.ndarray:
        return to_padded(self.grid, c, self.m)

    def band(self, values: np.ndarray) -> np.ndarray:
        """Padded samples -> dealiased coefficients."""
        return from_padded(self.grid, values) * self.mask

    def advect_padded(self, ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
        """``sum_j ta_j d_j tb_i`` on the padded grid, with ``ta``, ``tb`` already cut off."""
        grad = padded_gradient(tb, self.grid.L)  # grad[j, i] = d_j tb_i
        return np.einsum("j...,ji...->i...", ta, grad)


@lru_cache(maxsize=8)
def mollifier(grid: Grid, radius: float) -> Mollifier:
    return Mollifier(grid, float(radius))


def mollified_advection(
    a: SpectralVectorField, b: SpectralVectorField, spec: CutoffSpec
) -> SpectralVectorField:
    """Dealiased ``((theta a) . grad)(theta b)``."""
    _check_same_grid(a, b)
    grid = a.grid
    mol = mollifier(grid, spec.radius)
    mask = mol.mask
    ta = mol.theta * mol.pad(a.coeffs * mask)
    tb = mol.theta * mol.pad(b.coeffs * mask)
    return SpectralVectorField(grid, mol.band(mol.advect_padded(ta, tb)))


# --------------------------------------------------------------------------
# pressure


def tensor_square_coeffs(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Coefficients of ``u (x) u`` on the full ``n``-lattice, shape ``(3, 3, n, n, n)``."""
    up = to_padded(grid, u * dealias_mask(grid))
    t = up[:, None] * up[None, :]
    return from_padded(grid, t)


def divdiv_coeffs(grid: Grid, t: np.ndarray) -> np.ndarray:
    """``sum_ij d_i d_j T_ij`` in Fourier space."""
    xi = grid.xi
    out = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(3):
        for j in range(3):
            out -= xi[i] * xi[j] * t[i, j]
    return out


def pressure_from_velocity(u: SpectralVectorField) -> ScalarField:
    """Solve ``-Delta p = div div (u (x) u)`` with zero mean."""
    grid = u.grid
    dd = divdiv_coeffs(grid, tensor_square_coeffs(grid, u.coeffs))
    xi2 = grid.xi2
    p = np.zeros_like(dd)
    np.divide(dd, xi2, out=p, where=xi2 > 0)
    return ScalarField(grid, p)


def poisson_residual(u: SpectralVectorField, p: ScalarField) -> float:
    """``||Delta p + div div(u (x) u)|| / ||div div(u (x) u)||`` (0 when both vanish)."""
    grid = u.grid
    dd = divdiv_coeffs(grid, tensor_square_coeffs(grid, u.coeffs))
    res = -grid.xi2 * p.coeffs + dd
    den = float(np.linalg.norm(dd))
    num = float(np.linalg.norm(res))
    if den == 0.0:
        return num
    return num / den

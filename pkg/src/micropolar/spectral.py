"""Periodic grid, Fourier transforms, dealiasing and norms.

The whole space is replaced by the torus ``[-pi L, pi L)^3`` sampled on ``n``
points per axis. A field is stored by its Fourier coefficients ``c_k`` in

    u(x) = sum_k c_k exp(i xi_k . x),    xi_k = k / L,

so the zero mode is the mean of the samples. Integer wavenumbers follow the
standard FFT wrap ``0..n/2, -n/2+1..-1``; the Nyquist plane ``|k_i| = n/2``
is always zeroed. Every norm carries the box measure ``(2 pi L)^3``.

Products of band-limited fields are evaluated on a zero-padded grid of ``M``
points per axis (``M = 2n`` by default); see :func:`to_padded` and
:func:`from_padded`.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Literal

import numpy as np
import scipy.fft as sfft


def _workers() -> int:
    value = int(os.environ.get("MPS_THREADS", "0") or 0)
    return value if value > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class Grid:
    """Cubic periodic box with ``n`` points per axis and half-width ``L``.

    The box is ``[-pi L, pi L)^3``; physical wavenumbers are ``xi = k / L``
    with integer ``k``.
    """

    n: int
    L: float

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValueError(f"n must be an integer, got {self.n!r}")
        if self.n % 2 != 0:
            raise ValueError(f"n must be even, got {self.n}")
        if self.n < 8:
            raise ValueError(f"n must be >= 8, got {self.n}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be a positive finite number, got {self.L}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def volume(self) -> float:
        return (2.0 * math.pi * self.L) ** 3

    @property
    def spacing(self) -> float:
        return 2.0 * math.pi * self.L / self.n

    @cached_property
    def k1d(self) -> np.ndarray:
        """Integer wavenumbers along one axis in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable integer wavenumber arrays ``(k1, k2, k3)``."""
        k = self.k1d
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical wavenumbers ``k / L``."""
        return tuple(ki / self.L for ki in self.k)  # type: ignore[return-value]

    @cached_property
    def xi2(self) -> np.ndarray:
        """``|xi|^2`` on the full lattice."""
        x1, x2, x3 = self.xi
        return x1 * x1 + x2 * x2 + x3 * x3

    @cached_property
    def nyquist(self) -> np.ndarray:
        """True on the Nyquist planes."""
        h = self.n // 2
        k1, k2, k3 = self.k
        return (np.abs(k1) == h) | (np.abs(k2) == h) | (np.abs(k3) == h)

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(i k pi) for the shift from the first sample at -pi L to the origin
        k1, k2, k3 = self.k
        return np.where((k1 + k2 + k3) % 2 == 0, 1.0, -1.0)

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable sample coordinates ``x_j = -pi L + j h``."""
        x = -math.pi * self.L + self.spacing * np.arange(self.n)
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    def radius(self) -> np.ndarray:
        x1, x2, x3 = self.coords()
        return np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)

    def refined(self, factor: int = 2) -> Grid:
        return Grid(self.n * factor, self.L)


def make_grid(n: int, L: float) -> Grid:
    return Grid(n, L)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar field given by its ``n^3`` Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        c[self.grid.nyquist] = 0.0
        object.__setattr__(self, "coeffs", _freeze(c))

    @classmethod
    def zeros(cls, grid: Grid) -> ScalarField:
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> ScalarField:
        return cls(grid, forward(grid, values))

    def values(self) -> np.ndarray:
        return inverse(self.grid, self.coeffs)

    def __add__(self, other: ScalarField) -> ScalarField:
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: ScalarField) -> ScalarField:
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> ScalarField:
        return ScalarField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    """Three-component field given by Fourier coefficients of shape ``(3, n, n, n)``."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != (3, *self.grid.shape):
            raise ValueError(
                f"coefficient shape {c.shape} does not match (3, {self.grid.n}, {self.grid.n}, {self.grid.n})"
            )
        c[:, self.grid.nyquist] = 0.0
        object.__setattr__(self, "coeffs", _freeze(c))

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralVectorField:
        return cls(grid, np.zeros((3, *grid.shape), dtype=np.complex128))

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> SpectralVectorField:
        return cls(grid, forward(grid, values))

    def values(self) -> np.ndarray:
        return inverse(self.grid, self.coeffs)

    def __add__(self, other: SpectralVectorField) -> SpectralVectorField:
        _check_same_grid(self, other)
        return SpectralVectorField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralVectorField) -> SpectralVectorField:
        _check_same_grid(self, other)
        return SpectralVectorField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> SpectralVectorField:
        return SpectralVectorField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralVectorField:
        return SpectralVectorField(self.grid, -self.coeffs)


Field = ScalarField | SpectralVectorField


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def like(template: Field, coeffs: np.ndarray) -> Field:
    """Wrap ``coeffs`` in the same field type as ``template``."""
    if coeffs.ndim == 4:
        return SpectralVectorField(template.grid, coeffs)
    return ScalarField(template.grid, coeffs)


# --------------------------------------------------------------------------
# transforms


def forward(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Samples -> coefficients, normalized so the zero mode is the mean.

    Leading axes (e.g. vector components) are transformed independently.
    """
    values = np.asarray(values)
    if values.shape[-3:] != grid.shape:
        raise ValueError(f"array shape {values.shape} does not match grid {grid.shape}")
    c = sfft.fftn(values, axes=(-3, -2, -1), workers=_workers()) / grid.n**3
    c *= grid._phase
    c[..., grid.nyquist] = 0.0
    return c


def inverse(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Coefficients -> real samples (imaginary round-off discarded)."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-3:] != grid.shape:
        raise ValueError(f"array shape {coeffs.shape} does not match grid {grid.shape}")
    v = sfft.ifftn(coeffs * grid._phase, axes=(-3, -2, -1), workers=_workers())
    return np.ascontiguousarray(v.real) * grid.n**3


def transform(grid: Grid, data: np.ndarray, direction: Literal["forward", "inverse"]) -> np.ndarray:
    if direction == "forward":
        return forward(grid, data)
    if direction == "inverse":
        return inverse(grid, data)
    raise ValueError(f"unknown direction {direction!r}")


@lru_cache(maxsize=16)
def _pad_maps(n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Index maps between the n-lattice (non-Nyquist) and the m-lattice."""
    if m < n:
        raise ValueError("padded size must be at least n")
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    keep = np.abs(k) < n // 2
    src = np.nonzero(keep)[0]
    dst = np.mod(k[keep], m)
    # last (rfft) axis: nonnegative k only
    src_h = np.nonzero((k >= 0) & keep)[0]
    dst_h = k[src_h]
    return src, dst, src_h, dst_h


@lru_cache(maxsize=16)
def _padded_phase(m: int) -> np.ndarray:
    k = np.fft.fftfreq(m, d=1.0 / m).astype(np.int64)
    kh = np.arange(m // 2 + 1)
    s = k[:, None, None] + k[None, :, None] + kh[None, None, :]
    return np.where(s % 2 == 0, 1.0, -1.0)


def to_padded(grid: Grid, coeffs: np.ndarray, m: int | None = None) -> np.ndarray:
    """Evaluate the trigonometric polynomial ``coeffs`` on an ``m^3`` grid.

    The samples are exact values of the same real function, so products of
    the returned arrays are exact as long as their total degree stays below
    ``m``.
    """
    n = grid.n
    m = 2 * n if m is None else m
    src, dst, src_h, dst_h = _pad_maps(n, m)
    lead = coeffs.shape[:-3]
    half = np.zeros((*lead, m, m, m // 2 + 1), dtype=np.complex128)
    block = coeffs[..., src[:, None, None], src[None, :, None], src_h[None, None, :]]
    half[..., dst[:, None, None], dst[None, :, None], dst_h[None, None, :]] = block
    half *= _padded_phase(m)
    v = sfft.irfftn(half, s=(m, m, m), axes=(-3, -2, -1), workers=_workers())
    return v * m**3


def from_padded(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Project samples on an ``m^3`` grid back to the ``n^3`` coefficient lattice.

    Returns the exact Fourier coefficients of the sampled function for every
    non-Nyquist ``n``-lattice mode, provided no aliasing from modes beyond
    ``m/2`` lands there.
    """
    n = grid.n
    m = values.shape[-1]
    src, dst, src_h, dst_h = _pad_maps(n, m)
    half = sfft.rfftn(values, axes=(-3, -2, -1), workers=_workers()) / m**3
    half *= _padded_phase(m)
    lead = values.shape[:-3]
    out = np.zeros((*lead, n, n, n), dtype=np.complex128)
    out[..., src[:, None, None], src[None, :, None], src_h[None, None, :]] = half[
        ..., dst[:, None, None], dst[None, :, None], dst_h[None, None, :]
    ]
    # negative k3 from Hermitian symmetry: c(k) = conj(c(-k))
    neg3 = np.nonzero((grid.k1d < 0) & (np.abs(grid.k1d) < n // 2))[0]
    pos3 = np.mod(-grid.k1d[neg3], n)
    neg_i = np.mod(-grid.k1d, n)
    mirror = out[..., neg_i[:, None, None], neg_i[None, :, None], pos3[None, None, :]]
    out[..., :, :, neg3] = np.conj(mirror)
    return out


# --------------------------------------------------------------------------
# dealiasing


def dealias_mask(grid: Grid) -> np.ndarray:
    """2/3 rule: keep ``|k_i| <= floor(n/3)`` on every axis."""
    return _dealias_mask(grid.n)


@lru_cache(maxsize=16)
def _dealias_mask(n: int) -> np.ndarray:
    k = np.abs(np.fft.fftfreq(n, d=1.0 / n).astype(np.int64))
    cut = n // 3
    keep = k <= cut
    return _freeze(keep[:, None, None] & keep[None, :, None] & keep[None, None, :])


def dealias(f: Field) -> Field:
    return like(f, f.coeffs * dealias_mask(f.grid))


def hermitian_defect(grid: Grid, coeffs: np.ndarray) -> float:
    """Relative violation of ``c(-k) = conj(c(k))``."""
    idx = np.mod(-grid.k1d, grid.n)
    mirrored = coeffs[..., idx[:, None, None], idx[None, :, None], idx[None, None, :]]
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(mirrored - np.conj(coeffs)))) / scale


# --------------------------------------------------------------------------
# norms


def sobolev_norm(f: Field, s: float) -> float:
    """Homogeneous ``H^s`` norm on the box.

    The zero mode counts only for ``s == 0``; negative orders exclude it by
    definition.
    """
    if not math.isfinite(s):
        raise ValueError(f"Sobolev order must be finite, got {s}")
    if s < -2:
        raise ValueError(f"Sobolev orders below -2 are not supported, got {s}")
    grid = f.grid
    power = np.abs(f.coeffs) ** 2
    if power.ndim == 4:
        power = power.sum(axis=0)
    xi2 = grid.xi2
    if s == 0:
        total = power.sum()
    else:
        weight = np.zeros_like(xi2)
        nz = xi2 > 0
        weight[nz] = xi2[nz] ** s
        total = (weight * power).sum()
    return math.sqrt(grid.volume * float(total))


def inner_product(a: Field, b: Field) -> float:
    """``int a . b dx`` over the box, via Parseval."""
    _check_same_grid(a, b)
    if a.coeffs.shape != b.coeffs.shape:
        raise ValueError("inner product needs fields of the same rank")
    return a.grid.volume * float(np.real(np.vdot(b.coeffs, a.coeffs)))


Region = Literal["all", "ball", "annulus"]


def region_mask(grid: Grid, region: Region, R: float | None = None, refine: int = 1) -> np.ndarray:
    g = grid.refined(refine) if refine > 1 else grid
    if region == "all":
        return np.ones(g.shape, dtype=bool)
    if R is None or not R > 0:
        raise ValueError(f"region {region!r} needs a positive radius")
    outer = R if region == "ball" else 2.0 * R
    if outer > math.pi * grid.L:
        raise ValueError(f"region radius {outer} exceeds the box half-width {math.pi * grid.L}")
    r = g.radius()
    if region == "ball":
        return r <= R
    if region == "annulus":
        return (r >= R) & (r <= 2.0 * R)
    raise ValueError(f"unknown region {region!r}")


def lebesgue_norm(
    f: Field | np.ndarray,
    p: float,
    region: Region = "all",
    R: float | None = None,
    grid: Grid | None = None,
    refine: int = 1,
) -> float:
    """Trapezoid ``L^p`` norm of a field (or of raw samples) over a region.

    Vector fields use the pointwise Euclidean magnitude. ``refine > 1``
    evaluates the band-limited field on a finer grid first.
    """
    if not (p >= 1):
        raise ValueError(f"p must be in [1, inf], got {p}")
    if isinstance(f, np.ndarray):
        if grid is None:
            raise ValueError("raw samples need an explicit grid")
        values = f
        refine = 1
    else:
        grid = f.grid
        values = to_padded(grid, f.coeffs, grid.n * refine) if refine > 1 else f.values()
    mag = np.sqrt((values**2).sum(axis=0)) if values.ndim == 4 else np.abs(values)
    mask = region_mask(grid, region, R, refine)
    if not mask.any():
        warnings.warn(f"region {region}(R={R}) contains no grid points; norm set to 0", stacklevel=2)
        return 0.0
    h3 = (2.0 * math.pi * grid.L / (grid.n * refine)) ** 3
    sel = mag[mask]
    if math.isinf(p):
        return float(sel.max())
    top = float(sel.max())
    if top == 0.0:
        return 0.0
    # scale out the max to keep high powers finite
    return top * float(h3 * np.sum((sel / top) ** p)) ** (1.0 / p)

"""Numerical audits: strong residuals, energy ledgers, nullities, the local
(Liouville) ledger, the regularity ladder and the polynomial counterexample.

Ledgers report exact integrals and Hoelder majorants side by side. Nothing
here asserts a value for the abstract constants of the estimates; callers
compare ratios, gaps and monotone trends.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .operators import (
    CutoffSpec,
    curl_coeffs,
    cutoff_derivatives,
    cutoff_profile,
    div_coeffs,
    grad_coeffs,
    leray_coeffs,
    mollifier,
    padded_gradient,
    pressure_from_velocity,
    tensor_square_coeffs,
)
from .solver import SolverParams, State, rhs_terms
from .spectral import (
    Grid,
    ScalarField,
    SpectralVectorField,
    dealias_mask,
    forward,
    from_padded,
    lebesgue_norm,
    region_mask,
    sobolev_norm,
    to_padded,
)

LIOUVILLE_TERMS = (
    "left",
    "T1_laplacian_cutoff",
    "T2_div_omega",
    "T3_advection_u",
    "T4_advection_omega",
    "T5_pressure",
    "T6_curl_coupling",
)


@dataclass
class LedgerReport:
    """Named terms of an integral identity, with optional Hoelder majorants."""

    left: float
    right: float
    terms: dict[str, float]
    majorants: dict[str, float] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)
    R: float | None = None

    @property
    def gap(self) -> float:
        return abs(self.left - self.right) / max(abs(self.left), abs(self.right), 1e-300)

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "left": self.left,
            "right": self.right,
            "gap": self.gap,
            "terms": dict(self.terms),
            "majorants": dict(self.majorants),
            "extras": dict(self.extras),
        }


@dataclass
class ResidualReport:
    r_mom: float
    r_mic: float
    mode: str = "mollified"


def _l2(grid: Grid, c: np.ndarray) -> float:
    return math.sqrt(grid.volume * float(np.sum(np.abs(c) ** 2)))


def _relative(grid: Grid, total: np.ndarray, parts: Iterable[np.ndarray]) -> float:
    scale = max((_l2(grid, p) for p in parts), default=0.0)
    r = _l2(grid, total)
    return r / scale if scale > 0 else r


# --------------------------------------------------------------------------
# strong residuals


def residuals(
    state: State,
    p: ScalarField | None,
    params: SolverParams,
    mode: Literal["mollified", "original"] = "mollified",
) -> ResidualReport:
    """Relative L^2 residuals of both equations.

    ``mollified`` checks the projected, regularized system that fixed points
    of ``lam T`` satisfy (every right-side term scaled by ``params.lam``); ``original`` checks the unregularized system with
    the pressure (recomputed from ``u`` when ``p`` is None).

    In mollified mode the zero mode is left out: the resolvent annihilates
    constants, so fixed points satisfy the system modulo its mean, as in the
    homogeneous setting.
    """
    grid = state.grid
    mask = dealias_mask(grid)
    u = state.u.coeffs * mask
    w = state.omega.coeffs * mask
    xi2 = grid.xi2
    lap_u, lap_w = -xi2 * u, -xi2 * w
    f, g = params.f.coeffs, params.g.coeffs
    if mode == "mollified":
        t = {k: params.lam * v for k, v in rhs_terms(state, params).items()}
        f, g = params.lam * f, params.lam * g
        eps = params.epsilon
        bi_u, bi_w = -eps * xi2 * xi2 * u, -eps * xi2 * xi2 * w
        nz = grid.xi2 > 0
        rhs_u = leray_coeffs(grid, -t["adv_u"] + 0.5 * t["curl_w"] + f)
        mom = [bi_u, lap_u, rhs_u]
        mom_parts = [bi_u, lap_u, leray_coeffs(grid, t["adv_u"]), 0.5 * t["curl_w"], f]
        mic = [bi_w, lap_w, t["grad_tdiv"], -t["adv_w"], -params.kappa * t["t2w"], 0.5 * t["curl_u"], g]
        mom, mom_parts, mic = ([a * nz for a in group] for group in (mom, mom_parts, mic))
        return ResidualReport(
            _relative(grid, sum(mom), mom_parts),
            _relative(grid, sum(mic), mic),
            mode,
        )
    if mode != "original":
        raise ValueError(f"unknown residual mode {mode!r}")
    if p is None:
        p = pressure_from_velocity(SpectralVectorField(grid, u))
    adv_u = _plain_advection(grid, u, u)
    adv_w = _plain_advection(grid, u, w)
    grad_p = grad_coeffs(grid, p.coeffs)
    mom = [lap_u, -adv_u, -grad_p, 0.5 * curl_coeffs(grid, w), f]
    mic = [lap_w, grad_coeffs(grid, div_coeffs(grid, w)), -params.kappa * w, -adv_w, 0.5 * curl_coeffs(grid, u), g]
    return ResidualReport(_relative(grid, sum(mom), mom), _relative(grid, sum(mic), mic), mode)


def _plain_advection(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``(a . grad) b`` without cutoff, alias-free on the n-lattice."""
    ap = to_padded(grid, a)
    gb = to_padded(grid, np.stack([grad_coeffs(grid, b[i]) for i in range(3)]))  # [i, j] = d_j b_i
    out = np.einsum("j...,ij...->i...", ap, gb)
    return from_padded(grid, out)


# --------------------------------------------------------------------------
# energy identity of the a-priori estimate


def _padded_integral(grid: Grid, values: np.ndarray) -> float:
    m = values.shape[-1]
    return float(np.sum(values)) * (2.0 * math.pi * grid.L / m) ** 3


def energy_ledger(state: State, params: SolverParams, lam: float | None = None) -> LedgerReport:
    """Term-by-term energy identity for a fixed point of ``lam T``.

    Testing the u-equation with u and the w-equation with w gives

        eps(|u|_{H2}^2 + |w|_{H2}^2) + |u|_{H1}^2 + |w|_{H1}^2
            + lam int theta |div w|^2 + lam kappa int theta^2 |w|^2
        = lam [ int theta^2 curl(u).w - 1/2 int grad(theta^2).(w x u)
                - int ((theta u).grad)(theta u).u - int ((theta u).grad)(theta w).w
                + int f.u + int g.w ]

    The two advection integrals vanish for divergence-free u; they are kept
    as terms so the balance does not rely on that. The curl coupling keeps
    its bulk part ``int theta^2 curl(u).w``, which does not cancel.
    All integrals are exact quadratures on the padded grid.
    """
    lam = params.lam if lam is None else lam
    grid = state.grid
    mask = dealias_mask(grid)
    u = state.u.coeffs * mask
    w = state.omega.coeffs * mask
    eps, kappa = params.epsilon, params.kappa
    mol = mollifier(grid, params.R_cut)
    up, wp = mol.pad(u), mol.pad(w)
    th, th2 = mol.theta, mol.theta2
    Lx = grid.L

    def integral(v: np.ndarray) -> float:
        return _padded_integral(grid, v)

    divw = mol.pad(div_coeffs(grid, w))
    curl_u = mol.pad(curl_coeffs(grid, u))
    grad_th2 = padded_gradient(th2, Lx)
    tu, tw = th * up, th * wp
    adv_u = integral(np.einsum("i...,i...->...", mol.advect_padded(tu, tu), up))
    adv_w = integral(np.einsum("i...,i...->...", mol.advect_padded(tu, tw), wp))
    w_cross_u = np.cross(wp, up, axis=0)

    left_terms = {
        "eps_H2": eps * (_h(grid, u, 2) + _h(grid, w, 2)),
        "H1": _h(grid, u, 1) + _h(grid, w, 1),
        "div_omega": lam * integral(th * divw * divw),
        "kappa_omega": lam * kappa * integral(th2 * np.sum(wp * wp, axis=0)),
    }
    right_terms = {
        "coupling_bulk": lam * integral(th2 * np.sum(curl_u * wp, axis=0)),
        "coupling_boundary": -0.5 * lam * integral(np.sum(grad_th2 * w_cross_u, axis=0)),
        "advection_u": -lam * adv_u,
        "advection_omega": -lam * adv_w,
        "forcing_f": lam * grid.volume * float(np.real(np.vdot(params.f.coeffs, u))),
        "forcing_g": lam * grid.volume * float(np.real(np.vdot(params.g.coeffs, w))),
    }
    terms = {**left_terms, **right_terms}
    return LedgerReport(
        left=sum(left_terms.values()),
        right=sum(right_terms.values()),
        terms=terms,
        extras={"theta_omega_L2_sq": integral(th2 * np.sum(wp * wp, axis=0))},
        R=params.R_cut,
    )


def _h(grid: Grid, c: np.ndarray, s: int) -> float:
    """Squared homogeneous norm of raw coefficients."""
    xi2 = grid.xi2
    w = xi2**s
    power = np.abs(c) ** 2
    if power.ndim == 4:
        power = power.sum(axis=0)
    return grid.volume * float(np.sum(w * power))


def corollary_bound(report: LedgerReport, params: SolverParams, lam: float | None = None) -> tuple[float, float]:
    """``(||theta w||^2, bound)`` where the bound is what the identity leaves for the kappa term.

    ``lam kappa ||theta w||^2 = right - (eps H2 + H1 + lam int theta |div w|^2)``,
    and the subtracted terms are nonnegative up to the sign of the cutoff
    interpolant, so ``||theta w||^2 <= right / (lam kappa)``.
    """
    lam = params.lam if lam is None else lam
    value = report.extras["theta_omega_L2_sq"]
    if lam == 0:
        return value, math.inf
    return value, report.right / (lam * params.kappa)


# --------------------------------------------------------------------------
# trilinear nullities


def trilinear_nullity(
    u: SpectralVectorField, omega: SpectralVectorField, spec: CutoffSpec, div_tol: float = 1e-10
) -> tuple[float, float]:
    """Normalized ``int ((theta u).grad)(theta u).u`` and ``int ((theta u).grad)(theta w).w``.

    Both vanish for divergence-free ``u``. Each integral is divided by its
    Hoelder bound ``||theta u||_inf ||grad(theta b)||_2 ||b||_2``.
    """
    grid = u.grid
    if omega.grid != grid:
        raise ValueError("grid mismatch")
    mask = dealias_mask(grid)
    uc = u.coeffs * mask
    wc = omega.coeffs * mask
    un = sobolev_norm(SpectralVectorField(grid, uc), 0)
    dn = _l2(grid, div_coeffs(grid, uc)) / max(sobolev_norm(SpectralVectorField(grid, uc), 1), 1e-300)
    if un > 0 and dn > div_tol:
        raise ValueError(f"u is not divergence-free (relative ||div u|| = {dn:.3e})")
    mol = mollifier(grid, spec.radius)
    up, wp = mol.pad(uc), mol.pad(wc)
    tu, tw = mol.theta * up, mol.theta * wp
    out = []
    for tb, b in ((tu, up), (tw, wp)):
        adv = mol.advect_padded(tu, tb)
        val = _padded_integral(grid, np.einsum("i...,i...->...", adv, b))
        g = padded_gradient(tb, grid.L)
        bound = (
            float(np.sqrt(np.max(np.sum(tu * tu, axis=0))))
            * math.sqrt(_padded_integral(grid, np.sum(g * g, axis=(0, 1))))
            * math.sqrt(_padded_integral(grid, np.sum(b * b, axis=0)))
        )
        out.append(abs(val) / bound if bound > 0 else 0.0)
    return out[0], out[1]


# --------------------------------------------------------------------------
# local energy ledger for the uniqueness argument


def holder_exponent(q: float) -> float:
    """``ell`` with ``1/ell + 3/q = 1`` (``inf`` at ``q = 3``)."""
    if not 3.0 <= q <= 4.5:
        raise ValueError(f"q must lie in [3, 9/2], got {q}")
    rest = 1.0 - 3.0 / q
    return math.inf if rest == 0 else 1.0 / rest


def radial_cutoff_gradient_norm(radius: float, ell: float, nodes: int = 400) -> float:
    """``||grad phi_R||_{L^ell}`` by 1D radial quadrature (Gauss-Legendre on ``[R, 2R]``)."""
    if math.isinf(ell):
        t = np.linspace(0.0, 1.0, 200_001)
        return float(np.max(np.abs(cutoff_profile(radius * (1 + t), radius)[1])))
    x, wts = np.polynomial.legendre.leggauss(nodes)
    r = radius * (1.5 + 0.5 * x)
    d1 = cutoff_profile(r, radius)[1]
    integrand = np.abs(d1) ** ell * 4.0 * math.pi * r * r
    return float(0.5 * radius * np.sum(wts * integrand)) ** (1.0 / ell)


def _norm_on(values: np.ndarray, mask: np.ndarray, p: float, h3: float) -> float:
    mag = np.sqrt(np.sum(values * values, axis=0)) if values.ndim == 4 else np.abs(values)
    sel = mag[mask]
    if sel.size == 0:
        return 0.0
    if math.isinf(p):
        return float(sel.max())
    top = float(sel.max())
    if top == 0.0:
        return 0.0
    return top * float(h3 * np.sum((sel / top) ** p)) ** (1.0 / p)


def liouville_ledger(
    u: SpectralVectorField,
    omega: SpectralVectorField,
    p: ScalarField,
    R_list: Sequence[float],
    q: float,
    kappa: float = 100.0,
    refine: int = 2,
) -> list[LedgerReport]:
    """Local energy balance against ``phi_R^2 (u, w)`` for each radius.

    Terms (signs as they enter the right side):

    * ``T1 = int Delta(phi^2)(|u|^2 + |w|^2)`` enters as ``+T1/2``
    * ``T2 = int grad(phi^2).w div w`` enters as ``-T2``
    * ``T3 = int ((u.grad)u).phi^2 u = -1/2 int (u.grad phi^2)|u|^2`` enters as ``-T3``
    * ``T4 = int ((u.grad)w).phi^2 w = -1/2 int (u.grad phi^2)|w|^2`` enters as ``-T4``
    * ``T5 = int grad p.phi^2 u = -int (u.grad phi^2) p`` enters as ``-T5``
    * ``T6 = -1/2 int w.(grad phi^2 x u)`` enters as ``+T6``

    T3 to T6 are evaluated in their annulus-supported forms. The curl
    coupling also has a bulk part ``int phi^2 curl(u).w`` that does not
    cancel; it is reported in ``extras['T6_bulk']`` and included in the
    right-side total, so ``gap`` measures the true identity.
    Majorants are the Hoelder bounds evaluated with the same quadrature.
    """
    ell = holder_exponent(q)
    grid = u.grid
    mask = dealias_mask(grid)
    uc, wc = u.coeffs * mask, omega.coeffs * mask
    m = grid.n * refine
    up, wp = to_padded(grid, uc, m), to_padded(grid, wc, m)
    pp = to_padded(grid, p.coeffs, m)
    gu = to_padded(grid, np.stack([grad_coeffs(grid, uc[i]) for i in range(3)], axis=1), m)
    gw = to_padded(grid, np.stack([grad_coeffs(grid, wc[i]) for i in range(3)], axis=1), m)
    divw = to_padded(grid, div_coeffs(grid, wc), m)
    curl_u = to_padded(grid, curl_coeffs(grid, uc), m)
    h3 = (2.0 * math.pi * grid.L / m) ** 3
    u2 = np.sum(up * up, axis=0)
    w2 = np.sum(wp * wp, axis=0)
    gu2 = np.sum(gu * gu, axis=(0, 1))
    gw2 = np.sum(gw * gw, axis=(0, 1))
    div_l2 = math.sqrt(h3 * float(np.sum(divw * divw)))

    reports = []
    for R in R_list:
        spec = CutoffSpec(R, "phi")
        phi, gphi, lphi = cutoff_derivatives(spec, grid, refine)
        ann = region_mask(grid, "annulus", R, refine)
        if not ann.any():
            raise ValueError(f"annulus for R={R} contains no grid points")
        phi2 = phi * phi
        gphi2 = 2.0 * phi * gphi
        lap_phi2 = 2.0 * np.sum(gphi * gphi, axis=0) + 2.0 * phi * lphi
        u_dot_g = np.sum(up * gphi2, axis=0)

        left = h3 * float(np.sum(phi2 * (gu2 + gw2 + divw * divw))) + kappa * h3 * float(np.sum(phi2 * w2))
        t = {
            "T1_laplacian_cutoff": h3 * float(np.sum(lap_phi2 * (u2 + w2))),
            "T2_div_omega": h3 * float(np.sum(np.sum(gphi2 * wp, axis=0) * divw)),
            "T3_advection_u": -0.5 * h3 * float(np.sum(u_dot_g * u2)),
            "T4_advection_omega": -0.5 * h3 * float(np.sum(u_dot_g * w2)),
            "T5_pressure": -h3 * float(np.sum(u_dot_g * pp)),
            "T6_curl_coupling": -0.5 * h3 * float(np.sum(wp * np.cross(gphi2, up, axis=0))),
        }
        bulk = h3 * float(np.sum(phi2 * np.sum(curl_u * wp, axis=0)))
        right = 0.5 * t["T1_laplacian_cutoff"] - t["T2_div_omega"] - t["T3_advection_u"]
        right += -t["T4_advection_omega"] - t["T5_pressure"] + t["T6_curl_coupling"] + bulk

        # Hoelder majorants, same quadrature
        gmag = np.sqrt(np.sum(gphi * gphi, axis=0))
        full = np.ones(phi.shape, dtype=bool)
        g3 = _norm_on(gmag, full, 3, h3)
        g6 = _norm_on(gmag, full, 6, h3)
        gl = _norm_on(gmag, full, ell, h3)
        lap15 = _norm_on(lphi, full, 1.5, h3)
        phi_inf = float(np.max(np.abs(phi)))
        u6, w6 = _norm_on(up, ann, 6, h3), _norm_on(wp, ann, 6, h3)
        uq = _norm_on(up, ann, q, h3)
        pq = _norm_on(pp, ann, q / 2.0, h3)
        phi_w = math.sqrt(h3 * float(np.sum(phi2 * w2)))
        maj = {
            "T1_laplacian_cutoff": 2.0 * (g3**2 + phi_inf * lap15) * (u6**2 + w6**2),
            "T2_div_omega": 2.0 * phi_inf * div_l2 * w6 * g3,
            "T3_advection_u": phi_inf * gl * uq**3,
            "T4_advection_omega": 4.0 * u6**2 * g6**2 * w6**2 + phi_w**2 / 16.0,
            "T5_pressure": 2.0 * phi_inf * gl * pq * uq,
            "T6_curl_coupling": phi_w * g3 * u6,
        }
        maj_left = 0.5 * maj["T1_laplacian_cutoff"] + sum(v for k, v in maj.items() if k != "T1_laplacian_cutoff")
        reports.append(
            LedgerReport(
                left=left,
                right=right,
                terms={"left": left, **t},
                majorants={"left": maj_left, **maj},
                extras={
                    "T6_bulk": bulk,
                    "ell": ell,
                    "grad_phi_R_L_ell": gl,
                    "grad_phi_L_ell_radial": radial_cutoff_gradient_norm(1.0, ell),
                    "u_Lq_annulus": uq,
                    "p_Lq2_annulus": pq,
                    "u_L6_annulus": u6,
                    "omega_L6_annulus": w6,
                },
                R=float(R),
            )
        )
    return reports


def gaussian_fields(grid: Grid, width: float) -> tuple[SpectralVectorField, SpectralVectorField, ScalarField]:
    """Decaying synthetic triple: ``u = curl A`` for an off-centre Gaussian potential,
    ``w`` a Gaussian with a swirl, ``p`` from ``u``."""
    x = grid.coords()
    s2 = 2.0 * width**2
    shift = (0.3 * width, -0.2 * width, 0.1 * width)
    g1 = np.exp(-sum((x[i] - shift[i]) ** 2 for i in range(3)) / s2)
    pot = np.stack([g1 * (1.0 + 0.5 * x[1] / width), g1 * 0.5, g1 * (0.3 - 0.4 * x[0] / width)])
    mask = dealias_mask(grid)
    u = curl_coeffs(grid, forward(grid, pot) * mask)
    u = leray_coeffs(grid, u)
    g2 = np.exp(-sum(x[i] ** 2 for i in range(3)) / s2)
    w_vals = np.stack([g2 * (1.0 + x[2] / width), g2 * x[0] / width, g2 * 0.5])
    w = forward(grid, w_vals) * mask
    U = SpectralVectorField(grid, u)
    return U, SpectralVectorField(grid, w), pressure_from_velocity(U)


# --------------------------------------------------------------------------
# annulus decay


@dataclass
class DecayRow:
    R: float
    p: float
    region: str
    value: float


def decay_scan(
    f: SpectralVectorField | ScalarField,
    R_list: Sequence[float],
    norms: Sequence[tuple[float, str]],
    refine: int = 1,
) -> list[DecayRow]:
    """Tabulate ``||f||_{L^p(region(R))}`` for every radius and requested norm."""
    rows = []
    for R in R_list:
        for p, region in norms:
            if region not in ("ball", "annulus"):
                raise ValueError(f"decay_scan regions are 'ball' or 'annulus', got {region!r}")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                value = lebesgue_norm(f, p, region, R, refine=refine)
            for c in caught:
                warnings.warn(c.message, stacklevel=2)
            rows.append(DecayRow(float(R), float(p), region, value))
    return rows


# --------------------------------------------------------------------------
# regularity ladder


@dataclass
class LadderReport:
    rows: dict[str, dict[str, float]]
    interpolation_lhs: float
    interpolation_rhs: float
    div_identity_residual: float

    @property
    def interpolation_slack(self) -> float:
        return self.interpolation_rhs - self.interpolation_lhs


def regularity_ladder(u: SpectralVectorField, omega: SpectralVectorField, kappa: float) -> LadderReport:
    """Both sides of each bootstrap inequality, with unit constants, as ratios."""
    grid = u.grid
    mask = dealias_mask(grid)
    uc, wc = u.coeffs * mask, omega.coeffs * mask
    U = SpectralVectorField(grid, uc)
    W = SpectralVectorField(grid, wc)
    tt = tensor_square_coeffs(grid, uc).reshape(9, *grid.shape)

    def hs(c: np.ndarray, s: float) -> float:
        return math.sqrt(_h_real(grid, c, s))

    u1, u32, u2 = sobolev_norm(U, 1), sobolev_norm(U, 1.5), sobolev_norm(U, 2)
    w0, w12, w1, w2 = sobolev_norm(W, 0), sobolev_norm(W, 0.5), sobolev_norm(W, 1), sobolev_norm(W, 2)
    uu12, uu1 = hs(tt, 0.5), hs(tt, 1.0)
    u_inf = float(np.max(np.sqrt(np.sum(to_padded(grid, uc) ** 2, axis=0))))
    divw = div_coeffs(grid, wc)
    divw_h1 = hs(divw, 1.0)

    def row(lhs: float, rhs: float) -> dict[str, float]:
        return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)}

    rows = {
        "u_H32_vs_products": row(u32, uu12 + w12),
        "u_H32_vs_energy": row(u32, u1 * u1 + math.sqrt(w0 * w1)),
        "u_H2_vs_products": row(u2, uu1 + w1),
        "u_H2_vs_ladder": row(u2, u1 * u32 + w1),
        "div_omega_H1": row(divw_h1, kappa * w0 + u_inf * w1),
        "omega_H2": row(w2, divw_h1 + kappa * w0 + u_inf * w1 + u1),
    }
    # 2 Delta div w = kappa div w + div((u.grad) w)
    adv = _plain_advection(grid, uc, wc)
    parts = [-2.0 * grid.xi2 * divw, -kappa * divw, -div_coeffs(grid, adv)]
    return LadderReport(
        rows=rows,
        interpolation_lhs=w12 * w12,
        interpolation_rhs=w0 * w1,
        div_identity_residual=_relative(grid, sum(parts), parts),
    )


def _h_real(grid: Grid, c: np.ndarray, s: float) -> float:
    xi2 = grid.xi2
    weight = np.zeros_like(xi2)
    nz = xi2 > 0
    weight[nz] = xi2[nz] ** s
    power = np.abs(c) ** 2
    while power.ndim > 3:
        power = power.sum(axis=0)
    return grid.volume * float(np.sum(weight * power))


def interpolation_check(omega: SpectralVectorField) -> tuple[float, float]:
    """``(||w||_{H^1/2}^2, ||w||_{L^2} ||w||_{H^1})``."""
    return sobolev_norm(omega, 0.5) ** 2, sobolev_norm(omega, 0) * sobolev_norm(omega, 1)


# --------------------------------------------------------------------------
# polynomial counterexample: psi = x1^2/2 + x2^2/2 - x3^2, u = grad psi


_HESS = np.diag([1.0, 1.0, -2.0])


def _counterexample_fields(x: np.ndarray) -> dict[str, np.ndarray]:
    u = x @ _HESS  # grad psi; Hessian is symmetric
    jac = _HESS  # du_i/dx_j, constant
    # p = -|u|^2 / 2, grad p = -(J^T u)
    grad_p = -(u @ jac)
    adv = u @ jac.T  # (u.grad)u_i = sum_j u_j d_j u_i
    return {
        "u": u,
        "lap_u": np.zeros_like(x),  # second derivatives of a linear field
        "adv": adv,
        "grad_p": grad_p,
        "curl_u": np.tile([jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]], (len(x), 1)),
        "div_u": np.full(len(x), np.trace(jac)),
    }


def counterexample_residual(points: np.ndarray) -> float:
    """Max pointwise residual of both equations for the polynomial solution (f = g = 0, w = 0)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[-1] != 3:
        raise ValueError("points must have shape (N, 3)")
    fld = _counterexample_fields(x)
    mom = fld["lap_u"] - fld["adv"] - fld["grad_p"]  # curl w = 0
    mic = 0.5 * fld["curl_u"]  # every w term vanishes
    return float(max(np.max(np.abs(mom)), np.max(np.abs(mic))))


def counterexample_divergence(points: np.ndarray) -> float:
    x = np.atleast_2d(np.asarray(points, dtype=float))
    return float(np.max(np.abs(_counterexample_fields(x)["div_u"])))

"""Fixed points of the mollified micropolar map, homotopy scans and continuation.

The map is

    T(u, w) = (eps Delta^2 - Delta)^{-1} (
        P[ -((theta u).grad)(theta u) + 1/2 theta^2 curl w + f ],
        grad(theta div w) - ((theta u).grad)(theta w) - kappa theta^2 w + 1/2 theta^2 curl u + g )

with ``theta = theta_R`` and ``P`` the Leray projector. All products are
formed on the padded grid and truncated to the 2/3 band, so iterates stay in
the band.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .operators import (
    curl_coeffs,
    div_coeffs,
    grad_coeffs,
    leray_coeffs,
    mollifier,
    resolvent_coeffs,
)
from .spectral import Grid, SpectralVectorField, dealias_mask, sobolev_norm

log = logging.getLogger(__name__)

BLOWUP_NORM = 1e6


class NonFiniteError(ArithmeticError):
    """Raised when the map produces NaN or inf."""


@dataclass(frozen=True)
class State:
    u: SpectralVectorField
    omega: SpectralVectorField

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid) -> State:
        return cls(SpectralVectorField.zeros(grid), SpectralVectorField.zeros(grid))

    def __add__(self, other: State) -> State:
        return State(self.u + other.u, self.omega + other.omega)

    def __sub__(self, other: State) -> State:
        return State(self.u - other.u, self.omega - other.omega)

    def __mul__(self, s: float) -> State:
        return State(self.u * s, self.omega * s)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SolverParams:
    """Scalar knobs and forcing of the mollified problem.

    ``scheme`` picks the iteration: ``"plain"`` is damped Picard on ``T``
    itself; ``"linear_implicit"`` (default) inverts the linear part of ``T``
    with GMRES each step, which has the same fixed points but does not
    diverge when ``kappa / |xi|^2`` is large.
    """

    epsilon: float
    R_cut: float
    f: SpectralVectorField
    g: SpectralVectorField
    kappa: float = 100.0
    lam: float = 1.0
    damping: float = 0.5
    max_iters: int = 200
    tol: float = 1e-10
    scheme: Literal["linear_implicit", "plain"] = "linear_implicit"
    inner_rtol: float = 1e-3

    def __post_init__(self) -> None:
        if not (0 < self.epsilon <= 1):
            raise ValueError(f"epsilon must be in (0,1], got {self.epsilon}")
        if not (math.isfinite(self.R_cut) and self.R_cut >= 1):
            raise ValueError(f"R_cut must be >= 1, got {self.R_cut}")
        if not (math.isfinite(self.kappa) and self.kappa >= 1):
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if not (0 <= self.lam <= 1):
            raise ValueError(f"lambda must be in [0,1], got {self.lam}")
        if not (0 < self.damping <= 1):
            raise ValueError(f"damping must be in (0,1], got {self.damping}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.scheme not in ("linear_implicit", "plain"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.f.grid != self.g.grid:
            raise ValueError("f and g live on different grids")
        if 2.0 * self.R_cut > math.pi * self.f.grid.L:
            raise ValueError(f"2 R_cut = {2 * self.R_cut} exceeds the box half-width")
        fn = sobolev_norm(self.f, 0)
        div = float(np.linalg.norm(div_coeffs(self.f.grid, self.f.coeffs))) * math.sqrt(self.f.grid.volume)
        if div > 1e-10 * fn:
            raise ValueError(f"f must be divergence-free (||div f|| = {div:.3e}, ||f|| = {fn:.3e})")
        # forcing is restricted to the resolved band
        mask = dealias_mask(self.f.grid)
        object.__setattr__(self, "f", SpectralVectorField(self.f.grid, self.f.coeffs * mask))
        object.__setattr__(self, "g", SpectralVectorField(self.g.grid, self.g.coeffs * mask))

    @property
    def grid(self) -> Grid:
        return self.f.grid

    def with_(self, **changes) -> SolverParams:
        return replace(self, **changes)


def e_norm(v: SpectralVectorField, epsilon: float) -> float:
    """``||v||_{H^1} + sqrt(eps) ||v||_{H^2}``."""
    return sobolev_norm(v, 1) + math.sqrt(epsilon) * sobolev_norm(v, 2)


def state_e_norm(s: State, epsilon: float) -> float:
    return e_norm(s.u, epsilon) + e_norm(s.omega, epsilon)


# --------------------------------------------------------------------------
# the map


def _linear_rhs(grid: Grid, u: np.ndarray, w: np.ndarray, R: float, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    mol = mollifier(grid, R)
    lu = 0.5 * mol.band(mol.theta2 * mol.pad(curl_coeffs(grid, w)))
    tdiv = mol.band(mol.theta * mol.pad(div_coeffs(grid, w)))
    mix = 0.5 * curl_coeffs(grid, u) - kappa * w
    lw = grad_coeffs(grid, tdiv) + mol.band(mol.theta2 * mol.pad(mix))
    return lu, lw


def _nonlinear_rhs(grid: Grid, u: np.ndarray, w: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    mol = mollifier(grid, R)
    tu = mol.theta * mol.pad(u)
    tw = mol.theta * mol.pad(w)
    nu = -mol.band(mol.advect_padded(tu, tu))
    nw = -mol.band(mol.advect_padded(tu, tw))
    return nu, nw


def _smooth(grid: Grid, ru: np.ndarray, rw: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    return (
        leray_coeffs(grid, resolvent_coeffs(grid, ru, epsilon)),
        resolvent_coeffs(grid, rw, epsilon),
    )


def _check_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("non-finite values in T(U)")


def rhs_terms(state: State, params: SolverParams) -> dict[str, np.ndarray]:
    """Every term of the stacked right-hand side, as dealiased coefficients."""
    grid = state.grid
    mask = dealias_mask(grid)
    u = state.u.coeffs * mask
    w = state.omega.coeffs * mask
    mol = mollifier(grid, params.R_cut)
    tu = mol.theta * mol.pad(u)
    tw = mol.theta * mol.pad(w)
    return {
        "adv_u": mol.band(mol.advect_padded(tu, tu)),
        "adv_w": mol.band(mol.advect_padded(tu, tw)),
        "curl_w": mol.band(mol.theta2 * mol.pad(curl_coeffs(grid, w))),
        "curl_u": mol.band(mol.theta2 * mol.pad(curl_coeffs(grid, u))),
        "grad_tdiv": grad_coeffs(grid, mol.band(mol.theta * mol.pad(div_coeffs(grid, w)))),
        "t2w": mol.band(mol.theta2 * mol.pad(w)),
    }


def _apply(u: np.ndarray, w: np.ndarray, params: SolverParams) -> tuple[np.ndarray, np.ndarray]:
    grid = params.grid
    lu, lw = _linear_rhs(grid, u, w, params.R_cut, params.kappa)
    nu, nw = _nonlinear_rhs(grid, u, w, params.R_cut)
    tu, tw = _smooth(grid, lu + nu + params.f.coeffs, lw + nw + params.g.coeffs, params.epsilon)
    _check_finite(tu, tw)
    return tu, tw


def apply_T(state: State, params: SolverParams) -> State:
    """One application of the fixed-point map (without the homotopy factor)."""
    if state.grid != params.grid:
        raise ValueError("state and forcing live on different grids")
    mask = dealias_mask(state.grid)
    tu, tw = _apply(state.u.coeffs * mask, state.omega.coeffs * mask, params)
    return State(SpectralVectorField(state.grid, tu), SpectralVectorField(state.grid, tw))


# --------------------------------------------------------------------------
# iteration


@dataclass
class SolveTrace:
    """Per-iteration diagnostics; row ``i`` describes the iterate entering step ``i``."""

    H1_u: list[float] = field(default_factory=list)
    H1_w: list[float] = field(default_factory=list)
    sqrtEps_H2_u: list[float] = field(default_factory=list)
    sqrtEps_H2_w: list[float] = field(default_factory=list)
    update_norm: list[float] = field(default_factory=list)
    fixed_point_residual: list[float] = field(default_factory=list)
    r_mom: list[float] = field(default_factory=list)
    r_mic: list[float] = field(default_factory=list)
    energy_gap: list[float] = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    iterations: int = 0

    def __len__(self) -> int:
        return len(self.H1_u)

    COLUMNS = (
        "iter",
        "H1_u",
        "H1_w",
        "sqrtEps_H2_u",
        "sqrtEps_H2_w",
        "update_norm",
        "r_mom",
        "r_mic",
        "energy_gap",
    )

    def rows(self) -> list[tuple]:
        return [
            (
                i,
                self.H1_u[i],
                self.H1_w[i],
                self.sqrtEps_H2_u[i],
                self.sqrtEps_H2_w[i],
                self.update_norm[i],
                self.r_mom[i],
                self.r_mic[i],
                self.energy_gap[i],
            )
            for i in range(len(self))
        ]


class _Packer:
    def __init__(self, grid: Grid):
        self.grid = grid
        self.mask = dealias_mask(grid)
        self.nb = int(self.mask.sum())

    def pack(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.concatenate([u[:, self.mask].ravel(), w[:, self.mask].ravel()])

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nb = self.nb
        u = np.zeros((3, *self.grid.shape), dtype=np.complex128)
        w = np.zeros_like(u)
        u[:, self.mask] = x[: 3 * nb].reshape(3, nb)
        w[:, self.mask] = x[3 * nb :].reshape(3, nb)
        return u, w


def _linear_solver(params: SolverParams):
    """GMRES solve of ``(I - lam T_lin) x = r`` on the band, preconditioned."""
    grid = params.grid
    packer = _Packer(grid)
    lam, eps, kappa = params.lam, params.epsilon, params.kappa
    mol = mollifier(grid, params.R_cut)
    res = resolvent_coeffs(grid, np.ones(grid.shape), eps)[packer.mask]
    mass = float(np.mean(mol.theta2))
    pre_w = 1.0 / (1.0 + lam * kappa * mass * res)
    size = 6 * packer.nb

    def matvec(x: np.ndarray) -> np.ndarray:
        u, w = packer.unpack(x)
        lu, lw = _linear_rhs(grid, u, w, params.R_cut, kappa)
        su, sw = _smooth(grid, lu, lw, eps)
        return x - lam * packer.pack(su, sw)

    def precond(x: np.ndarray) -> np.ndarray:
        y = x.copy()
        y[3 * packer.nb :] *= np.tile(pre_w, 3)
        return y

    A = spla.LinearOperator((size, size), matvec=matvec, dtype=np.complex128)
    M = spla.LinearOperator((size, size), matvec=precond, dtype=np.complex128)
    counter = {"matvecs": 0}
    last: dict[str, np.ndarray] = {}

    def solve(ru: np.ndarray, rw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        b = packer.pack(ru, rw)
        if not np.any(b):
            return ru, rw
        # near-linear problems give nearly parallel right sides from step to
        # step; rescaling the previous solution is a good starting guess
        x0 = None
        if last:
            bb = np.vdot(last["b"], last["b"])
            if bb > 0:
                x0 = last["x"] * (np.vdot(last["b"], b) / bb)

        def cb(_):
            counter["matvecs"] += 1

        x, info = spla.gmres(
            A, b, x0=x0, M=M, rtol=params.inner_rtol, atol=0.0, restart=60, maxiter=20,
            callback=cb, callback_type="pr_norm",
        )
        if info < 0:
            raise NonFiniteError("GMRES breakdown")
        last["b"], last["x"] = b, x
        return packer.unpack(x)

    solve.counter = counter  # type: ignore[attr-defined]
    return solve


def _record(trace: SolveTrace, state: State, params: SolverParams, update: float, fp_res: float) -> None:
    from .verification import energy_ledger, residuals

    eps = params.epsilon
    se = math.sqrt(eps)
    trace.H1_u.append(sobolev_norm(state.u, 1))
    trace.H1_w.append(sobolev_norm(state.omega, 1))
    trace.sqrtEps_H2_u.append(se * sobolev_norm(state.u, 2))
    trace.sqrtEps_H2_w.append(se * sobolev_norm(state.omega, 2))
    trace.update_norm.append(update)
    trace.fixed_point_residual.append(fp_res)
    rr = residuals(state, None, params, mode="mollified")
    trace.r_mom.append(rr.r_mom)
    trace.r_mic.append(rr.r_mic)
    trace.energy_gap.append(energy_ledger(state, params, params.lam).gap)


def _strong_ok(state: State, params: SolverParams, norm: float) -> bool:
    """Relative strong residuals below ``tol`` (skipped for a numerically zero state)."""
    from .verification import residuals

    if norm < params.tol:
        return True
    rr = residuals(state, None, params)
    return max(rr.r_mom, rr.r_mic) < params.tol


def picard_solve(
    params: SolverParams, init: State | None = None, diagnostics: bool = True
) -> tuple[State, SolveTrace]:
    """Damped iteration towards ``U = lam T(U)``.

    Stops once ``||U - lam T(U)||_E < tol``. Non-convergence is reported in
    the trace, not raised; NaN/inf or a norm above ``BLOWUP_NORM`` aborts
    with ``trace.reason`` set.
    """
    grid = params.grid
    mask = dealias_mask(grid)
    state = State.zeros(grid) if init is None else init
    if state.grid != grid:
        raise ValueError("initial state and forcing live on different grids")
    u = leray_coeffs(grid, state.u.coeffs * mask)
    w = state.omega.coeffs * mask
    lam, alpha, eps = params.lam, params.damping, params.epsilon
    trace = SolveTrace()
    solve = _linear_solver(params) if params.scheme == "linear_implicit" else None
    update = 0.0

    def wrap(a: np.ndarray, b: np.ndarray) -> State:
        return State(SpectralVectorField(grid, a), SpectralVectorField(grid, b))

    for it in range(params.max_iters + 1):
        try:
            tu, tw = _apply(u, w, params)
        except NonFiniteError as exc:
            trace.reason = f"non-finite map value at iteration {it}: {exc}"
            break
        ru, rw = lam * tu - u, lam * tw - w
        current = wrap(u, w)
        fp_res = state_e_norm(wrap(ru, rw), eps)
        norm_now = state_e_norm(current, eps)
        if diagnostics:
            _record(trace, current, params, update, fp_res)
        else:
            trace.update_norm.append(update)
            trace.fixed_point_residual.append(fp_res)
            trace.H1_u.append(sobolev_norm(current.u, 1))
            trace.H1_w.append(sobolev_norm(current.omega, 1))
        trace.iterations = it
        if not (math.isfinite(fp_res) and math.isfinite(norm_now)):
            trace.reason = f"non-finite norm at iteration {it}"
            break
        if max(norm_now, fp_res) > BLOWUP_NORM:
            trace.reason = f"blow-up: norm {max(norm_now, fp_res):.3e} exceeds {BLOWUP_NORM:.0e} at iteration {it}"
            break
        if fp_res < params.tol and _strong_ok(current, params, norm_now):
            trace.converged = True
            trace.reason = f"converged: ||U - lam T(U)||_E = {fp_res:.3e} < tol"
            break
        if it == params.max_iters:
            trace.reason = f"max_iters reached with ||U - lam T(U)||_E = {fp_res:.3e}"
            break
        if solve is not None:
            du, dw = solve(ru, rw)
        else:
            du, dw = ru, rw
        du, dw = alpha * du, alpha * dw
        u = leray_coeffs(grid, u + du)
        w = w + dw
        update = state_e_norm(wrap(du, dw), eps)
    log.info("picard_solve: %s", trace.reason)
    return wrap(u, w), trace


def apriori_bound(params: SolverParams) -> float:
    """``||f||_{H^-1}^2 + ||g||_{H^-1}^2``, the constant-free right side of the a-priori estimate."""
    return sobolev_norm(params.f, -1) ** 2 + sobolev_norm(params.g, -1) ** 2


def apriori_left(state: State, epsilon: float) -> float:
    """``eps(||u||_{H^2}^2 + ||w||_{H^2}^2) + ||u||_{H^1}^2 + ||w||_{H^1}^2``."""
    return (
        epsilon * (sobolev_norm(state.u, 2) ** 2 + sobolev_norm(state.omega, 2) ** 2)
        + sobolev_norm(state.u, 1) ** 2
        + sobolev_norm(state.omega, 1) ** 2
    )


# --------------------------------------------------------------------------
# parameter sweeps


@dataclass
class HomotopyPoint:
    lam: float
    H1_u: float
    H1_w: float
    E_norm: float
    converged: bool
    apriori_ratio: float
    flagged: bool


def homotopy_scan(
    params: SolverParams, lambdas: Sequence[float], harness_constant: float = 10.0
) -> list[HomotopyPoint]:
    """Solve ``U = lam T(U)`` for each ``lam`` and report the solution norms.

    A point is flagged when its a-priori left side exceeds
    ``harness_constant * apriori_bound``.
    """
    bound = apriori_bound(params)
    out = []
    for lam in lambdas:
        if not 0 <= lam <= 1:
            raise ValueError(f"lambda must be in [0,1], got {lam}")
        state, trace = picard_solve(params.with_(lam=float(lam)), diagnostics=False)
        left = apriori_left(state, params.epsilon)
        ratio = left / bound if bound > 0 else (0.0 if left == 0 else math.inf)
        out.append(
            HomotopyPoint(
                lam=float(lam),
                H1_u=sobolev_norm(state.u, 1),
                H1_w=sobolev_norm(state.omega, 1),
                E_norm=state_e_norm(state, params.epsilon),
                converged=trace.converged,
                apriori_ratio=ratio,
                flagged=ratio > harness_constant,
            )
        )
    return out


@dataclass
class ContinuationCell:
    epsilon: float
    R_cut: float
    state: State
    converged: bool
    iterations: int
    H1: float
    H1_diff_prev: float | None
    energy_gap: float


def continuation(
    params: SolverParams,
    epsilons: Sequence[float],
    radii: Sequence[float],
    diagnostics: bool = False,
) -> list[ContinuationCell]:
    """Warm-started solves over ``R`` (outer, ascending) and ``eps`` (inner, descending).

    Each cell reports ``||U_cell - U_prev||_{H^1}`` against the previous cell
    as a Cauchy diagnostic for the double limit.
    """
    from .verification import energy_ledger

    if not epsilons or not radii:
        raise ValueError("continuation needs nonempty epsilon and R lists")
    if list(epsilons) != sorted(epsilons, reverse=True):
        raise ValueError("epsilon list must be descending")
    if list(radii) != sorted(radii):
        raise ValueError("R list must be ascending")
    cells: list[ContinuationCell] = []
    prev: State | None = None
    for R in radii:
        for eps in epsilons:
            p = params.with_(epsilon=float(eps), R_cut=float(R))
            state, trace = picard_solve(p, init=prev, diagnostics=diagnostics)
            diff = None
            if prev is not None:
                d = state - prev
                diff = math.hypot(sobolev_norm(d.u, 1), sobolev_norm(d.omega, 1))
            cells.append(
                ContinuationCell(
                    epsilon=float(eps),
                    R_cut=float(R),
                    state=state,
                    converged=trace.converged,
                    iterations=trace.iterations,
                    H1=math.hypot(sobolev_norm(state.u, 1), sobolev_norm(state.omega, 1)),
                    H1_diff_prev=diff,
                    energy_gap=energy_ledger(state, p, p.lam).gap,
                )
            )
            if not trace.converged:
                log.warning("continuation cell eps=%g R=%g: %s", eps, R, trace.reason)
            prev = state
    return cells

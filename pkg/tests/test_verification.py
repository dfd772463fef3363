import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import full, random_vector
from micropolar.config import single_mode
from micropolar.operators import pressure_from_velocity
from micropolar.solver import SolverParams, State, picard_solve
from micropolar.spectral import ScalarField, SpectralVectorField, make_grid
from micropolar.verification import (
    LIOUVILLE_TERMS,
    corollary_bound,
    counterexample_divergence,
    counterexample_residual,
    decay_scan,
    energy_ledger,
    gaussian_fields,
    holder_exponent,
    interpolation_check,
    liouville_ledger,
    radial_cutoff_gradient_norm,
    regularity_ladder,
    residuals,
    trilinear_nullity,
)

# 4 pi int_0^1 (1+t)^2 |S'(t)|^3 dt = 20400 pi / 1001 for S' = 30 t^2 (1-t)^2
GRAD_CUTOFF_L3 = (20400 * math.pi / 1001) ** (1 / 3)
# radial quadrature of exp(-|x|^2) over R <= |x| <= 2R, L^6 norm
GAUSS_ANNULUS_L6 = {1: 0.3753675321686176, 2: 0.020787165906128321}


@pytest.fixture(scope="module")
def solved():
    g = make_grid(16, 4.0)
    f = single_mode(g, [2, 0, 0], hm1_norm=1e-2)
    params = SolverParams(epsilon=0.5, R_cut=2.0, f=f, g=SpectralVectorField.zeros(g), damping=1.0, inner_rtol=1e-6)
    state, trace = picard_solve(params, diagnostics=False)
    assert trace.converged
    return state, params


@pytest.fixture(scope="module")
def gaussian():
    g = make_grid(32, 4.0)
    return gaussian_fields(g, 1.0)


class TestCounterexample:
    def test_residual_and_divergence(self):
        pts = np.random.default_rng(0).uniform(-100, 100, (10_000, 3))
        assert counterexample_residual(pts) < 1e-12
        assert counterexample_divergence(pts) == 0.0

    def test_against_finite_differences(self):
        # quadratic psi: central differences of psi and of p are exact up to rounding
        psi = lambda x: 0.5 * x[..., 0] ** 2 + 0.5 * x[..., 1] ** 2 - x[..., 2] ** 2  # noqa: E731
        h = 1e-2
        e = np.eye(3) * h
        pts = np.random.default_rng(1).uniform(-3, 3, (50, 3))

        def grad(fn, x):
            return np.stack([(fn(x + e[i]) - fn(x - e[i])) / (2 * h) for i in range(3)], axis=-1)

        u = lambda x: grad(psi, x)  # noqa: E731
        p = lambda x: -0.5 * np.sum(u(x) ** 2, axis=-1)  # noqa: E731
        jac = np.stack([grad(lambda y, i=i: u(y)[..., i], pts) for i in range(3)], axis=-2)
        adv = np.einsum("nij,nj->ni", jac, u(pts))
        mom = -adv - grad(p, pts)
        assert np.max(np.abs(mom)) < 1e-8
        assert np.max(np.abs(np.trace(jac, axis1=1, axis2=2))) < 1e-10
        assert counterexample_residual(pts) < 1e-12

    def test_shape(self):
        with pytest.raises(ValueError):
            counterexample_residual(np.zeros((4, 2)))


class TestResiduals:
    def test_shear_solves_original_system(self):
        # u = (sin x2, 0, 0), w = 0, p = 0: -Delta u = u, (u.grad)u = 0, so f = u, g = -curl(u)/2
        grid = make_grid(16, 1.0)
        x = grid.coords()
        z = np.zeros(grid.shape)
        u = SpectralVectorField.from_values(grid, np.stack([full(grid, np.sin(x[1])), z, z]))
        g = SpectralVectorField.from_values(grid, np.stack([z, z, full(grid, 0.5 * np.cos(x[1]))]))
        params = SolverParams(epsilon=0.5, R_cut=1.0, f=u, g=g)
        rr = residuals(State(u, SpectralVectorField.zeros(grid)), None, params, mode="original")
        assert rr.r_mom < 1e-14 and rr.r_mic < 1e-14

    def test_solved_state(self, solved):
        state, params = solved
        rr = residuals(state, None, params)
        assert rr.r_mom < 1e-9 and rr.r_mic < 1e-9
        assert residuals(state * 1.1, None, params).r_mom > 1e-3

    def test_unknown_mode(self, solved):
        state, params = solved
        with pytest.raises(ValueError):
            residuals(state, None, params, mode="weak")


class TestEnergyLedger:
    def test_balance_at_fixed_point(self, solved):
        state, params = solved
        rep = energy_ledger(state, params)
        assert rep.gap < 1e-6
        assert set(rep.terms) == {
            "eps_H2", "H1", "div_omega", "kappa_omega",
            "coupling_bulk", "coupling_boundary", "advection_u", "advection_omega", "forcing_f", "forcing_g",
        }
        assert abs(rep.terms["advection_u"]) < 1e-8 * rep.left
        value, bound = corollary_bound(rep, params)
        assert 0 <= value <= bound * (1 + 1e-6)

    def test_not_balanced_off_solution(self, solved):
        state, params = solved
        assert energy_ledger(state * 2.0, params).gap > 1e-2

    def test_lambda_zero(self, solved):
        state, params = solved
        assert corollary_bound(energy_ledger(state, params, 0.0), params, 0.0)[1] == math.inf


class TestNullity:
    @settings(max_examples=10)
    @given(st.integers(0, 2**32 - 1))
    def test_vanish(self, seed):
        grid = make_grid(16, 4.0)
        u = random_vector(grid, seed, solenoidal=True)
        w = random_vector(grid, seed + 1)
        from micropolar.operators import CutoffSpec

        a, b = trilinear_nullity(u, w, CutoffSpec(2.0))
        assert a < 1e-12 and b < 1e-12

    def test_requires_solenoidal(self):
        from micropolar.operators import CutoffSpec

        grid = make_grid(16, 4.0)
        u = random_vector(grid, 4)
        with pytest.raises(ValueError, match="divergence-free"):
            trilinear_nullity(u, u, CutoffSpec(2.0))


class TestHolder:
    @pytest.mark.parametrize("q, ell", [(3.0, math.inf), (4.0, 4.0), (4.5, 3.0)])
    def test_exponent(self, q, ell):
        assert holder_exponent(q) == pytest.approx(ell)

    @pytest.mark.parametrize("q", [2.9, 5.0])
    def test_range(self, q):
        with pytest.raises(ValueError):
            holder_exponent(q)

    @pytest.mark.parametrize("R", [1.0, 2.0, 7.0])
    def test_L3_scale_invariant(self, R):
        assert radial_cutoff_gradient_norm(R, 3.0) == pytest.approx(GRAD_CUTOFF_L3, rel=1e-12)

    def test_sup(self):
        assert radial_cutoff_gradient_norm(2.0, math.inf) == pytest.approx(15 / 16, rel=1e-9)

    @pytest.mark.parametrize("ell", [3.5, 4.0])
    def test_homogeneity(self, ell):
        a, b = radial_cutoff_gradient_norm(1.0, ell), radial_cutoff_gradient_norm(4.0, ell)
        assert b == pytest.approx(a * 4.0 ** (3 / ell - 1), rel=1e-12)


class TestLiouville:
    def test_columns(self, gaussian):
        u, w, p = gaussian
        reps = liouville_ledger(u, w, p, [1.0, 2.0], q=3.0)
        assert [r.R for r in reps] == [1.0, 2.0]
        for r in reps:
            assert tuple(r.terms) == LIOUVILLE_TERMS
            assert r.left >= 0
            assert r.extras["ell"] == math.inf
            assert r.extras["grad_phi_L_ell_radial"] == pytest.approx(15 / 8, rel=1e-9)

    @pytest.mark.parametrize("q", [3.0, 4.0, 4.5])
    def test_majorants_bound_terms(self, gaussian, q):
        u, w, p = gaussian
        for r in liouville_ledger(u, w, p, [1.0, 2.0], q=q):
            for name in LIOUVILLE_TERMS[1:]:
                assert abs(r.terms[name]) <= r.majorants[name] * (1 + 1e-10), (r.R, name)

    @settings(max_examples=8)
    @given(st.integers(0, 2**32 - 1))
    def test_majorants_random_fields(self, seed):
        grid = make_grid(16, 2.0)
        u = random_vector(grid, seed, solenoidal=True)
        w = random_vector(grid, seed + 1)
        p = pressure_from_velocity(u)
        for r in liouville_ledger(u, w, p, [1.0], q=4.0):
            for name in LIOUVILLE_TERMS[1:]:
                assert abs(r.terms[name]) <= r.majorants[name] * (1 + 1e-10)

    def test_advection_integration_by_parts(self, gaussian):
        # T3 in annulus form against the direct integral of phi^2 u.(u.grad)u
        from micropolar.operators import CutoffSpec, cutoff_derivatives
        from micropolar.spectral import to_padded
        from micropolar.operators import grad_coeffs

        u, w, p = gaussian
        grid = u.grid
        rep = liouville_ledger(u, w, p, [1.0], q=3.0, refine=2)[0]
        phi = cutoff_derivatives(CutoffSpec(1.0, "phi"), grid, 2)[0]
        m = 2 * grid.n
        up = to_padded(grid, u.coeffs, m)
        gu = to_padded(grid, np.stack([grad_coeffs(grid, u.coeffs[i]) for i in range(3)]), m)
        adv = np.einsum("j...,ij...->i...", up, gu)
        direct = np.sum(phi**2 * np.sum(adv * up, axis=0)) * (2 * math.pi * grid.L / m) ** 3
        scale = rep.majorants["T3_advection_u"]
        assert abs(direct - rep.terms["T3_advection_u"]) < 1e-3 * scale

    def test_empty_annulus(self):
        grid = make_grid(8, 3.0)  # spacing 2.36 > 2R
        u = SpectralVectorField.zeros(grid)
        with pytest.raises(ValueError, match="no grid points"):
            liouville_ledger(u, u, ScalarField.zeros(grid), [1.0], q=3.0, refine=1)

    def test_cutoff_too_big(self, gaussian):
        u, w, p = gaussian
        with pytest.raises(ValueError):
            liouville_ledger(u, w, p, [7.0], q=3.0)


class TestDecay:
    def test_constant_field_scaling(self):
        grid = make_grid(32, 4.0)
        one = ScalarField.from_values(grid, np.ones(grid.shape))
        rows = decay_scan(one, [1.0, 2.0, 3.0], [(2.0, "annulus"), (6.0, "ball")], refine=2)
        assert len(rows) == 6
        ann = [r.value for r in rows if r.region == "annulus"]
        # ||1||_{L^p(C_R)} = (28 pi R^3 / 3)^{1/p}
        for R, v in zip((1.0, 2.0, 3.0), ann):
            assert v == pytest.approx((28 * math.pi * R**3 / 3) ** 0.5, rel=0.1)
        assert ann[1] / ann[0] == pytest.approx(2**1.5, rel=0.1)

    def test_gaussian_l6(self):
        grid = make_grid(64, 3.0)
        r2 = sum(c**2 for c in grid.coords())
        f = ScalarField.from_values(grid, np.exp(-r2))
        rows = decay_scan(f, [1.0, 2.0], [(6.0, "annulus")], refine=2)
        for row in rows:
            assert row.value == pytest.approx(GAUSS_ANNULUS_L6[int(row.R)], rel=0.15)

    def test_region(self):
        grid = make_grid(8, 1.0)
        with pytest.raises(ValueError):
            decay_scan(ScalarField.zeros(grid), [1.0], [(2.0, "shell")])


class TestLadder:
    def test_structure(self, solved):
        state, params = solved
        rep = regularity_ladder(state.u, state.omega, params.kappa)
        assert set(rep.rows) == {
            "u_H32_vs_products", "u_H32_vs_energy", "u_H2_vs_products",
            "u_H2_vs_ladder", "div_omega_H1", "omega_H2",
        }
        for row in rep.rows.values():
            assert row["lhs"] >= 0 and row["rhs"] >= 0
        assert rep.interpolation_slack >= -1e-12 * rep.interpolation_rhs

    def test_div_identity_for_gradient_free_omega(self):
        # w = curl A is solenoidal: every term of the divergence identity is zero
        grid = make_grid(16, 2.0)
        from micropolar.operators import differential

        w = differential(random_vector(grid, 2), "curl")
        u = random_vector(grid, 3, solenoidal=True)
        rep = regularity_ladder(u, w, 100.0)
        assert rep.div_identity_residual >= 0
        assert rep.rows["div_omega_H1"]["lhs"] < 1e-10


class TestInterpolation:
    @given(st.integers(0, 2**32 - 1))
    def test_slack(self, seed):
        w = random_vector(make_grid(8, 1.0), seed)
        lhs, rhs = interpolation_check(w)
        assert rhs - lhs >= -1e-12 * rhs

    def test_single_shell(self):
        g = make_grid(8, 1.0)
        x = g.coords()
        w = SpectralVectorField.from_values(g, np.stack([full(g, np.cos(x[0] + 2 * x[1] + 2 * x[2]))] * 3))
        lhs, rhs = interpolation_check(w)
        assert lhs == pytest.approx(rhs, rel=1e-12)

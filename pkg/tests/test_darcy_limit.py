import math

import numpy as np
import pytest
from scipy import fft as sp_fft

from config import BumpSpec, Params
from core.constitutive import find_nonmonotone_threshold
from core.darcy_limit import (
    StrongLift, continuity_residual, darcy_flux, error_term, flux_derivative, gf_rhs, gf_stable_dt,
    gradient_flow_energy, lift_strong, solve_gradient_flow,
)
from core.nsk_dynamics import State, well_prepared_state
from core.torus_grid import Grid
from utils.errors import PositivityError, ResolutionError


def test_constant_state_is_stationary(grid32, bump_params):
    rho = np.full(32, 2.0)
    assert np.max(np.abs(gf_rhs(rho, grid32, bump_params))) < 1e-12
    (lift,) = lift_strong([(0.0, rho)], grid32, bump_params)
    for values in (lift.m_bar, lift.J_bar, lift.e_bar):
        assert np.max(np.abs(values)) < 1e-12


def test_rhs_conserves_mass(grid64, smooth_rho, bump_params):
    assert abs(grid64.integrate(gf_rhs(smooth_rho, grid64, bump_params))) < 1e-12


def test_linear_decay_rate():
    grid = Grid(32)
    params = Params(gamma=2.0, s=-1.0)
    rho0 = 2.0 + 1e-6 * np.sin(grid.nodes)
    t_end = 0.01
    samples = solve_gradient_flow(rho0, t_end, grid, params)

    def amplitude(rho):
        return 2.0 * abs(sp_fft.rfft(rho)[1]) / grid.n_points

    rate = math.log(amplitude(samples[-1][1]) / amplitude(samples[0][1])) / t_end
    # −κ²p′(ρ*) − κ⁴ρ*k(ρ*) = −4 − 1
    assert rate == pytest.approx(-5.0, rel=1e-4)


def test_mass_conserved_and_energy_decays():
    grid = Grid(64)
    base = Params(gamma=2.0, s=-1.0, bump=BumpSpec(0.0, 2.0, 0.5))
    threshold = find_nonmonotone_threshold(base)
    params = base.with_updates(bump=BumpSpec(1.5 * threshold, 2.0, 0.5))
    rho0 = 2.0 + 0.1 * np.sin(grid.nodes)
    samples = solve_gradient_flow(rho0, 0.02, grid, params, sample_every=0.005)

    assert [t for t, _ in samples] == pytest.approx([0.0, 0.005, 0.01, 0.015, 0.02])
    masses = np.array([grid.integrate(rho) for _, rho in samples])
    assert np.max(np.abs(masses - masses[0])) / masses[0] < 1e-12
    energies = np.array([gradient_flow_energy(rho, grid, params) for _, rho in samples])
    assert np.all(np.diff(energies) <= 1e-10 * abs(energies[0]))
    assert energies[-1] < energies[0]


def test_schemes_agree():
    grid = Grid(32)
    params = Params(gamma=2.0, s=0.0)
    rho0 = 2.0 + 0.2 * np.cos(grid.nodes)
    etd = solve_gradient_flow(rho0, 0.002, grid, params, scheme="etd2")[-1][1]
    rk3 = solve_gradient_flow(rho0, 0.002, grid, params, scheme="ssp_rk3")[-1][1]
    assert np.max(np.abs(etd - rk3)) < 1e-6


def test_floor_violation_raises(grid32, params):
    with pytest.raises(PositivityError):
        solve_gradient_flow(np.full(32, 1e-4), 0.01, grid32, params)


def test_unknown_scheme(grid32, params):
    with pytest.raises(ValueError):
        solve_gradient_flow(np.full(32, 2.0), 0.01, grid32, params, scheme="euler")


def test_stable_dt_bounds(grid64, smooth_rho, params):
    dt = gf_stable_dt(smooth_rho, grid64, params, max_dt=1e-3)
    assert 0 < dt <= 1e-3
    assert gf_stable_dt(np.full(64, 2.0), grid64, params) == 1e-3
    assert gf_stable_dt(smooth_rho, grid64, params, scheme="ssp_rk3") < dt


class TestLift:
    def test_continuity_holds(self, grid64, smooth_rho, bump_params):
        (lift,) = lift_strong([(0.0, smooth_rho)], grid64, bump_params)
        assert continuity_residual(lift, bump_params) < 1e-10

    def test_velocity_scales_with_epsilon(self, grid64, smooth_rho):
        lifts = [lift_strong([(0.0, smooth_rho)], grid64, Params(epsilon=eps))[0] for eps in (0.1, 0.2)]
        ratio = np.max(np.abs(lifts[1].u_bar)) / np.max(np.abs(lifts[0].u_bar))
        assert ratio == pytest.approx(2.0, rel=1e-12)

    def test_drift_is_epsilon_independent(self, grid64, smooth_rho):
        j_small = lift_strong([(0.0, smooth_rho)], grid64, Params(epsilon=0.05))[0].J_bar
        j_large = lift_strong([(0.0, smooth_rho)], grid64, Params(epsilon=0.2))[0].J_bar
        np.testing.assert_allclose(j_small, j_large, atol=1e-15)

    def test_error_term_is_first_order(self, grid64, smooth_rho, bump_params):
        scaled = [
            np.max(np.abs(error_term(smooth_rho, grid64, bump_params.with_updates(epsilon=eps)))) / eps
            for eps in (0.2, 0.1, 0.05)
        ]
        assert max(scaled) / min(scaled) < 1.1

    def test_flux_derivative_matches_finite_difference(self, grid64, smooth_rho, bump_params):
        w = np.cos(3 * grid64.nodes) + 0.5 * np.sin(grid64.nodes)
        h = 1e-5
        fd = (darcy_flux(smooth_rho + h * w, grid64, bump_params)
              - darcy_flux(smooth_rho - h * w, grid64, bump_params)) / (2 * h)
        exact = flux_derivative(smooth_rho, w, grid64, bump_params)
        assert np.max(np.abs(exact - fd)) <= 1e-6 * np.max(np.abs(exact))

    def test_well_prepared_state(self, grid64, smooth_rho, params):
        (lift,) = lift_strong([(0.0, smooth_rho)], grid64, params)
        state = well_prepared_state(lift, params)
        np.testing.assert_array_equal(state.rho, lift.rho_bar)
        np.testing.assert_array_equal(state.m, lift.m_bar)
        np.testing.assert_allclose(state.J, lift.J_bar, atol=1e-14)

    def test_from_state_without_viscosity_has_no_error(self, grid32, params):
        x = grid32.nodes
        state = State(time=0.5, rho=2 + 0.1 * np.sin(x), m=0.1 * np.cos(x), J=np.zeros(32), grid=grid32)
        lift = StrongLift.from_state(state, params)
        assert lift.time == 0.5
        assert np.all(lift.e_bar == 0.0)
        np.testing.assert_array_equal(lift.u_bar, state.u)

    def test_from_state_carries_viscous_source(self, grid32):
        params = Params(s=-1.0, nu=0.1, epsilon=1.0)
        x = grid32.nodes
        state = State(time=0.0, rho=np.full(32, 2.0), m=2.0 * np.sin(x), J=np.zeros(32), grid=grid32)
        lift = StrongLift.from_state(state, params)
        # ∂ₓ(ν·2ρ·∂ₓsin x) = −0.4 sin x
        np.testing.assert_allclose(lift.e_bar, -0.4 * np.sin(x), atol=1e-12)


def test_error_term_matches_time_difference(grid64, smooth_rho, bump_params):
    h = 2e-5
    eps = bump_params.epsilon
    samples = solve_gradient_flow(smooth_rho, 2 * h, grid64, bump_params, sample_every=h)
    (_, before), (_, center), (_, after) = samples

    def momentum(rho):
        return eps * darcy_flux(rho, grid64, bump_params)

    m_center = momentum(center)
    dm_dt = (momentum(after) - momentum(before)) / (2 * h)
    expected = grid64.deriv(grid64.dealias(m_center * m_center / center)) / eps + dm_dt
    e_bar = error_term(center, grid64, bump_params)
    assert np.max(np.abs(e_bar - expected)) <= 1e-4 * np.max(np.abs(e_bar))


class TestResolutionCheck:
    def test_tail_above_tolerance_raises(self, grid32, params):
        rho0 = 2.0 + 0.3 * np.sin(grid32.nodes)
        with pytest.raises(ResolutionError) as info:
            solve_gradient_flow(rho0, 1e-3, grid32, params, tail_tolerance=1e-30)
        assert info.value.tail_ratio >= 1e-30

    def test_check_can_be_disabled(self, grid32, params):
        rho0 = 2.0 + 0.3 * np.sin(grid32.nodes)
        samples = solve_gradient_flow(rho0, 1e-3, grid32, params, tail_tolerance=1e-30, check_resolution=False)
        assert len(samples) == 2

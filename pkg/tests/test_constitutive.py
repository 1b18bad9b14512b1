import math

import numpy as np
import pytest

from config import BumpSpec, LameKind, LameMode, Params
from core.constitutive import (
    bump_e, capillarity_k, capillary_mu, check_nonmonotone, enthalpy, find_nonmonotone_threshold,
    identity_residuals, lambda_bd, lame_coefficients, pressure, pressure_split, rel_enthalpy,
    rel_pressure, rel_pressure_residual,
)
from utils.errors import DomainError


SPEC = BumpSpec(amplitude=1.3, center=2.0, halfwidth=0.5)


class TestBump:
    def test_zero_outside_support(self):
        for order in range(4):
            assert bump_e(2.0 + 0.5, SPEC, order) == 0.0
            assert bump_e(3.7, SPEC, order) == 0.0
            assert bump_e(0.4, SPEC, order) == 0.0

    def test_center_value(self):
        assert bump_e(2.0, SPEC) == pytest.approx(1.3 * math.exp(-1.0), rel=1e-14)
        assert bump_e(2.0, SPEC, 1) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_derivatives_match_finite_differences(self, order):
        h = 1e-5
        for rho in (1.75, 2.1, 2.3):
            fd = (bump_e(rho + h, SPEC, order - 1) - bump_e(rho - h, SPEC, order - 1)) / (2 * h)
            exact = bump_e(rho, SPEC, order)
            assert exact == pytest.approx(fd, rel=1e-6, abs=1e-8)

    def test_amplitude_zero_is_identically_zero(self):
        rho = np.linspace(0.5, 4.0, 50)
        assert np.all(bump_e(rho, BumpSpec(amplitude=0.0)) == 0.0)

    def test_rejects_unsupported_order(self):
        with pytest.raises(ValueError):
            bump_e(2.0, SPEC, 4)


class TestPressureAndEnthalpy:
    def test_quadratic_enthalpy(self):
        params = Params(gamma=2.0)
        assert enthalpy(3.0, params) == pytest.approx(9.0)
        assert enthalpy(3.0, params, 2) == pytest.approx(2.0)

    def test_enthalpy_with_bump_at_center(self):
        params = Params(gamma=5.0 / 3.0, bump=BumpSpec(amplitude=1.0, center=2.0, halfwidth=0.5))
        expected = 2.0 ** (5.0 / 3.0) * 1.5 + math.exp(-1.0)
        assert enthalpy(2.0, params) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("gamma", [1.4, 2.0, 3.0])
    def test_unit_density_pressure(self, gamma):
        assert pressure(1.0, Params(gamma=gamma)) == pytest.approx(1.0)

    def test_pressure_with_bump(self):
        params = Params(gamma=2.0, bump=BumpSpec(amplitude=1.0, center=1.0, halfwidth=0.5))
        assert pressure(1.0, params) == pytest.approx(1.0 - math.exp(-1.0), rel=1e-13)

    def test_pressure_derivative_is_rho_h_second(self, bump_params):
        rho = np.linspace(1.6, 2.4, 17)
        h = 1e-6
        fd = (pressure(rho + h, bump_params) - pressure(rho - h, bump_params)) / (2 * h)
        np.testing.assert_allclose(pressure(rho, bump_params, 1), fd, rtol=1e-6, atol=1e-7)
        np.testing.assert_allclose(pressure(rho, bump_params, 1), rho * enthalpy(rho, bump_params, 2), rtol=1e-13)

    def test_split_sums_to_pressure(self, bump_params):
        rho = np.linspace(1.0, 3.0, 41)
        p_gamma, p_e = pressure_split(rho, bump_params)
        np.testing.assert_allclose(p_gamma + p_e, pressure(rho, bump_params), rtol=1e-14, atol=1e-14)

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
    def test_nonpositive_density_raises(self, bad):
        with pytest.raises(DomainError):
            pressure(np.array([1.0, bad]), Params())

    def test_domain_error_is_value_error(self):
        with pytest.raises(ValueError):
            enthalpy(-2.0, Params())


class TestCapillarity:
    def test_capillarity_examples(self):
        assert capillarity_k(2.0, Params(s=-1.0)) == pytest.approx(0.5)
        assert capillarity_k(7.0, Params(s=0.0)) == pytest.approx(9.0 / 4.0)
        assert capillarity_k(2.0, Params(s=1.0)) == pytest.approx(8.0)

    def test_mu_examples(self):
        assert capillary_mu(5.0, Params(s=-1.0)) == pytest.approx(5.0)
        assert capillary_mu(2.0, Params(s=1.0)) == pytest.approx(4.0)
        assert capillary_mu(4.0, Params(s=0.0), 1) == pytest.approx(3.0)

    def test_lambda_examples(self):
        assert lambda_bd(3.0, Params(s=-1.0)) == pytest.approx(0.0)
        assert lambda_bd(2.0, Params(s=1.0)) == pytest.approx(8.0)
        assert lambda_bd(4.0, Params(s=0.0)) == pytest.approx(8.0)

    @pytest.mark.parametrize("s", [-1.0, 0.0, 0.5, 2.0])
    def test_mu_prime_squared_is_rho_k(self, s):
        params = Params(s=s)
        rho = np.linspace(0.2, 5.0, 101)
        np.testing.assert_allclose(capillary_mu(rho, params, 1) ** 2, rho * capillarity_k(rho, params), rtol=1e-13)

    def test_scaled_lame_mode(self):
        params = Params(s=1.0, lame_mode=LameMode(kind=LameKind.SCALED, alpha=0.5))
        mu_l, lam_l = lame_coefficients(2.0, params)
        assert mu_l == pytest.approx(2.0)
        assert lam_l == pytest.approx(4.0)


class TestRelativeQuantities:
    def test_diagonal_is_exactly_zero(self, bump_params):
        rho = np.linspace(1.0, 3.0, 21)
        h_gamma, h_e = rel_enthalpy(rho, rho, bump_params)
        assert np.all(h_gamma == 0.0) and np.all(h_e == 0.0)
        assert np.all(rel_pressure(rho, rho, bump_params) == 0.0)

    def test_quadratic_examples(self):
        params = Params(gamma=2.0)
        h_gamma, h_e = rel_enthalpy(3.0, 1.0, params)
        assert h_gamma == pytest.approx(4.0)
        assert h_e == 0.0
        assert rel_pressure(3.0, 1.0, params) == pytest.approx(4.0)

    @pytest.mark.parametrize("gamma", [1.4, 2.0, 3.0])
    def test_pressure_split_residual_vanishes(self, gamma):
        params = Params(gamma=gamma, bump=BumpSpec(amplitude=0.7, center=1.2, halfwidth=0.4))
        rng = np.random.default_rng(3)
        rho, rho_bar = rng.uniform(0.5, 2.0, (2, 2000))
        residual = rel_pressure_residual(rho, rho_bar, params)
        assert np.max(np.abs(residual)) < 1e-11

    def test_convex_part_nonnegative(self):
        rng = np.random.default_rng(1)
        rho, rho_bar = rng.uniform(0.5, 2.0, (2, 5000))
        h_gamma, _ = rel_enthalpy(rho, rho_bar, Params(gamma=1.4))
        assert np.min(h_gamma) >= -1e-14


class TestNonmonotone:
    def test_no_bump_is_monotone(self):
        assert check_nonmonotone(Params()) is None

    def test_threshold_separates_regimes(self):
        params = Params(gamma=2.0, bump=BumpSpec(amplitude=0.0, center=1.0, halfwidth=0.4))
        threshold = find_nonmonotone_threshold(params)
        assert threshold > 0

        above = params.with_updates(bump=BumpSpec(1.5 * threshold, 1.0, 0.4))
        below = params.with_updates(bump=BumpSpec(0.5 * threshold, 1.0, 0.4))
        interval = check_nonmonotone(above)
        assert interval is not None
        lo, hi = interval
        assert 0.6 <= lo <= hi <= 1.4
        assert check_nonmonotone(below) is None

    def test_requires_enough_samples(self, bump_params):
        with pytest.raises(ValueError):
            check_nonmonotone(bump_params, n_samples=10)


@pytest.mark.parametrize("gamma,s", [(2.0, -1.0), (2.0, 0.0), (3.0, 2.0)])
def test_identity_suite(gamma, s):
    params = Params(gamma=gamma, s=s, bump=BumpSpec(amplitude=0.5, center=1.2, halfwidth=0.4))
    residuals = identity_residuals(params, n_samples=20_000, seed=7)
    for key in ("pressure_enthalpy", "mu_prime_squared", "lambda_bd", "pressure_split"):
        assert residuals[key] < 1e-11, key
    assert residuals["h_gamma_min"] >= -1e-12

import json
import logging
import math

import numpy as np
import pandas as pd
import pytest

from config import BumpSpec, InitialProfile, Params, StudyConfig
from core.experiments import (
    apply_bump_threshold, assess_fit, bohm_convergence, equilibrium_report, error_term_report, friction_report,
    gronwall_rate, identity_report, initial_density, ledger_window_report, nonmonotone_report, refit_sweep,
    run_single, run_weakstrong_study, smooth_state,
)
from core.nsk_dynamics import drift_constraint_residual
from core.torus_grid import Grid
from utils.errors import PositivityError
from utils.progress_tracker import StudyStage
from utils.run_executor import ParallelRunExecutor

EPSILONS = [0.2, 0.1, 0.05]


class TestGronwallRate:
    def test_exponential_growth(self):
        times = np.linspace(0.0, 1.0, 11)
        assert gronwall_rate(times, 1e-6 * np.exp(0.7 * times)) == pytest.approx(0.7, rel=1e-10)

    def test_takes_the_worst_interval(self):
        assert gronwall_rate([0.0, 1.0, 2.0], [1.0, math.e**2, math.e**2]) == pytest.approx(2.0)

    def test_decay_is_negative(self):
        assert gronwall_rate([0.0, 1.0], [1.0, 0.5]) < 0

    @pytest.mark.parametrize("times,psi", [([0.0], [1.0]), ([0.0, 1.0], [0.0, 1.0])])
    def test_rejects_degenerate_input(self, times, psi):
        with pytest.raises(ValueError):
            gronwall_rate(times, psi)


class TestAssessFit:
    def test_inviscid_uses_slope(self):
        assessment = assess_fit(EPSILONS, [e**4 for e in EPSILONS], [0.0] * 3, 3.5, 3.0)
        assert assessment.passed
        assert assessment.fit.slope == pytest.approx(4.0)

    def test_slow_rate_fails(self):
        assessment = assess_fit(EPSILONS, [e**2 for e in EPSILONS], [0.0] * 3, 3.5, 3.0)
        assert not assessment.slope_ok
        assert not assessment.passed

    def test_slope_uses_sup_not_final_value(self):
        psi_sup = [1.18e-3, 1.03e-4, 5.7e-6]
        psi_final = [2.0e-4, 2.1e-6, 1.1e-7]
        assessment = assess_fit(EPSILONS, psi_sup, [0.0] * 3, 3.5, 3.0, psi_final=psi_final)
        assert assessment.fit.ys == psi_sup
        assert assessment.fit.slope == pytest.approx(3.85, abs=0.02)
        assert assessment.bound.ys == psi_final
        assert assessment.bound.slope > 5.0
        assert assessment.passed
        payload = assessment.to_payload()
        assert payload["ys"] == psi_sup
        assert payload["psi_final"] == psi_final

    def test_sup_slope_below_threshold_fails_even_if_final_is_steep(self):
        psi_sup = [e**3 for e in EPSILONS]
        psi_final = [e**5 for e in EPSILONS]
        assessment = assess_fit(EPSILONS, psi_sup, [0.0] * 3, 3.5, 3.0, psi_final=psi_final)
        assert not assessment.slope_ok
        assert not assessment.passed

    def test_viscous_exact_model(self):
        nus = [0.01] * 3
        psi = [5.0 * (e**4 + 0.01 * e) for e in EPSILONS]
        assessment = assess_fit(EPSILONS, psi, nus, 3.5, 3.0)
        assert assessment.slope_ok and assessment.bound_ok
        assert assessment.bound.ratio_spread == pytest.approx(1.0)
        assert assessment.bound.ratio_growth == pytest.approx(1.0)
        assert assessment.passed

    def test_viscous_bound_is_one_sided(self):
        # Ψ ∝ ε^4.22 은 νε 항보다 빨리 줄어 비율 폭은 크지만 상한은 균일
        nus = [0.01] * 3
        psi = [0.03 * e**4.22 for e in EPSILONS]
        assessment = assess_fit(EPSILONS, psi, nus, 3.5, 3.0)
        assert assessment.bound.ratio_spread > 3.0
        assert assessment.bound.ratio_growth == pytest.approx(1.0)
        assert assessment.bound_ok
        assert assessment.passed

    def test_viscous_bound_fails_when_ratio_grows(self):
        nus = [0.01] * 3
        psi = [1e-3 * e**0.5 for e in EPSILONS]
        assessment = assess_fit(EPSILONS, psi, nus, 3.5, 3.0)
        assert assessment.bound.ratio_growth > 3.0
        assert not assessment.bound_ok
        assert not assessment.passed

    def test_non_monotone_fails(self):
        assessment = assess_fit(EPSILONS, [1e-3, 2e-3, 1e-6], [0.0] * 3, 0.0, 3.0)
        assert not assessment.monotone
        assert not assessment.passed

    def test_order_of_input_does_not_matter(self):
        assessment = assess_fit(EPSILONS[::-1], [e**4 for e in EPSILONS[::-1]], [0.0] * 3, 3.5, 3.0)
        assert assessment.monotone
        assert assessment.fit.xs == EPSILONS


def test_refit_sweep_skips_failed_points(tmp_path):
    frame = pd.DataFrame({
        "epsilon": [0.2, 0.1, 0.05, 0.025],
        "nu": [0.0] * 4,
        "psi_sup": [2 * 0.2**4, 2 * 0.1**4, 2 * 0.05**4, float("nan")],
        "psi_final": [0.2**5, 0.1**5, 0.05**5, float("nan")],
        "status": ["ok", "ok", "ok", "failed"],
    })
    frame.to_csv(tmp_path / "sweep.csv", index=False)
    assessment = refit_sweep(tmp_path)
    assert assessment.passed
    payload = json.loads((tmp_path / "rate_fit.json").read_text(encoding="utf-8"))
    assert payload["slope"] == pytest.approx(4.0)
    assert payload["passed"] is True
    assert len(payload["xs"]) == 3
    assert payload["psi_final"] == pytest.approx([0.2**5, 0.1**5, 0.05**5])


def test_refit_sweep_without_sup_column(tmp_path):
    pd.DataFrame({"epsilon": EPSILONS, "psi_final": [e**4 for e in EPSILONS]}).to_csv(
        tmp_path / "sweep.csv", index=False)
    assert refit_sweep(tmp_path).fit.slope == pytest.approx(4.0)


class TestReports:
    def test_identity_report(self):
        params = Params(gamma=2.0, s=0.0, bump=BumpSpec(0.5, 2.0, 0.5))
        report = identity_report(params, n_samples=5000, seed=1)
        assert report.passed, report.violations

    def test_bohm_convergence(self):
        assert bohm_convergence(Params(s=0.0), [16, 32]).passed

    def test_nonmonotone_report(self):
        report = nonmonotone_report(Params(gamma=2.0, bump=BumpSpec(0.0, 2.0, 0.5)))
        assert report.passed
        assert report.constants["threshold"] > 0

    def test_error_term_report(self, grid64, smooth_rho, bump_params):
        report = error_term_report(smooth_rho, grid64, bump_params)
        assert report.passed
        assert report.constants["spread"] < 1.1

    def test_equilibrium_report(self, grid32):
        assert equilibrium_report(grid32, Params(bump=BumpSpec(0.5, 2.0, 0.5)), 2.0).passed

    def test_friction_report(self):
        report = friction_report(Params(epsilon=0.1), 2.0)
        assert report.passed
        assert len(report.details["relative_errors"]) == 3


class TestSetup:
    def test_initial_density(self, grid32):
        rho = initial_density(grid32, InitialProfile(mean=2.0, amplitude=0.3, mode=2))
        np.testing.assert_allclose(rho, 2.0 + 0.3 * np.sin(2 * grid32.nodes), atol=1e-15)

    def test_smooth_state_satisfies_constraint(self, grid64, smooth_rho, params):
        state = smooth_state(smooth_rho, grid64, params)
        assert np.all(state.m == 0.0)
        assert drift_constraint_residual(state, params) < 1e-14

    def test_smooth_state_checks_floor(self, grid32, params):
        with pytest.raises(PositivityError):
            smooth_state(np.full(32, 1e-5), grid32, params)

    def test_bump_threshold_factor(self):
        params = Params(gamma=2.0, bump=BumpSpec(0.0, 2.0, 0.5))
        assert apply_bump_threshold(params, None) is params
        scaled = apply_bump_threshold(params, 1.5)
        assert scaled.bump.amplitude > 0
        assert scaled.bump.center == 2.0


@pytest.mark.slow
@pytest.mark.parametrize("nu", [0.0, 0.05])
def test_ledger_window_at_relaxation_scale(nu):
    grid = Grid(64)
    params = Params(epsilon=0.1, nu=nu)
    report = ledger_window_report(2.0 + 0.3 * np.sin(grid.nodes), grid, params, t_end=0.5, cfl=0.3)
    assert report.details["window"] == pytest.approx(0.01)
    assert report.details["sample_spacing"] == pytest.approx(0.01 / 40)
    assert report.passed, report.max_residual


def test_ledger_window_is_capped_by_t_end():
    grid = Grid(32)
    params = Params(epsilon=0.5)
    report = ledger_window_report(2.0 + 0.1 * np.sin(grid.nodes), grid, params, t_end=0.02, cfl=0.3)
    assert report.details["window"] == pytest.approx(0.02)
    assert len(report.details["times"]) == 41 - 4


@pytest.mark.slow
def test_single_run_emits_lift_stage_and_gates_ledger(tmp_path, caplog):
    cfg = StudyConfig.load(None, {
        "mode": "single_run", "grid.n_points": 64, "t_end": 0.01, "sample_every": 0.005,
        "output_dir": str(tmp_path),
    })
    with caplog.at_level(logging.INFO):
        report = run_single(cfg)
    assert report.failure is None
    assert any(StudyStage.STRONG_LIFT.description in r.getMessage() for r in caplog.records)
    ledger = next(r for r in report.reports if r.name == "relative_entropy_ledger")
    assert ledger.details["sample_spacing"] == pytest.approx(0.01 / 40)
    assert ledger.passed
    assert report.passed == all(r.passed for r in report.reports)


@pytest.mark.slow
def test_weakstrong_study(tmp_path):
    cfg = StudyConfig.load(None, {
        "mode": "weakstrong", "grid.n_points": 32, "t_end": 0.05, "sample_every": 0.01,
        "weakstrong_cases": [[2.0, -1.0]], "output_dir": str(tmp_path),
    })
    report = run_weakstrong_study(cfg, ParallelRunExecutor(1, use_processes=False))
    assert report.failure is None
    (case,) = report.cases
    assert case.status == "ok"
    assert case.psi_zero_max <= case.psi_zero_bound
    assert math.isfinite(case.c_hat_delta) and math.isfinite(case.c_hat_half)
    # Ψ는 섭동의 제곱 규모라 δ와 δ/2의 Gronwall 상수는 거의 같다
    assert case.c_hat_delta == pytest.approx(case.c_hat_half, abs=0.01)
    assert case.zero_ok and case.c_hat_ok and case.bound_ok
    assert report.passed

    psi_delta = pd.read_csv(tmp_path / "cases" / "gamma_2_s_-1" / "delta" / "diagnostics.csv")["psi_gamma"]
    psi_half = pd.read_csv(tmp_path / "cases" / "gamma_2_s_-1" / "half_delta" / "diagnostics.csv")["psi_gamma"]
    np.testing.assert_allclose(psi_delta / psi_half, 4.0, rtol=1e-2)
    saved = json.loads((tmp_path / "weakstrong.json").read_text(encoding="utf-8"))
    assert saved["passed"] is True

"""
확산 극한 - 그래디언트 플로우 적분, 강해 리프트, 오차항
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sp_fft

from config import Params
from core.constitutive import capillarity_k, capillary_mu, enthalpy, pressure
from core.nsk_dynamics import (
    DEFAULT_CFL, State, _capillary_coefficient, drift_velocity, sample_schedule, stress_S1,
    stress_Tnu,
)
from core.torus_grid import Grid
from utils.errors import NSKError, PositivityError, ResolutionError, SimulationFailure

logger = logging.getLogger(__name__)

GF_SCHEMES = ("etd2", "ssp_rk3")

# φ 함수 윤곽 적분 점 수
_CONTOUR_POINTS = 32


@dataclass
class StrongLift:
    """강해 삼중쌍 (ρ̄, m̄, J̄)와 오차항 ē"""
    time: float
    rho_bar: np.ndarray
    m_bar: np.ndarray
    J_bar: np.ndarray
    e_bar: np.ndarray
    grid: Grid

    @property
    def u_bar(self) -> np.ndarray:
        return self.m_bar / self.rho_bar

    @property
    def v_bar(self) -> np.ndarray:
        return self.J_bar / self.rho_bar

    @classmethod
    def from_state(cls, state: State, params: Params) -> 'StrongLift':
        """매끄러운 NSK 해 자체를 기준으로 사용

        기준 해의 점성 응력은 운동량 원천으로 취급: ē = (1/ε)∂ₓt_ν(ρ̄, ū), ν = 0이면 ē = 0
        """
        grid = state.grid
        e_bar = grid.deriv(stress_Tnu(state.rho, state.m / state.rho, grid, params)) / params.epsilon
        return cls(time=state.time, rho_bar=state.rho.copy(), m_bar=state.m.copy(), J_bar=state.J.copy(),
                   e_bar=e_bar, grid=grid)


def _require_floor(rho_bar: np.ndarray, params: Params, time: Optional[float] = None):
    min_rho = float(np.min(rho_bar))
    if not min_rho >= params.rho_floor:
        raise PositivityError(f"ρ̄ 하한 위반: min={min_rho:.3e}", time=time, min_rho=min_rho)


def darcy_flux(rho_bar: np.ndarray, grid: Grid, params: Params) -> np.ndarray:
    """F(ρ̄) = −∂ₓp(ρ̄) + ∂ₓs₁(ρ̄), m̄ = εF"""
    _require_floor(rho_bar, params)
    v_bar = grid.dealias(drift_velocity(rho_bar, grid, params))
    s1 = stress_S1(rho_bar, v_bar, grid, params, dealias=True)
    return grid.deriv(s1 - grid.dealias(np.asarray(pressure(rho_bar, params))))


def gf_rhs(rho_bar: np.ndarray, grid: Grid, params: Params) -> np.ndarray:
    """ρ̄ₜ = −∂ₓF(ρ̄) = ∂ₓ(∂ₓp − ∂ₓs₁)"""
    return -grid.deriv(darcy_flux(rho_bar, grid, params))


def flux_derivative(rho_bar: np.ndarray, w: np.ndarray, grid: Grid, params: Params) -> np.ndarray:
    """F의 방향 도함수 DF(ρ̄)[w]"""
    D, A = grid.deriv, grid.dealias
    rho_bar = np.asarray(rho_bar, dtype=float)
    w = np.asarray(w, dtype=float)

    dp = np.asarray(pressure(rho_bar, params, 1))
    mu = np.asarray(capillary_mu(rho_bar, params))
    mu1 = np.asarray(capillary_mu(rho_bar, params, 1))
    mu2 = np.asarray(capillary_mu(rho_bar, params, 2))

    # v = ∂ₓμ/ρ, δv = ∂ₓ(μ′w)/ρ − ∂ₓμ·w/ρ²
    mu_x = D(mu)
    v = A(mu_x / rho_bar)
    dv = A(D(mu1 * w) / rho_bar - mu_x * w / rho_bar**2)

    # c = ρμ′, δc = (μ′ + ρμ″)w
    c = A(_capillary_coefficient(rho_bar, params))
    dc = A((mu1 + rho_bar * mu2) * w)
    ds1 = A(dc * D(v) + c * D(dv))
    return D(ds1 - A(dp * w))


def error_term(rho_bar: np.ndarray, grid: Grid, params: Params) -> np.ndarray:
    """ē = (1/ε)∂ₓ(m̄²/ρ̄) + ∂ₜm̄, ∂ₜm̄ = ε·DF(ρ̄)[gf_rhs(ρ̄)]"""
    eps = params.epsilon
    flux = darcy_flux(rho_bar, grid, params)
    convective = eps * grid.deriv(grid.dealias(flux * flux / rho_bar))
    dm_dt = eps * flux_derivative(rho_bar, -grid.deriv(flux), grid, params)
    return convective + dm_dt


def lift_strong(samples: Sequence[Tuple[float, np.ndarray]], grid: Grid, params: Params) -> List[StrongLift]:
    """그래디언트 플로우 샘플을 (ρ̄, m̄, J̄, ē)로 올림"""
    lifts = []
    for time, rho_bar in samples:
        _require_floor(rho_bar, params, time)
        flux = darcy_flux(rho_bar, grid, params)
        lifts.append(StrongLift(
            time=float(time),
            rho_bar=np.array(rho_bar, copy=True),
            m_bar=params.epsilon * flux,
            J_bar=grid.deriv(np.asarray(capillary_mu(rho_bar, params))),
            e_bar=error_term(rho_bar, grid, params),
            grid=grid,
        ))
    return lifts


def continuity_residual(lift: StrongLift, params: Params) -> float:
    """‖gf_rhs(ρ̄) + (1/ε)∂ₓm̄‖₂"""
    grid = lift.grid
    return grid.l2_norm(gf_rhs(lift.rho_bar, grid, params) + grid.deriv(lift.m_bar) / params.epsilon)


def gradient_flow_energy(rho_bar: np.ndarray, grid: Grid, params: Params) -> float:
    """E[ρ̄] = ∫h(ρ̄) + ½k(ρ̄)ρ̄ₓ²"""
    rho_x = grid.deriv(rho_bar)
    return grid.integrate(np.asarray(enthalpy(rho_bar, params))
                          + 0.5 * np.asarray(capillarity_k(rho_bar, params)) * rho_x**2)


# ---------------------------------------------------------------------------
# 시간 적분
# ---------------------------------------------------------------------------

def _linear_coefficients(rho_bar: np.ndarray, params: Params) -> Tuple[float, float]:
    """동결 선형부 L(κ) = −Bκ² − Aκ⁴ 의 (A, B)"""
    rho_k = np.asarray(capillarity_k(rho_bar, params)) * rho_bar
    a_coef = 0.5 * (float(rho_k.max()) + float(rho_k.min()))
    b_coef = float(pressure(float(np.mean(rho_bar)), params, 1))
    return a_coef, b_coef


def gf_stable_dt(rho_bar: np.ndarray, grid: Grid, params: Params, cfl: float = DEFAULT_CFL,
                 scheme: str = "etd2", max_dt: float = 1e-3) -> float:
    """그래디언트 플로우 시간 간격

    ssp_rk3: C/(κ_max⁴·max(kρ) + κ_max²·max|p′|)
    etd2:    C/(κ_c⁴·max|ρk − A| + κ_c³·R₃ + κ_c²·max|p′ − B|), 상한 max_dt
    """
    rho_k = np.asarray(capillarity_k(rho_bar, params)) * rho_bar
    dp = np.asarray(pressure(rho_bar, params, 1))
    if scheme == "ssp_rk3":
        kappa = grid.kappa_max
        return min(cfl / (kappa**4 * float(rho_k.max()) + kappa**2 * float(np.abs(dp).max())), max_dt)
    if scheme != "etd2":
        raise ValueError(f"알 수 없는 스킴: {scheme}")

    a_coef, b_coef = _linear_coefficients(rho_bar, params)
    kappa = grid.kappa_cutoff
    mu1 = np.asarray(capillary_mu(rho_bar, params, 1))
    mu2 = np.asarray(capillary_mu(rho_bar, params, 2))
    r3 = 4.0 * float(np.abs(grid.deriv(rho_bar)).max()) * float(np.max(np.abs(mu1 * mu2) + mu1**2 / rho_bar))
    stiffness = kappa**4 * float(np.abs(rho_k - a_coef).max()) + kappa**3 * r3 \
        + kappa**2 * float(np.abs(dp - b_coef).max())
    if stiffness == 0.0:
        return max_dt
    return min(cfl / stiffness, max_dt)


def _phi_functions(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """e^z, φ₁(z) = (e^z−1)/z, φ₂(z) = (e^z−1−z)/z² (윤곽 평균)"""
    roots = np.exp(1j * np.pi * (np.arange(1, _CONTOUR_POINTS + 1) - 0.5) / _CONTOUR_POINTS)
    r = z[:, None] + roots[None, :]
    e_r = np.exp(r)
    phi1 = np.real(np.mean((e_r - 1.0) / r, axis=1))
    phi2 = np.real(np.mean((e_r - 1.0 - r) / r**2, axis=1))
    return np.exp(z), phi1, phi2


class GradientFlowIntegrator:
    """동결 선형부 ETD2RK 또는 명시적 SSP-RK3

    ρ̂ 평균 모드는 갱신하지 않으므로 질량이 정확히 보존된다.
    """

    def __init__(self, grid: Grid, params: Params, scheme: str = "etd2"):
        if scheme not in GF_SCHEMES:
            raise ValueError(f"gf_scheme은 {GF_SCHEMES} 중 하나")
        self.grid = grid
        self.params = params
        self.scheme = scheme
        self._phi_key: Optional[Tuple[float, float, float]] = None
        self._phi: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None
        self._linear: Optional[np.ndarray] = None

    def _nonlinear_hat(self, rho_hat: np.ndarray, linear: np.ndarray) -> np.ndarray:
        rho = sp_fft.irfft(rho_hat, n=self.grid.n_points)
        _require_floor(rho, self.params)
        n_hat = sp_fft.rfft(gf_rhs(rho, self.grid, self.params)) - linear * rho_hat
        n_hat[0] = 0.0
        return n_hat

    def _etd2_step(self, rho_hat: np.ndarray, dt: float, a_coef: float, b_coef: float) -> np.ndarray:
        key = (dt, a_coef, b_coef)
        if key != self._phi_key:
            kappa = self.grid.rfft_wavenumbers
            self._linear = -(b_coef * kappa**2 + a_coef * kappa**4)
            self._phi = _phi_functions(self._linear * dt)
            self._phi_key = key
        ehl, phi1, phi2 = self._phi
        linear = self._linear

        n_now = self._nonlinear_hat(rho_hat, linear)
        predictor = ehl * rho_hat + dt * phi1 * n_now
        predictor[0] = rho_hat[0]
        n_pred = self._nonlinear_hat(predictor, linear)
        result = predictor + dt * phi2 * (n_pred - n_now)
        result[0] = rho_hat[0]
        return result

    def _rk3_step(self, rho: np.ndarray, dt: float) -> np.ndarray:
        grid, params = self.grid, self.params
        u1 = rho + dt * gf_rhs(rho, grid, params)
        u2 = 0.75 * rho + 0.25 * (u1 + dt * gf_rhs(u1, grid, params))
        return rho / 3.0 + 2.0 / 3.0 * (u2 + dt * gf_rhs(u2, grid, params))

    def advance(self, rho: np.ndarray, t0: float, t1: float, cfl: float, max_dt: float) -> Tuple[np.ndarray, int]:
        """t0 → t1 적분, (ρ̄(t1), 스텝 수) 반환"""
        time = t0
        steps = 0
        rho_hat = sp_fft.rfft(rho)
        while time < t1:
            rho = sp_fft.irfft(rho_hat, n=self.grid.n_points) if self.scheme == "etd2" else rho
            remaining = t1 - time
            dt = gf_stable_dt(rho, self.grid, self.params, cfl, self.scheme, max_dt)
            if dt >= remaining:
                dt = remaining
            if self.scheme == "etd2":
                # 같은 dt가 반복되도록 계수를 유효숫자 6자리로 고정
                a_coef, b_coef = (float(f"{c:.6g}") for c in _linear_coefficients(rho, self.params))
                rho_hat = self._etd2_step(rho_hat, dt, a_coef, b_coef)
            else:
                rho = self._rk3_step(rho, dt)
            time = t1 if dt == remaining else time + dt
            steps += 1
        if self.scheme == "etd2":
            rho = sp_fft.irfft(rho_hat, n=self.grid.n_points)
        return rho, steps


def solve_gradient_flow(rho0: np.ndarray, t_end: float, grid: Grid, params: Params,
                        sample_every: Optional[float] = None, cfl: float = DEFAULT_CFL,
                        scheme: str = "etd2", max_dt: float = 1e-3, t0: float = 0.0,
                        check_resolution: bool = True,
                        tail_tolerance: float = 1e-10) -> List[Tuple[float, np.ndarray]]:
    """ρ̄ₜ = gf_rhs(ρ̄) 를 적분하고 샘플 시각의 (t, ρ̄) 목록 반환

    check_resolution이면 샘플마다 l > N/4 스펙트럼 꼬리 < tail_tolerance 확인.
    """
    rho = np.array(rho0, dtype=float, copy=True)
    _require_floor(rho, params, t0)
    times = sample_schedule(t0, t_end, sample_every if sample_every is not None else t_end - t0)

    integrator = GradientFlowIntegrator(grid, params, scheme)
    samples = [(float(times[0]), rho.copy())]
    total_steps = 0
    for t_prev, t_next in zip(times[:-1], times[1:]):
        try:
            rho, steps = integrator.advance(rho, float(t_prev), float(t_next), cfl, max_dt)
        except NSKError as e:
            raise SimulationFailure(f"그래디언트 플로우 실패: {e}", time=float(t_prev)) from e
        total_steps += steps
        if not np.all(np.isfinite(rho)):
            raise SimulationFailure("그래디언트 플로우 발산", time=float(t_next))
        _require_floor(rho, params, float(t_next))
        if check_resolution:
            tail = grid.spectral_tail(rho)
            if not tail < tail_tolerance:
                raise ResolutionError(
                    f"ρ̄ 해상도 부족: tail={tail:.2e} ≥ {tail_tolerance:.0e} (t={t_next:.4g}, N={grid.n_points})",
                    tail_ratio=tail,
                )
        samples.append((float(t_next), rho.copy()))

    logger.info(f"🌊 그래디언트 플로우 완료: N={grid.n_points}, T={t_end}, steps={total_steps}, scheme={scheme}")
    return samples

"""
NSK 완화 시스템 - 우변 조립과 시간 적분 (마찰 정확 분할 + SSP-RK3)
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np

from config import Params, S2Scaling
from core.constitutive import (
    capillarity_k, capillary_mu, lambda_bd, lame_coefficients, pressure,
)
from core.entropy_diag import DiagRecord, dissipation_rates, make_diag_record
from core.torus_grid import Field, Grid
from utils.errors import (
    AlignmentError, CFLViolation, NonFiniteError, NSKError, PositivityError, SimulationFailure,
)

if TYPE_CHECKING:
    from core.darcy_limit import StrongLift

logger = logging.getLogger(__name__)

DEFAULT_CFL = 0.3

Rhs = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class State:
    """증강 삼중쌍 (ρ, m, J)"""
    time: float
    rho: np.ndarray
    m: np.ndarray
    J: np.ndarray
    grid: Grid

    def __post_init__(self):
        shape = (self.grid.n_points,)
        for name in ("rho", "m", "J"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.shape != shape:
                raise AlignmentError(f"State.{name} 길이 {values.shape} ≠ {shape}")
            setattr(self, name, values)

    @property
    def u(self) -> np.ndarray:
        return self.m / self.rho

    @property
    def v(self) -> np.ndarray:
        return self.J / self.rho

    def validate(self, params: Params) -> 'State':
        min_rho = float(self.rho.min())
        if not min_rho >= params.rho_floor:
            raise PositivityError(
                f"밀도 하한 위반: min ρ = {min_rho:.3e} < {params.rho_floor:.3e}",
                time=self.time, min_rho=min_rho,
            )
        return self

    def field(self, name: str) -> Field:
        values = {"rho": self.rho, "m": self.m, "J": self.J, "u": self.u, "v": self.v}[name]
        return Field(self.grid, values, name=name, positive=(name == "rho"), time=self.time)

    def replace(self, **changes) -> 'State':
        return dataclasses.replace(self, **changes)


@dataclass
class Trajectory:
    """샘플 시각별 스냅샷과 진단"""
    params: Params
    grid: Grid
    snapshots: List[State] = field(default_factory=list)
    diagnostics: List[DiagRecord] = field(default_factory=list)
    kind: str = "relaxation"
    dt_max: float = 0.0
    n_steps: int = 0

    @property
    def times(self) -> List[float]:
        return [s.time for s in self.snapshots]

    def append(self, state: State, record: DiagRecord):
        if self.snapshots and not state.time > self.snapshots[-1].time:
            raise AlignmentError(f"스냅샷 시각은 엄격히 증가해야 함 ({state.time} ≤ {self.snapshots[-1].time})")
        self.snapshots.append(state)
        self.diagnostics.append(record)


def drift_velocity(rho: np.ndarray, grid: Grid, params: Params) -> np.ndarray:
    """v = ∂ₓμ(ρ)/ρ"""
    rho = np.asarray(rho, dtype=float)
    _require_floor(rho, params)
    return grid.deriv(np.asarray(capillary_mu(rho, params))) / rho


def drift_velocity_residual(rho: np.ndarray, grid: Grid, params: Params) -> float:
    """‖∂ₓμ(ρ)/ρ − √(k/ρ)·∂ₓρ‖₂"""
    rho = np.asarray(rho, dtype=float)
    alternative = np.sqrt(np.asarray(capillarity_k(rho, params)) / rho) * grid.deriv(rho)
    return grid.l2_norm(drift_velocity(rho, grid, params) - alternative)


def drift_constraint_residual(state: State, params: Params) -> float:
    """‖J − ∂ₓμ(ρ)‖₂"""
    return state.grid.l2_norm(state.J - state.grid.deriv(np.asarray(capillary_mu(state.rho, params))))


def _capillary_coefficient(rho: np.ndarray, params: Params) -> np.ndarray:
    # μ + λ/2 = ρμ′
    return np.asarray(capillary_mu(rho, params)) + 0.5 * np.asarray(lambda_bd(rho, params))


def stress_S1(rho: np.ndarray, v: np.ndarray, grid: Grid, params: Params, dealias: bool = False) -> np.ndarray:
    """s₁ = (μ + λ/2)∂ₓv"""
    coefficient = _capillary_coefficient(np.asarray(rho, dtype=float), params)
    if dealias:
        coefficient = grid.dealias(coefficient)
        return grid.dealias(coefficient * grid.deriv(v))
    return coefficient * grid.deriv(v)


def stress_S2(rho: np.ndarray, u: np.ndarray, grid: Grid, params: Params, dealias: bool = False) -> np.ndarray:
    """s₂ = (μ + λ/2)∂ₓu"""
    return stress_S1(rho, u, grid, params, dealias=dealias)


def viscous_coefficient(rho: np.ndarray, params: Params) -> np.ndarray:
    """ν(2μ_L + λ_L)"""
    mu_l, lam_l = lame_coefficients(rho, params)
    return params.nu * (2.0 * np.asarray(mu_l) + np.asarray(lam_l))


def stress_Tnu(rho: np.ndarray, u: np.ndarray, grid: Grid, params: Params, dealias: bool = False) -> np.ndarray:
    """t_ν = ν(2μ_L + λ_L)∂ₓu"""
    if params.nu == 0.0:
        return np.zeros(grid.n_points)
    coefficient = viscous_coefficient(np.asarray(rho, dtype=float), params)
    if dealias:
        return grid.dealias(grid.dealias(coefficient) * grid.deriv(u))
    return coefficient * grid.deriv(u)


def bohm_residual(rho: np.ndarray, grid: Grid, params: Params) -> float:
    """‖∂ₓ((μ+λ/2)∂ₓv) − ρ∂ₓ(kρ_xx + ½k′ρ_x²)‖₂"""
    rho = np.asarray(rho, dtype=float)
    v = drift_velocity(rho, grid, params)
    lhs = grid.deriv(stress_S1(rho, v, grid, params))

    rho_x = grid.deriv(rho, 1)
    rho_xx = grid.deriv(rho, 2)
    k = np.asarray(capillarity_k(rho, params))
    dk = np.asarray(capillarity_k(rho, params, 1))
    rhs = rho * grid.deriv(k * rho_xx + 0.5 * dk * rho_x**2)
    return grid.l2_norm(lhs - rhs)


def rhs_scaled(state: State, params: Params) -> Rhs:
    """마찰을 제외한 스케일 시스템 우변 (d_rho, d_m, d_J)"""
    grid = state.grid
    rho, m, J = state.rho, state.m, state.J
    if not np.all(rho > 0):
        raise PositivityError("rhs_scaled: 양수가 아닌 밀도", time=state.time, min_rho=float(rho.min()))

    D, A = grid.deriv, grid.dealias
    inv_eps = 1.0 / params.epsilon

    u = A(m / rho)
    v = A(J / rho)
    u_x = D(u)
    v_x = D(v)

    coefficient = A(_capillary_coefficient(rho, params))
    s1 = A(coefficient * v_x)
    s2 = A(coefficient * u_x)

    momentum_flux = A(m * u) + A(np.asarray(pressure(rho, params))) - s1
    if params.nu > 0.0:
        momentum_flux = momentum_flux - A(A(viscous_coefficient(rho, params)) * u_x)

    d_rho = -inv_eps * D(m)
    d_m = -inv_eps * D(momentum_flux)
    s2_factor = inv_eps if params.s2_scaling == S2Scaling.INV_EPSILON else 1.0
    d_J = -inv_eps * D(A(J * u)) - s2_factor * D(s2)

    if not (np.all(np.isfinite(d_m)) and np.all(np.isfinite(d_J))):
        raise NonFiniteError(f"rhs_scaled: 비유한 우변 (t={state.time:.6g})")
    return d_rho, d_m, d_J


def apply_friction(state: State, dt: float, params: Params) -> State:
    """마찰 부분 흐름의 정확해 m ← m·exp(−dt/ε²)"""
    if not params.friction:
        return state
    return state.replace(m=state.m * math.exp(-dt / params.epsilon**2))


def ssp_rk3_step(state: State, dt: float, params: Params) -> State:
    """Shu–Osher 형태 SSP-RK3 한 스텝"""
    def stage(base: State, k: Rhs, weight_base: float, prev: State) -> State:
        # weight_base·base + (1−weight_base)·(prev + dt·k)
        w = 1.0 - weight_base
        return base.replace(
            rho=weight_base * base.rho + w * (prev.rho + dt * k[0]),
            m=weight_base * base.m + w * (prev.m + dt * k[1]),
            J=weight_base * base.J + w * (prev.J + dt * k[2]),
        )

    u1 = stage(state, rhs_scaled(state, params), 0.0, state)
    u2 = stage(state, rhs_scaled(u1, params), 0.75, u1)
    u3 = stage(state, rhs_scaled(u2, params), 1.0 / 3.0, u2)
    return u3.replace(time=state.time + dt)


def stable_dt(state: State, params: Params, cfl: float = DEFAULT_CFL) -> float:
    """스케일 시간 기준 CFL 한계: C·min(이류, 점성, 분산)"""
    grid = state.grid
    rho = state.rho
    eps = params.epsilon

    u_max = float(np.max(np.abs(state.m / rho)))
    c_max = math.sqrt(max(float(np.max(np.asarray(pressure(rho, params, 1)))), 0.0))
    limits = []
    if u_max + c_max > 0:
        limits.append(eps * grid.dx / (u_max + c_max))
    if params.nu > 0:
        visc_max = float(np.max(viscous_coefficient(rho, params)))
        if visc_max > 0:
            limits.append(eps * grid.dx**2 / (visc_max / float(rho.min())))
    # ω = μ′(ρ)κ²/ε
    dispersive = grid.kappa_max**2 * float(np.max(np.asarray(capillary_mu(rho, params, 1))))
    limits.append(eps / dispersive)
    return cfl * min(limits)


def step(state: State, dt: float, params: Params, enforce_cfl: bool = True) -> State:
    """Strang 분할: 마찰 반스텝 → SSP-RK3 → 마찰 반스텝"""
    if not dt > 0:
        raise ValueError(f"dt > 0 필요 (dt={dt})")
    if enforce_cfl:
        limit = stable_dt(state, params, cfl=1.0)
        if dt > limit * (1.0 + 1e-9):
            raise CFLViolation(f"dt={dt:.3e} > 안정 한계 {limit:.3e}", dt=dt, limit=limit)
    half = 0.5 * dt
    new_state = apply_friction(state, half, params)
    new_state = ssp_rk3_step(new_state, dt, params)
    new_state = apply_friction(new_state, half, params)
    return new_state.validate(params)


def sample_schedule(t0: float, t_end: float, sample_every: float) -> np.ndarray:
    """t0부터 sample_every 간격, 마지막은 정확히 t_end"""
    if not t_end > t0:
        raise ValueError(f"t_end > t0 필요 ({t_end} ≤ {t0})")
    if not sample_every > 0:
        raise ValueError("sample_every > 0 필요")
    span = t_end - t0
    n = int(math.floor(span / sample_every + 1e-9))
    times = t0 + sample_every * np.arange(n + 1)
    if span - n * sample_every > 1e-9 * max(1.0, span):
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def well_prepared_state(lift: 'StrongLift', params: Params) -> State:
    """ρ(0) = ρ̄(0), m(0) = m̄(0), J(0) = ∂ₓμ(ρ(0))"""
    grid = lift.grid
    rho = np.array(lift.rho_bar, copy=True)
    J = grid.deriv(np.asarray(capillary_mu(rho, params)))
    return State(time=lift.time, rho=rho, m=np.array(lift.m_bar, copy=True), J=J, grid=grid).validate(params)


def simulate(init: State, t_end: float, params: Params, sample_every: float,
             cfl: float = DEFAULT_CFL, reference: Optional[Sequence['StrongLift']] = None,
             max_steps: Optional[int] = None) -> Trajectory:
    """적응 dt로 t_end까지 적분하고 샘플 시각마다 진단 기록

    reference가 주어지면 샘플 시각과 정렬된 강해 리프트로 Ψ_γ 등을 채운다.
    """
    init.validate(params)
    times = sample_schedule(init.time, t_end, sample_every)
    if reference is not None:
        if len(reference) != len(times):
            raise AlignmentError(f"reference 길이 {len(reference)} ≠ 샘플 수 {len(times)}")

    def lift_at(i: int):
        return None if reference is None else reference[i]

    trajectory = Trajectory(params=params, grid=init.grid)
    friction_total = 0.0
    viscous_total = 0.0
    trajectory.append(init, make_diag_record(init, params, friction_total, viscous_total, lift_at(0)))

    state = init
    rates = dissipation_rates(state, params)
    for index, t_target in enumerate(times[1:], start=1):
        while state.time < t_target:
            remaining = float(t_target - state.time)
            dt = stable_dt(state, params, cfl)
            landing = dt >= remaining
            if landing:
                dt = remaining
            try:
                new_state = step(state, dt, params)
            except NSKError as e:
                raise SimulationFailure(f"스텝 실패: {e}", time=state.time) from e
            if landing:
                new_state = new_state.replace(time=float(t_target))

            new_rates = dissipation_rates(new_state, params)
            friction_total += 0.5 * dt * (rates.friction + new_rates.friction)
            viscous_total += 0.5 * dt * (rates.viscous + new_rates.viscous)
            rates = new_rates
            state = new_state

            trajectory.n_steps += 1
            trajectory.dt_max = max(trajectory.dt_max, dt)
            if max_steps is not None and trajectory.n_steps > max_steps:
                raise SimulationFailure(f"최대 스텝 수 {max_steps} 초과", time=state.time)

        record = make_diag_record(state, params, friction_total, viscous_total, lift_at(index))
        trajectory.append(state, record)
        logger.debug(f"t={state.time:.4f} steps={trajectory.n_steps} E={record.energy:.10g} Ψ={record.psi_gamma:.3e}")

    logger.info(f"✅ 시뮬레이션 완료: ε={params.epsilon}, ν={params.nu}, N={init.grid.n_points}, "
                f"steps={trajectory.n_steps}, dt_max={trajectory.dt_max:.3e}")
    return trajectory


def _require_floor(rho: np.ndarray, params: Params):
    min_rho = float(np.min(rho))
    if not min_rho >= params.rho_floor:
        raise PositivityError(f"밀도 하한 위반: min ρ = {min_rho:.3e}", min_rho=min_rho)

"""
구성 법칙 - 압력, 엔탈피, 모세관 계수, BD 계수와 상대량
"""

import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np

from config import BumpSpec, LameKind, Params
from utils.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# q = 1 − z² 가 이보다 작으면 e와 도함수는 0으로 처리 (exp(−1/q) < 1e−200)
_Q_MIN = 2e-3


def _as_array(rho: ArrayLike) -> np.ndarray:
    return np.asarray(rho, dtype=float)


def _restore(values: np.ndarray) -> ArrayLike:
    return float(values) if values.ndim == 0 else values


def _require_positive(rho: np.ndarray, what: str):
    if np.any(~(rho > 0)):
        raise DomainError(f"{what}: 밀도는 양수여야 함 (min={np.min(rho):.3e})")


def bump_e(rho: ArrayLike, spec: BumpSpec, order: int = 0) -> ArrayLike:
    """범프 e(ρ) = A·exp(−1/(1−z²)), z = (ρ−ρ_c)/w 의 order차 도함수

    지지 구간 밖에서는 모든 차수가 0이다.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order는 0..3 (order={order})")
    rho = _as_array(rho)
    if spec.amplitude == 0.0:
        return _restore(np.zeros_like(rho))

    z = (rho - spec.center) / spec.halfwidth
    q = 1.0 - z * z
    inside = q > _Q_MIN
    q = np.where(inside, q, 1.0)
    z = np.where(inside, z, 0.0)

    g = np.exp(-1.0 / q)
    if order == 0:
        d = g
    else:
        phi1 = -2.0 * z / q**2
        if order == 1:
            d = g * phi1
        else:
            phi2 = -2.0 / q**2 - 8.0 * z**2 / q**3
            if order == 2:
                d = g * (phi1**2 + phi2)
            else:
                phi3 = -24.0 * z / q**3 - 48.0 * z**3 / q**4
                d = g * (phi1**3 + 3.0 * phi1 * phi2 + phi3)

    values = np.where(inside, spec.amplitude * d / spec.halfwidth**order, 0.0)
    return _restore(values)


def enthalpy(rho: ArrayLike, params: Params, order: int = 0) -> ArrayLike:
    """h(ρ) = ρ^γ/(γ−1) + e(ρ)"""
    rho = _as_array(rho)
    _require_positive(rho, "enthalpy")
    g = params.gamma
    if order == 0:
        power = rho**g / (g - 1.0)
    elif order == 1:
        power = g * rho ** (g - 1.0) / (g - 1.0)
    elif order == 2:
        power = g * rho ** (g - 2.0)
    else:
        raise ValueError(f"order는 0..2 (order={order})")
    return _restore(power + _as_array(bump_e(rho, params.bump, order)))


def enthalpy_gamma(rho: ArrayLike, params: Params, order: int = 0) -> ArrayLike:
    """볼록 부분 h_γ(ρ) = ρ^γ/(γ−1)"""
    rho = _as_array(rho)
    _require_positive(rho, "enthalpy_gamma")
    g = params.gamma
    if order == 0:
        return _restore(rho**g / (g - 1.0))
    if order == 1:
        return _restore(g * rho ** (g - 1.0) / (g - 1.0))
    if order == 2:
        return _restore(g * rho ** (g - 2.0))
    raise ValueError(f"order는 0..2 (order={order})")


def pressure(rho: ArrayLike, params: Params, order: int = 0) -> ArrayLike:
    """p(ρ) = ρh′ − h = ρ^γ + ρe′ − e"""
    rho = _as_array(rho)
    _require_positive(rho, "pressure")
    g, bump = params.gamma, params.bump
    if order == 0:
        value = rho**g + rho * _as_array(bump_e(rho, bump, 1)) - _as_array(bump_e(rho, bump, 0))
    elif order == 1:
        # p′ = ρh″
        value = g * rho ** (g - 1.0) + rho * _as_array(bump_e(rho, bump, 2))
    elif order == 2:
        value = g * (g - 1.0) * rho ** (g - 2.0) + _as_array(bump_e(rho, bump, 2)) \
            + rho * _as_array(bump_e(rho, bump, 3))
    else:
        raise ValueError(f"order는 0..2 (order={order})")
    return _restore(value)


def pressure_split(rho: ArrayLike, params: Params) -> Tuple[ArrayLike, ArrayLike]:
    """(p_γ, p_e) = (ρ^γ, ρe′ − e)"""
    rho = _as_array(rho)
    _require_positive(rho, "pressure_split")
    p_gamma = rho**params.gamma
    p_e = rho * _as_array(bump_e(rho, params.bump, 1)) - _as_array(bump_e(rho, params.bump, 0))
    return _restore(p_gamma), _restore(p_e)


def capillarity_k(rho: ArrayLike, params: Params, order: int = 0) -> ArrayLike:
    """k(ρ) = ((s+3)²/4)·ρ^s"""
    rho = _as_array(rho)
    _require_positive(rho, "capillarity_k")
    s = params.s
    c = (s + 3.0) ** 2 / 4.0
    if order == 0:
        return _restore(c * rho**s)
    if order == 1:
        return _restore(c * s * rho ** (s - 1.0))
    raise ValueError(f"order는 0..1 (order={order})")


def capillary_mu(rho: ArrayLike, params: Params, order: int = 0) -> ArrayLike:
    """μ(ρ) = ρ^{(s+3)/2}, μ′ = √(ρk)"""
    rho = _as_array(rho)
    _require_positive(rho, "capillary_mu")
    a = params.mu_exponent
    if order == 0:
        return _restore(rho**a)
    if order == 1:
        return _restore(a * rho ** (a - 1.0))
    if order == 2:
        return _restore(a * (a - 1.0) * rho ** (a - 2.0))
    raise ValueError(f"order는 0..2 (order={order})")


def lambda_bd(rho: ArrayLike, params: Params) -> ArrayLike:
    """λ(ρ) = 2(μ′ρ − μ) = (s+1)μ"""
    rho = _as_array(rho)
    _require_positive(rho, "lambda_bd")
    return _restore((params.s + 1.0) * rho**params.mu_exponent)


def lame_coefficients(rho: ArrayLike, params: Params) -> Tuple[ArrayLike, ArrayLike]:
    """점성 라메 계수 (μ_L, λ_L)"""
    mu = _as_array(capillary_mu(rho, params))
    lam = _as_array(lambda_bd(rho, params))
    if params.lame_mode.kind == LameKind.SCALED:
        alpha = params.lame_mode.alpha
        return _restore(alpha * mu), _restore(alpha * lam)
    return _restore(mu), _restore(lam)


def _relative(f0: np.ndarray, f0_bar: np.ndarray, f1_bar: np.ndarray, rho: np.ndarray, rho_bar: np.ndarray) -> np.ndarray:
    return f0 - f0_bar - f1_bar * (rho - rho_bar)


def rel_enthalpy(rho: ArrayLike, rho_bar: ArrayLike, params: Params) -> Tuple[ArrayLike, ArrayLike]:
    """(h_γ(ρ|ρ̄), h_e(ρ|ρ̄))"""
    rho, rho_bar = _as_array(rho), _as_array(rho_bar)
    _require_positive(rho, "rel_enthalpy")
    _require_positive(rho_bar, "rel_enthalpy")
    h_gamma = _relative(
        _as_array(enthalpy_gamma(rho, params)),
        _as_array(enthalpy_gamma(rho_bar, params)),
        _as_array(enthalpy_gamma(rho_bar, params, 1)),
        rho, rho_bar,
    )
    h_e = _relative(
        _as_array(bump_e(rho, params.bump, 0)),
        _as_array(bump_e(rho_bar, params.bump, 0)),
        _as_array(bump_e(rho_bar, params.bump, 1)),
        rho, rho_bar,
    )
    # 대각선에서는 정확히 0
    h_gamma = np.where(rho == rho_bar, 0.0, h_gamma)
    h_e = np.where(rho == rho_bar, 0.0, h_e)
    return _restore(h_gamma), _restore(h_e)


def rel_pressure(rho: ArrayLike, rho_bar: ArrayLike, params: Params) -> ArrayLike:
    """p(ρ|ρ̄) = p(ρ) − p(ρ̄) − p′(ρ̄)(ρ−ρ̄)"""
    rho, rho_bar = _as_array(rho), _as_array(rho_bar)
    value = _relative(
        _as_array(pressure(rho, params)),
        _as_array(pressure(rho_bar, params)),
        _as_array(pressure(rho_bar, params, 1)),
        rho, rho_bar,
    )
    return _restore(np.where(rho == rho_bar, 0.0, value))


def rel_pressure_e(rho: ArrayLike, rho_bar: ArrayLike, params: Params) -> ArrayLike:
    """p_e(ρ|ρ̄), p_e′ = ρe″"""
    rho, rho_bar = _as_array(rho), _as_array(rho_bar)
    _, pe = pressure_split(rho, params)
    _, pe_bar = pressure_split(rho_bar, params)
    dpe_bar = rho_bar * _as_array(bump_e(rho_bar, params.bump, 2))
    value = _relative(_as_array(pe), _as_array(pe_bar), dpe_bar, rho, rho_bar)
    return _restore(np.where(rho == rho_bar, 0.0, value))


def rel_pressure_residual(rho: ArrayLike, rho_bar: ArrayLike, params: Params) -> ArrayLike:
    """p(ρ|ρ̄) − (γ−1)h_γ(ρ|ρ̄) − p_e(ρ|ρ̄)"""
    h_gamma, _ = rel_enthalpy(rho, rho_bar, params)
    residual = _as_array(rel_pressure(rho, rho_bar, params)) \
        - (params.gamma - 1.0) * _as_array(h_gamma) \
        - _as_array(rel_pressure_e(rho, rho_bar, params))
    return _restore(residual)


def check_nonmonotone(params: Params, n_samples: int = 2000) -> Optional[Tuple[float, float]]:
    """범프 지지 구간에서 p′ < 0 인 가장 긴 구간 반환 (없으면 None)"""
    if n_samples < 100:
        raise ValueError("n_samples ≥ 100 필요")
    bump = params.bump
    if bump.amplitude == 0.0:
        return None
    lo = max(bump.center - bump.halfwidth, np.finfo(float).tiny)
    rho = np.linspace(lo, bump.center + bump.halfwidth, n_samples)
    negative = _as_array(pressure(rho, params, 1)) < 0
    if not negative.any():
        return None

    # 가장 긴 연속 구간
    edges = np.diff(np.concatenate(([0], negative.astype(int), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    longest = int(np.argmax(stops - starts))
    return float(rho[starts[longest]]), float(rho[stops[longest]])


def find_nonmonotone_threshold(params: Params, n_samples: int = 2000, rel_tol: float = 1e-8) -> float:
    """p′가 처음 음수가 되는 범프 진폭 A* (p′ 샘플러 기준 이분법)"""
    def nonmonotone(amplitude: float) -> bool:
        trial = params.with_updates(bump=BumpSpec(amplitude, params.bump.center, params.bump.halfwidth))
        return check_nonmonotone(trial, n_samples) is not None

    lo, hi = 0.0, 1.0
    for _ in range(200):
        if nonmonotone(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise DomainError("비단조 임계 진폭을 찾지 못함")

    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if nonmonotone(mid):
            hi = mid
        else:
            lo = mid
    logger.info(f"📐 비단조 임계 진폭 A* ≈ {hi:.6g} (ρ_c={params.bump.center}, w={params.bump.halfwidth})")
    return hi


def identity_residuals(params: Params, n_samples: int = 100_000, seed: int = 0,
                       box: Tuple[float, float] = (0.5, 2.0)) -> Dict[str, float]:
    """항등식 스위트의 최대 상대 잔차

    p = ρh′ − h, μ′² = ρk, λ = 2(μ′ρ − μ), p(ρ|ρ̄) 분해 및 h_γ(ρ|ρ̄) ≥ 0 최솟값.
    """
    rng = np.random.default_rng(seed)
    rho = rng.uniform(box[0], box[1], n_samples)
    rho_bar = rng.uniform(box[0], box[1], n_samples)
    tiny = np.finfo(float).tiny

    p = _as_array(pressure(rho, params))
    h0 = _as_array(enthalpy(rho, params))
    h1 = _as_array(enthalpy(rho, params, 1))
    scale_p = np.abs(rho * h1) + np.abs(h0) + tiny

    mu0 = _as_array(capillary_mu(rho, params))
    mu1 = _as_array(capillary_mu(rho, params, 1))
    rho_k = rho * _as_array(capillarity_k(rho, params))
    lam = _as_array(lambda_bd(rho, params))

    h_gamma, h_e = rel_enthalpy(rho, rho_bar, params)
    h_gamma = _as_array(h_gamma)
    p_rel = _as_array(rel_pressure(rho, rho_bar, params))
    # p(ρ|ρ̄) 분해 잔차의 척도: 각 항의 크기 합
    split_scale = np.abs(_as_array(pressure(rho, params))) + np.abs(_as_array(pressure(rho_bar, params))) \
        + np.abs(_as_array(pressure(rho_bar, params, 1)) * (rho - rho_bar)) + tiny

    return {
        "pressure_enthalpy": float(np.max(np.abs(p - (rho * h1 - h0)) / scale_p)),
        "mu_prime_squared": float(np.max(np.abs(mu1**2 - rho_k) / (rho_k + tiny))),
        "lambda_bd": float(np.max(np.abs(2.0 * (mu1 * rho - mu0) - lam) / (np.abs(mu1 * rho) + tiny))),
        "pressure_split": float(np.max(np.abs(_as_array(rel_pressure_residual(rho, rho_bar, params))) / split_scale)),
        "h_gamma_min": float(np.min(h_gamma)),
        "p_rel_max": float(np.max(np.abs(p_rel))),
    }

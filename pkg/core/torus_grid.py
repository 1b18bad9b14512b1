"""
주기 1차원 격자 - 스펙트럼 미분, 구적, 디앨리어싱
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft as sp_fft

from utils.errors import ConfigError, NonFiniteError, PositivityError
from utils.spectral_cache import spectral_cache

logger = logging.getLogger(__name__)

# 해상도 판정 기준: l > N/4 모드의 최대 진폭 / 전체 최대 진폭
TAIL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Grid:
    """토러스 [0, L) 위의 균일 격자 (N은 2의 거듭제곱)"""
    n_points: int
    length: float = 2 * np.pi
    dim: int = 1

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ConfigError(f"N은 16 이상의 2의 거듭제곱이어야 함 (N={n})", field="grid.n_points")
        if not self.length > 0:
            raise ConfigError(f"L > 0 이어야 함 (L={self.length})", field="grid.length")
        if self.dim != 1:
            raise ConfigError("1차원 격자만 지원", field="grid.dim")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        """κ_l = 2πl/L, l ∈ [−N/2, N/2) (FFT 순서)"""
        return spectral_cache.get_or_build(
            "wavenumbers", self.n_points, self.length, 0,
            lambda: 2 * np.pi * np.fft.fftfreq(self.n_points, d=1.0 / self.n_points) / self.length,
        )

    @property
    def rfft_wavenumbers(self) -> np.ndarray:
        return spectral_cache.get_or_build(
            "rwavenumbers", self.n_points, self.length, 0,
            lambda: 2 * np.pi * np.arange(self.n_points // 2 + 1) / self.length,
        )

    @property
    def kappa_max(self) -> float:
        return np.pi * self.n_points / self.length

    @property
    def kappa_cutoff(self) -> float:
        """2/3 규칙으로 살아남는 최대 파수"""
        return 2 * np.pi * (self.n_points // 3) / self.length

    def _deriv_multiplier(self, order: int) -> np.ndarray:
        def build():
            mult = (1j * self.rfft_wavenumbers) ** order
            if order % 2 == 1:
                mult[-1] = 0.0  # 홀수 차수: 나이퀴스트 모드 제거
            return mult
        return spectral_cache.get_or_build("deriv", self.n_points, self.length, order, build)

    def _dealias_mask(self) -> np.ndarray:
        return spectral_cache.get_or_build(
            "dealias", self.n_points, self.length, 0,
            lambda: (np.arange(self.n_points // 2 + 1) <= self.n_points / 3).astype(float),
        )

    def _check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_points,):
            raise ValueError(f"필드 길이 불일치: {values.shape} vs ({self.n_points},)")
        return values

    def deriv(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """스펙트럼 미분 ∂ₓ^order"""
        if order not in (1, 2, 3, 4):
            raise ValueError(f"지원하지 않는 미분 차수: {order}")
        values = self._check(values)
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("deriv: 비유한 입력")
        return sp_fft.irfft(sp_fft.rfft(values) * self._deriv_multiplier(order), n=self.n_points)

    def integrate(self, values: np.ndarray) -> float:
        """(L/N)·Σ f_j"""
        return float(self.dx * np.sum(self._check(values)))

    def dealias(self, values: np.ndarray) -> np.ndarray:
        """|κ| > (2/3)κ_max 모드 제거"""
        values = self._check(values)
        return sp_fft.irfft(sp_fft.rfft(values) * self._dealias_mask(), n=self.n_points)

    def l2_norm(self, values: np.ndarray) -> float:
        values = self._check(values)
        return float(np.sqrt(self.dx * np.sum(values * values)))

    def spectrum(self, values: np.ndarray) -> np.ndarray:
        """rfft 계수 크기 (N으로 정규화)"""
        return np.abs(sp_fft.rfft(self._check(values))) / self.n_points

    def spectral_tail(self, values: np.ndarray) -> float:
        """l > N/4 대역의 최대 계수 / 전체 최대 계수"""
        spec = self.spectrum(values)
        peak = spec.max()
        if peak == 0.0:
            return 0.0
        tail = spec[np.arange(spec.size) > self.n_points / 4]
        return float(tail.max() / peak) if tail.size else 0.0

    def is_resolved(self, values: np.ndarray, tolerance: float = TAIL_TOLERANCE) -> bool:
        return self.spectral_tail(values) < tolerance

    def refined(self, factor: int = 2) -> 'Grid':
        return Grid(self.n_points * factor, self.length, self.dim)


@dataclass
class Field:
    """격자 위의 점값 배열"""
    grid: Grid
    values: np.ndarray
    name: str = "field"
    positive: bool = False
    time: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise ValueError(f"Field '{self.name}' 길이 {self.values.shape} ≠ N={self.grid.n_points}")

    @classmethod
    def tag_positive(cls, grid: Grid, values: np.ndarray, floor: float, name: str = "rho",
                     time: Optional[float] = None) -> 'Field':
        """min(values) ≥ floor 확인 후 positive 태그"""
        values = np.asarray(values, dtype=float)
        min_value = float(values.min())
        if min_value < floor:
            raise PositivityError(f"{name}: min={min_value:.3e} < floor={floor:.3e}", time=time, min_rho=min_value)
        return cls(grid=grid, values=values, name=name, positive=True, time=time)

    @classmethod
    def from_function(cls, grid: Grid, func, name: str = "field") -> 'Field':
        return cls(grid=grid, values=func(grid.nodes), name=name)

    def deriv(self, order: int = 1) -> 'Field':
        return Field(self.grid, self.grid.deriv(self.values, order), name=f"d{order}_{self.name}", time=self.time)

    def integrate(self) -> float:
        return self.grid.integrate(self.values)

    def dealias(self) -> 'Field':
        return Field(self.grid, self.grid.dealias(self.values), name=self.name, time=self.time)

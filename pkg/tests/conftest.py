"""
공통 픽스처
"""

import numpy as np
import pytest

from config import BumpSpec, Params
from core.torus_grid import Grid


@pytest.fixture
def grid32() -> Grid:
    return Grid(32)


@pytest.fixture
def grid64() -> Grid:
    return Grid(64)


@pytest.fixture
def params() -> Params:
    """γ = 2, s = −1 (양자 유체), ε = 0.1, 범프 없음"""
    return Params()


@pytest.fixture
def bump_params() -> Params:
    """ρ_c = 2 근처에 범프가 있는 γ = 2, s = 0"""
    return Params(gamma=2.0, s=0.0, bump=BumpSpec(amplitude=0.2, center=2.0, halfwidth=0.5))


@pytest.fixture
def smooth_rho(grid64) -> np.ndarray:
    x = grid64.nodes
    return 2.0 + 0.3 * np.sin(x) + 0.1 * np.cos(2 * x)

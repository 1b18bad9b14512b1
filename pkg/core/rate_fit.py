"""
수렴 차수 피팅 - log-log 최소제곱
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from dataclasses_json import dataclass_json
from sklearn.linear_model import LinearRegression

logger = logging.getLogger(__name__)


@dataclass_json
@dataclass
class RateFit:
    """log y = slope·log x + intercept 피팅 결과"""
    xs: List[float]
    ys: List[float]
    slope: float
    intercept: float
    r_squared: float
    ratio_spread: float = math.nan   # max/min of y/model(x), 모델이 있을 때만
    ratio_growth: float = math.nan   # max(y/model) / 가장 큰 x에서의 y/model
    model: str = ""
    ratios: List[float] = field(default_factory=list)

    def predict(self, x: float) -> float:
        return math.exp(self.intercept) * x**self.slope


def relaxation_model(nu: float) -> Callable[[np.ndarray], np.ndarray]:
    """ε⁴ + νε"""
    return lambda eps: np.asarray(eps) ** 4 + nu * np.asarray(eps)


def rate_fit(xs: Sequence[float], ys: Sequence[float],
             model: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             model_name: str = "") -> RateFit:
    """(log x, log y) 최소제곱과 모델 곡선 대비 비율 폭"""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("양수 쌍이 2개 이상 필요")
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("피팅 데이터는 모두 양수여야 함")

    log_x = np.log(x).reshape(-1, 1)
    log_y = np.log(y)
    regressor = LinearRegression().fit(log_x, log_y)

    # 상수 y는 완전 적합으로 간주
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else float(np.clip(regressor.score(log_x, log_y), 0.0, 1.0))

    ratios: List[float] = []
    ratio_spread = ratio_growth = math.nan
    if model is not None:
        ratio = y / np.asarray(model(x), dtype=float)
        ratios = ratio.tolist()
        ratio_spread = float(ratio.max() / ratio.min())
        ratio_growth = float(ratio.max() / ratio[np.argmax(x)])

    result = RateFit(
        xs=x.tolist(), ys=y.tolist(),
        slope=float(regressor.coef_[0]), intercept=float(regressor.intercept_),
        r_squared=r_squared, ratio_spread=ratio_spread, ratio_growth=ratio_growth,
        model=model_name, ratios=ratios,
    )
    logger.info(f"📈 차수 피팅: slope={result.slope:.3f}, r²={result.r_squared:.4f}, spread={ratio_spread:.3g}")
    return result

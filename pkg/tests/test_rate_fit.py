import math

import numpy as np
import pytest

from core.rate_fit import rate_fit, relaxation_model


EPSILONS = [0.2, 0.1, 0.05, 0.025]


def test_pure_power_law():
    fit = rate_fit(EPSILONS, [3.0 * e**4 for e in EPSILONS])
    assert fit.slope == pytest.approx(4.0, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-9)
    assert fit.predict(0.5) == pytest.approx(3.0 * 0.5**4, rel=1e-9)
    assert math.isnan(fit.ratio_spread)


def test_constant_values_are_a_perfect_fit():
    fit = rate_fit(EPSILONS, [1e-3] * 4)
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == 1.0


def test_model_ratio_spread():
    nu = 0.01
    model = relaxation_model(nu)
    ys = 2.0 * model(np.array(EPSILONS))
    fit = rate_fit(EPSILONS, ys, model=model, model_name="eps^4 + nu*eps")
    assert fit.ratio_spread == pytest.approx(1.0, rel=1e-12)
    assert fit.ratios == pytest.approx([2.0] * 4)
    assert fit.ratio_growth == pytest.approx(1.0, rel=1e-12)
    assert fit.model == "eps^4 + nu*eps"
    # ν·ε 가 지배하면 기울기는 4보다 작음
    assert fit.slope < 3.5


def test_relaxation_model_values():
    assert relaxation_model(0.0)(0.1) == pytest.approx(1e-4)
    assert relaxation_model(0.5)(0.1) == pytest.approx(1e-4 + 0.05)


@pytest.mark.parametrize("xs,ys", [
    ([0.1, 0.0], [1.0, 2.0]),
    ([0.1, 0.2], [1.0, -2.0]),
    ([0.1, 0.2], [1.0, float("nan")]),
    ([0.1], [1.0]),
    ([0.1, 0.2, 0.3], [1.0, 2.0]),
])
def test_rejects_invalid_input(xs, ys):
    with pytest.raises(ValueError):
        rate_fit(xs, ys)


def test_serializes_to_json():
    fit = rate_fit(EPSILONS, [e**2 for e in EPSILONS])
    data = fit.to_dict()
    assert data["slope"] == pytest.approx(2.0)
    assert data["xs"] == EPSILONS


def test_ratio_growth_is_measured_from_largest_x():
    model = relaxation_model(0.0)
    xs = [0.05, 0.2, 0.1]
    ys = [3.0 * 0.05**4, 1.0 * 0.2**4, 2.0 * 0.1**4]
    fit = rate_fit(xs, ys, model=model)
    assert fit.ratio_growth == pytest.approx(3.0)
    assert fit.ratio_spread == pytest.approx(3.0)
    assert math.isnan(rate_fit(xs, ys).ratio_growth)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from hsfem.errors import DomainError, InvalidArgumentError
from hsfem.model import (
    ZERO_GROWTH, GrowthLaw, ModelParams, density_of_pressure, growth, initial_constant,
    initial_gaussian, n_max, power, pressure,
)


def _nmax_oracle(k, P):
    mp.dps = 40
    return float((mpf(P) * (k - 1) / k) ** (mpf(1) / (k - 1)))


def test_pressure_values():
    assert pressure(1.0, 2) == 2.0
    assert pressure(0.0, 100) == 0.0
    assert pressure(n_max(100, 1.0), 100) == pytest.approx(1.0, abs=1e-12)


def test_density_of_pressure_values():
    assert density_of_pressure(2.0, 2) == pytest.approx(1.0, abs=1e-15)
    assert density_of_pressure(0.0, 100) == 0.0
    assert density_of_pressure(1.0, 100) == pytest.approx(_nmax_oracle(100, 1), abs=1e-15)
    # eight-digit literal 0.99989852 carries a rounding slip of 3.5e-8
    assert density_of_pressure(1.0, 100) == pytest.approx(0.99989852, abs=5e-8)


@pytest.mark.parametrize("k,P", [(2, 1.0), (100, 1.0), (1000, 1.0), (100, 10.0), (100, 30.0)])
def test_n_max_oracle(k, P):
    assert n_max(k, P) == pytest.approx(_nmax_oracle(k, P), rel=1e-14)
    assert n_max(2, 1.0) == 0.5


def test_n_max_uniformly_bounded():
    vals = [n_max(k, 1.0) for k in range(2, 1001)]
    assert max(vals) < 1.0 + 1e-12
    vals30 = [n_max(k, 30.0) for k in range(2, 1001)]
    assert max(vals30) == vals30[0] == 15.0


def test_negative_arguments_raise():
    with pytest.raises(DomainError):
        pressure(np.array([0.5, -1e-30]), 10)
    with pytest.raises(DomainError):
        density_of_pressure(-1.0, 10)
    with pytest.raises(InvalidArgumentError):
        pressure(1.0, 1)
    with pytest.raises(InvalidArgumentError):
        n_max(10, 0.0)


def test_large_k_does_not_overflow():
    with np.errstate(all="raise"):
        p = pressure(np.array([0.0, 0.5, 1.0, 1.2]), 1000)
    assert p[0] == 0.0 and 0.0 <= p[1] < 1e-290 and np.isfinite(p).all()


# below ~1e-3 the pressure for k = 1000 underflows to 0 and cannot be inverted
@settings(max_examples=200, deadline=None)
@given(st.integers(2, 1000), st.floats(1e-3, 2.0))
def test_round_trip(k, n):
    p = pressure(n, k)
    if p < 1e-250:
        return
    assert density_of_pressure(p, k) == pytest.approx(n, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 1000), st.floats(0, 2.0), st.floats(0, 2.0))
def test_pressure_monotone(k, a, b):
    lo, hi = min(a, b), max(a, b)
    assert pressure(lo, k) <= pressure(hi, k)


def test_growth_values():
    law = GrowthLaw()
    assert growth(1.0, law, 1.0) == 0.0
    assert growth(0.0, law, 1.0) == pytest.approx(200 / math.pi * math.atan(4), rel=1e-15)
    mp.dps = 30
    assert growth(0.0, law, 1.0) == pytest.approx(float(200 / mp.pi * mp.atan(4)), rel=1e-14)
    assert growth(0.2, law, 1.0) > growth(0.8, law, 1.0)
    assert growth(5.0, law, 1.0) == 0.0
    assert law.is_admissible(1.0) and law.is_admissible(30.0)
    assert not ZERO_GROWTH.is_admissible(1.0)
    assert np.all(growth(np.linspace(0, 3, 7), ZERO_GROWTH, 1.0) == 0)


def test_table_growth():
    law = GrowthLaw(kind="table", table_p=(0.0, 0.5, 1.0), table_g=(10.0, 4.0, 0.0))
    assert growth(0.25, law, 1.0) == pytest.approx(7.0)
    assert growth(1.0, law, 1.0) == 0.0
    assert law.is_admissible(1.0)
    with pytest.raises(InvalidArgumentError):
        GrowthLaw(kind="table", table_p=(1.0, 0.0), table_g=(1.0, 0.0))


def test_initial_data():
    f = initial_gaussian(1.0)
    assert f(0.0, 0.0) == 1.0
    assert initial_gaussian(0.5)(0.0, 0.0) == 0.5
    x, y = 0.3, -1.7
    assert f(x, y) == f(y, x) == f(-x, y)
    np.testing.assert_array_equal(initial_constant(0.3)(np.zeros(4), np.zeros(4)), 0.3)
    with pytest.raises(InvalidArgumentError):
        initial_gaussian(0.0)


def test_params_validation():
    p = ModelParams()
    assert (p.k, p.nu, p.P_max, p.alpha, p.tau) == (100, 0.5, 1.0, 1.0, 1e-5)
    assert p.n_max == pytest.approx(_nmax_oracle(100, 1), rel=1e-14)
    for bad in ({"k": 1}, {"k": 2.5}, {"nu": -1}, {"P_max": 0}, {"alpha": 0}, {"tau": 0}, {"t_final": -1}):
        with pytest.raises(InvalidArgumentError):
            ModelParams(**bad)


def test_power_exact_zero():
    assert power(0.0, 5) == 0.0
    assert power(2.0, 3) == pytest.approx(8.0, rel=1e-15)

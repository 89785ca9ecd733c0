import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavelab.errors import DomainError
from wavelab.mathlib import (ModelParams, StrichartzPair, c_d, critical_exponents, is_admissible,
                             kappa_0, lambda_d, radial_integral, s_p, satisfies_a1, sphere_area)
from wavelab.solver import RadialGrid


def test_sphere_area_matches_gamma_formula():
    for d in range(2, 12):
        expected = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
        assert sphere_area(d) == pytest.approx(expected, rel=1e-14)


def test_known_constants():
    assert lambda_d(3) == 0.0
    assert lambda_d(5) == 2.0
    assert c_d(3) == pytest.approx(math.pi)
    assert critical_exponents(3) == (3.0, 5.0)
    assert s_p(3, 5.0) == pytest.approx(1.0)


def test_a1_region():
    assert satisfies_a1(3, 3.0)
    assert not satisfies_a1(3, 5.0)
    assert not satisfies_a1(3, 2.9)
    assert not satisfies_a1(10, 1.5)
    pc, _ = critical_exponents(8)
    assert satisfies_a1(8, pc)
    # the extra cap 1 + 3/(d-3) bites for d >= 7
    assert not satisfies_a1(9, 1.55)


def test_model_params_guard():
    with pytest.raises(DomainError):
        ModelParams(3, 6.0)
    mp = ModelParams(3, 6.0, allow_outside_a1=True)
    assert not mp.in_a1


def test_kappa0_three_dimensions():
    for p in np.linspace(3.0, 4.99, 40):
        assert kappa_0(3, p) == pytest.approx((5 - p) / 2, abs=1e-12)


@given(st.integers(4, 8), st.floats(0.0, 1.0))
def test_kappa0_endpoints_and_range(d, frac):
    pc, pe = critical_exponents(d)
    assert kappa_0(d, pc) == pytest.approx(1.0, abs=1e-12)
    assert kappa_0(d, pe) == pytest.approx(0.0, abs=1e-12)
    k = kappa_0(d, pc + frac * (pe - pc))
    assert -1e-12 <= k <= 1 + 1e-12


def test_admissible_pairs():
    assert is_admissible(StrichartzPair(2.0, 5.0, 1.0), 5)
    assert is_admissible(StrichartzPair(math.inf, 2.0, 0.0), 3)
    # scaling holds but (2, 2(d-1)/(d-3)) is the forbidden endpoint
    assert not is_admissible(StrichartzPair(2.0, 4.0, 0.75), 5)
    assert not is_admissible(StrichartzPair(2.0, 10.0, 1.0), 5)


def test_radial_integral_of_constant_is_ball_volume():
    grid = RadialGrid.from_extent(3, 2.0, 400)
    vol = radial_integral(np.ones(grid.n), 3, grid, 0.0, 1.0)
    assert vol == pytest.approx(4 * math.pi / 3, rel=1e-4)


@given(st.floats(0.1, 1.9), st.floats(0.1, 1.9))
def test_radial_integral_is_additive(a, b):
    lo, hi = sorted((a, b))
    grid = RadialGrid.from_extent(4, 2.0, 64)
    f = np.exp(-grid.r)
    whole = radial_integral(f, 4, grid, 0.0, hi)
    parts = radial_integral(f, 4, grid, 0.0, lo) + radial_integral(f, 4, grid, lo, hi)
    assert whole == pytest.approx(parts, rel=1e-12, abs=1e-14)

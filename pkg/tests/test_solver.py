import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelab.errors import ConfigError, DomainError, IndeterminateOrderError, UnstableRunError
from wavelab.mathlib import ModelParams, radial_integral
from wavelab.solver import (FieldState, InitialData, RadialGrid, SolverConfig, evolve,
                            linear_evolve, load_state, richardson_order, save_state)


def dalembert(r, t):
    """Free radial wave in three dimensions from u0 = exp(-r^2), u1 = 0."""
    f = lambda s: np.exp(-s * s)
    return ((r + t) * f(r + t) + (r - t) * f(np.abs(r - t))) / (2 * r)


def linear_error(n, t_final=3.0):
    grid = RadialGrid.from_extent(3, 10.0, n)
    run = evolve(InitialData("gaussian", 1.0, 0.0, 1.0), grid, ModelParams(3, 3.0),
                 SolverConfig(t_final, nonlinearity_on=False))
    exact = dalembert(grid.r, run.final_state.t)
    return math.sqrt(radial_integral((run.final_state.u - exact) ** 2, 3, grid)
                     / radial_integral(exact ** 2, 3, grid))


def test_matches_dalembert_at_second_order():
    coarse, fine = linear_error(256), linear_error(512)
    assert fine < 1e-3
    assert 3.2 <= coarse / fine <= 4.8


def test_dt_divides_t_final():
    grid = RadialGrid.from_extent(3, 32.0, 4096)
    cfg = SolverConfig(20.0)
    assert cfg.n_steps(grid) * cfg.dt(grid) == pytest.approx(20.0, abs=1e-12)
    assert cfg.dt(grid) <= cfg.cfl * grid.h


def test_unstable_cfl_is_rejected():
    grid = RadialGrid.from_extent(5, 10.0, 128)
    with pytest.raises(ConfigError):
        SolverConfig(1.0, cfl=1.0).check_stability(grid)


def test_padding_guard():
    grid = RadialGrid.from_extent(3, 6.0, 128)
    with pytest.raises(DomainError, match="too small"):
        evolve(InitialData(), grid, ModelParams(3, 3.0), SolverConfig(5.0))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_is_reported():
    grid = RadialGrid.from_extent(3, 8.0, 64)
    state = InitialData().state(grid)
    state = FieldState(0.0, state.u * 1e200, state.v)
    with pytest.raises(UnstableRunError):
        evolve(state, grid, ModelParams(3, 3.0), SolverConfig(1.0))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.5, 3.0))
def test_free_flow_reverses(width, t):
    grid = RadialGrid.from_extent(4, 16.0, 256)
    params = ModelParams(4, 2.5)
    start = InitialData("compact-bump", 1.0, 3.0, width).state(grid)
    there = linear_evolve(start, grid, params, t)
    back = linear_evolve(there, grid, params, 0.0, dt=t / round(t / (0.8 * grid.h) + 0.5))
    assert np.max(np.abs(back.u - start.u)) < 1e-9


def test_save_and_load_roundtrip(tmp_path):
    grid = RadialGrid.from_extent(3, 4.0, 32)
    state = InitialData(velocity_profile="outgoing-biased").state(grid)
    save_state(tmp_path / "s.csv", state, grid, ModelParams(3, 3.5))
    back, g2, p = load_state(tmp_path / "s.csv")
    assert g2 == grid and p == 3.5
    assert np.array_equal(back.u, state.u) and np.array_equal(back.v, state.v)


def test_richardson_order():
    assert richardson_order(1.0 + 1 / 4, 1.0 + 1 / 16, 1.0 + 1 / 64) == pytest.approx(2.0)
    with pytest.raises(IndeterminateOrderError):
        richardson_order(1.0, 1.0, 1.0)


def test_unknown_initial_kind():
    with pytest.raises(ConfigError):
        InitialData("square")

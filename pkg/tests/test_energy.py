import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelab.energy import (apply_L, densities, hardy_identity_residual,
                            kappa_weighted_split_bound, split_energy, total_energy)
from wavelab.mathlib import ModelParams, critical_exponents
from wavelab.solver import InitialData, RadialGrid

from conftest import small_run


def params_for(d):
    return ModelParams(d, 3.0 if d == 3 else critical_exponents(d)[0] + 0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 6), st.sampled_from(["gaussian", "compact-bump", "ring"]),
       st.sampled_from(["zero", "outgoing-biased"]), st.floats(0.1, 3.0), st.floats(0.0, 3.0))
def test_split_identity_on_data(d, kind, vel, amp, center):
    grid = RadialGrid.from_extent(d, 24.0, 1536)
    state = InitialData(kind, amp, center, 1.0, vel).state(grid)
    rep = split_energy(state, grid, params_for(d))
    assert abs(rep.split_defect) <= 1e-3 * rep.E
    assert rep.E_minus >= 0 and rep.E_plus >= 0


def test_outgoing_data_has_no_outward_operator_part():
    grid = RadialGrid.from_extent(3, 12.0, 1024)
    state = InitialData(velocity_profile="outgoing-biased").state(grid)
    Lp = apply_L(state, grid, ModelParams(3, 3.0), "+")
    Lm = apply_L(state, grid, ModelParams(3, 3.0), "-")
    assert np.max(np.abs(Lp)) < 1e-2 * np.max(np.abs(Lm))


def test_hardy_identity():
    for d in (3, 4, 5, 7):
        grid = RadialGrid.from_extent(d, 16.0, 2048)
        u = InitialData("gaussian", 1.0, 1.0).state(grid).u
        res = hardy_identity_residual(u, grid, ModelParams(d, 1.0 + 4.0 / (d - 1)))
        assert abs(res.residual) <= 1e-4 * res.rhs
        split = hardy_identity_residual(u, grid, ModelParams(d, 1.0 + 4.0 / (d - 1)), R=1.5)
        assert abs(split.residual) <= 1e-3 * res.rhs
        assert abs(split.exterior[2]) <= 1e-3 * res.rhs


def test_weighted_split_bound():
    grid = RadialGrid.from_extent(5, 16.0, 2048)
    lhs, rhs = kappa_weighted_split_bound(InitialData(), grid, params_for(5), 0.5)
    assert lhs <= rhs * (1 + 1e-6)


def test_densities_are_nonnegative():
    grid = RadialGrid.from_extent(4, 10.0, 256)
    s = densities(InitialData().state(grid), grid, params_for(4))
    assert (s.e_prime >= 0).all() and (s.M >= 0).all()
    assert len(s.samples()) == grid.n


def test_energy_conserved_and_monotone():
    run = small_run(d=4, p=params_for(4).p)
    en = run["energies"]
    E0 = en.E0
    assert np.max(np.abs(en.E - E0)) <= 1e-3 * E0
    assert np.max(np.diff(en.E_minus)) <= 1e-3 * E0
    assert np.min(np.diff(en.E_plus)) >= -1e-3 * E0
    assert total_energy(run.final_state, run.grid, run.params) == pytest.approx(en.E[-1])

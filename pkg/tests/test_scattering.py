import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from wavelab.errors import ContractViolation, DomainError
from wavelab.mathlib import ModelParams, critical_exponents, satisfies_a1
from wavelab.scattering import (LebesgueRecorder, LebesgueSeries, SnapshotRecorder,
                                check_interconstants, energy_norm, extract_profile,
                                interior_energy, s_exponent, s_norm, scatter_defect,
                                spacetime_norm, w_exponent)
from wavelab.solver import InitialData

from conftest import small_run


@given(st.integers(4, 8), st.floats(0.01, 0.99))
def test_interconstants_hold_inside_range(d, frac):
    pc, pe = critical_exponents(d)
    p = pc + frac * (pe - pc)
    assume(satisfies_a1(d, p))
    ic = check_interconstants(ModelParams(d, p))
    assert ic.k1 > 0 and ic.k2 > 0
    assert ic.q2 == 2.0


def test_interconstants_need_d_at_least_four():
    with pytest.raises(DomainError):
        check_interconstants(ModelParams(3, 3.5))


def test_separable_norm():
    t = np.linspace(0.0, 2.0, 21)
    series = LebesgueSeries(t, {4.0: np.full(t.size, 16.0)})
    diags = {"lebesgue": series}
    assert spacetime_norm(diags, 2.0, 4.0).value == pytest.approx(2.0 * math.sqrt(2.0))
    assert spacetime_norm(diags, math.inf, 4.0).value == pytest.approx(2.0)
    assert spacetime_norm(diags, 2.0, 4.0, (0.0, 0.5)).value == pytest.approx(2.0 * math.sqrt(0.5))
    with pytest.raises(ContractViolation):
        spacetime_norm(diags, 2.0, 3.0)


def test_exponents():
    assert s_exponent(ModelParams(3, 3.0)) == 4.0
    assert w_exponent(3) == 4.0


@pytest.fixture(scope="module")
def scatter_runs():
    out = {}
    for nonlinear in (False, True):
        recs = [SnapshotRecorder((1.0, 2.0, 4.0, 8.0, 16.0)), LebesgueRecorder((4.0,))]
        out[nonlinear] = small_run(n=1920, r_max=40.0, t_final=16.0, nonlinear=nonlinear,
                                   initial=InitialData(amplitude=0.5), extra=recs)
    return out


def test_free_solution_has_fixed_profile(scatter_runs):
    run = scatter_runs[False]
    data = run.initial_state
    for T in (1.0, 4.0, 16.0):
        prof = extract_profile(run, T)
        assert np.max(np.abs(prof.v0 - data.u)) < 1e-10
    assert scatter_defect(run, 1.0, 16.0) < 1e-9


def test_nonlinear_profiles_settle(scatter_runs):
    run = scatter_runs[True]
    cache = {}
    early = scatter_defect(run, 4.0, 8.0, cache)
    late = scatter_defect(run, 8.0, 16.0, cache)
    assert late < early
    assert set(cache) == {4.0, 8.0, 16.0}


def test_norms_and_interior(scatter_runs):
    run = scatter_runs[True]
    assert s_norm(run, run.params).value > 0
    t, vals = interior_energy(run, 0.5)
    assert (vals >= 0).all() and (vals <= run["energies"].E0 * (1 + 1e-9)).all()
    with pytest.raises(ContractViolation):
        extract_profile(run, 3.0)


def test_energy_norm_of_zero(scatter_runs):
    g = scatter_runs[False].grid
    assert energy_norm(np.zeros(g.n), np.zeros(g.n), g) == 0.0

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelab.energy import weighted_energy
from wavelab.errors import ContractViolation, PreconditionError
from wavelab.estimates import (SpaceTimeRecorder, WeightSpec, decay_chain, decay_fit,
                               l_power_lemma_check, morawetz_inequality, slab_morawetz,
                               truncated_l_power_norm, unweighted_global_integrals,
                               weighted_morawetz)

from conftest import small_run

WEIGHTS = [WeightSpec("power", 0.5), WeightSpec("table", 0.0, 0.5, (0.0, 1.0, 4.0, 20.0), (0.0, 1.0, 1.8, 2.0))]


@pytest.fixture(scope="module")
def st_run():
    return small_run(n=1024, r_max=16.0, t_final=10.0,
                     extra=[SpaceTimeRecorder((5.0, 10.0), WEIGHTS)])


def test_uniform_density_norm():
    y = np.linspace(0.0, 1.0, 2001)
    norm, mass = l_power_lemma_check(y, np.ones_like(y), 0.5)
    assert norm ** 2 == pytest.approx(2 / 3, abs=1e-6)
    assert mass == pytest.approx(1.0)


def test_concentrated_density_nearly_saturates():
    y = np.array([0.0, 2.0 - 1e-5, 2.0, 2.0 + 1e-5])
    rho = np.array([0.0, 0.0, 1e5, 0.0])
    for kappa in (0.2, 0.5, 0.8):
        norm, mass = l_power_lemma_check(y, rho, kappa)
        assert norm == pytest.approx(mass, rel=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=2, max_size=30),
       st.floats(0.05, 0.95), st.floats(0.1, 10.0))
def test_norm_never_exceeds_mass(rho, kappa, span):
    y = np.linspace(0.0, span, len(rho))
    norm, mass = l_power_lemma_check(y, np.array(rho), kappa)
    assert norm <= mass * (1 + 1e-12) + 1e-300


def test_lemma_rejects_bad_input():
    with pytest.raises(PreconditionError):
        l_power_lemma_check([0.0, 1.0], [1.0, -1.0], 0.5)
    with pytest.raises(PreconditionError):
        l_power_lemma_check([0.0, 1.0], [1.0, 1.0], 1.0)


@given(st.floats(0.1, 0.9))
def test_decay_fit_recovers_power(kappa):
    t = np.linspace(1.0, 40.0, 400)
    fit = decay_fit(t, 3.0 * t ** -kappa, kappa, E_kappa=2.0)
    assert fit.fitted_slope == pytest.approx(-kappa, abs=1e-9)
    assert fit.bound_constant == pytest.approx(1.5)


def test_truncated_norm_of_constant():
    t = np.linspace(0.0, 4.0, 9)
    assert truncated_l_power_norm(t, np.full(9, 2.0), 0.5) == pytest.approx(2.0 * 4.0 ** 0.5)
    assert truncated_l_power_norm(t, np.full(9, 2.0), 0.5, 1.0) == pytest.approx(2.0)


def test_weight_validation():
    with pytest.raises(PreconditionError):
        WeightSpec("power", 0.8, 0.5).validate()
    with pytest.raises(PreconditionError):
        WeightSpec("table", 0.0, 0.5, (0.0, 1.0), (1.0, 0.5)).validate()
    with pytest.raises(PreconditionError):
        WeightSpec("power", 0.5, 1.5)
    for w in WEIGHTS:
        assert w.validate()


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 4.0])
def test_morawetz_bound(st_run, R):
    rep = morawetz_inequality(st_run, st_run.params, R)
    assert rep.holds
    assert rep.total > 0
    assert morawetz_inequality(st_run, st_run.params, R, horizon=5.0).total <= rep.total


def test_slab_matches_global_integral(st_run):
    g = unweighted_global_integrals(st_run, st_run.params)
    assert g["weighted"] > 0 and g["local"] > 0
    assert slab_morawetz(st_run, 10.0) >= slab_morawetz(st_run, 5.0) > 0


@pytest.mark.parametrize("weight", WEIGHTS, ids=["power", "table"])
def test_weighted_chain(st_run, weight):
    lhs, mu_w, K1 = weighted_morawetz(st_run, st_run.params, weight)
    assert lhs >= 0 and mu_w >= 0 and K1 > 0
    chain = decay_chain(st_run, st_run.params, weight, st_run["energies"])
    assert chain.holds


def test_weighted_data_energy_dominates(st_run):
    K1 = weighted_morawetz(st_run, st_run.params, WEIGHTS[0])[2]
    assert K1 <= weighted_energy(st_run.initial_state, st_run.grid, st_run.params, 0.5)


def test_unregistered_weight(st_run):
    with pytest.raises(ContractViolation):
        weighted_morawetz(st_run, st_run.params, WeightSpec("power", 0.3))

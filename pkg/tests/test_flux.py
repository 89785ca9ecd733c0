import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavelab.errors import ContractViolation, DomainError
from wavelab.flux import (Region, SurfaceSegment, cone_region, flux_balance, mu_accumulate,
                          pl_integral, shell_region, surface_integral)
from wavelab.solver import InitialData

from conftest import small_run

REGIONS = ("shell", "axis", "cone")


def E0(run):
    return run["energies"].E0


@pytest.mark.parametrize("name", REGIONS)
@pytest.mark.parametrize("kind", ["inward", "outward"])
def test_balance_closes(box_run, name, kind):
    region = run_region(box_run, name)
    ledger = flux_balance(region, box_run, energy_type=kind)
    assert abs(ledger.residual) <= 0.01 * ledger.scale(E0(box_run))


def run_region(run, name):
    return run["flux"].regions[name]


@pytest.mark.parametrize("name", REGIONS)
def test_orientation_flips_sign(box_run, name):
    for seg in run_region(box_run, name).segments:
        if seg.kind == "axis":
            continue
        for kind in ("inward", "outward"):
            a = surface_integral(seg, box_run, energy_type=kind)
            b = surface_integral(seg.reversed(), box_run, energy_type=kind)
            assert a == -b


@pytest.mark.parametrize("name", ["shell", "cone"])
def test_split_regions_add_up(box_run, name):
    whole = flux_balance(run_region(box_run, name), box_run)
    parts = [flux_balance(run_region(box_run, f"{name}-{w}"), box_run) for w in ("lower", "upper")]
    assert sum(p.boundary_sum for p in parts) == pytest.approx(whole.boundary_sum, rel=1e-9, abs=1e-12)
    assert sum(p.morawetz_integral for p in parts) == pytest.approx(whole.morawetz_integral, rel=1e-3)


def test_axis_term_only_on_axis_regions(box_run):
    assert flux_balance(run_region(box_run, "shell"), box_run).mu_term == 0.0
    assert flux_balance(run_region(box_run, "axis"), box_run).mu_term != 0.0


def test_zero_solution_has_no_flux():
    run = small_run(n=128, t_final=2.0, initial=InitialData(amplitude=0.0),
                    regions=[shell_region(1.0, 2.0, 0.5, 1.5), cone_region(2.0, 0.5)])
    for reg in run["flux"].regions.values():
        ledger = flux_balance(reg, run)
        assert ledger.boundary_sum == 0.0 and ledger.residual == 0.0


@given(st.floats(0.0, 6.0), st.floats(0.0, 6.0), st.floats(0.0, 6.0))
def test_axis_measure_is_additive(box_run, a, b, c):
    t0, t1, t2 = sorted((a, b, c))
    total = mu_accumulate(box_run, (t0, t2))
    assert total >= 0
    assert mu_accumulate(box_run, (t0, t1)) + mu_accumulate(box_run, (t1, t2)) == pytest.approx(
        total, rel=1e-12, abs=1e-14)


def test_axis_measure_vanishes_above_three_dimensions():
    run = small_run(d=4, p=2.5, n=128, t_final=3.0)
    assert mu_accumulate(run, (0.0, 3.0)) == 0.0
    assert mu_accumulate(run, (0.0, 3.0), raw=True) > 0.0


def test_cone_fluxes_bounded_by_energy(box_run):
    cones = box_run["cones"]
    for fam in ("forward", "backward"):
        s = cones[fam]
        assert (s.Q_minus >= 0).all() and (s.Q_plus >= 0).all()
        assert (s.Q_sum <= 1.02 * E0(box_run)).all()


def test_pl_integral_exact_for_linear():
    t = np.linspace(0.0, 1.0, 11)
    assert pl_integral(t, 2 * t, 0.13, 0.77) == pytest.approx(0.77 ** 2 - 0.13 ** 2)


def test_region_geometry():
    r = Region.rectangle(1.0, 2.0, 0.0, 1.0)
    assert [s.kind for s in r.segments] == ["horizontal-down", "cylinder-outward",
                                            "horizontal-up", "cylinder-inward"]
    assert r.slice(0.5) == [(1.0, 2.0)]
    cone = cone_region(3.0, 1.0)
    assert cone.has_axis
    assert cone.slice(2.0) == [(0.0, 1.0)]
    low, high = cone.split(2.0)
    assert low.signed_area + high.signed_area == pytest.approx(cone.signed_area)


def test_bad_regions_are_rejected():
    with pytest.raises(ContractViolation, match="neither"):
        Region.from_vertices([(1, 0), (2, 0), (1.5, 2)])
    with pytest.raises(ContractViolation, match="cross"):
        Region.from_vertices([(1, 0), (3, 0), (3, 2), (2, 2), (2, -1), (1, -1)])
    with pytest.raises(ContractViolation):
        SurfaceSegment("cylinder-outward", (1.0, 0.0), (2.0, 0.0))
    with pytest.raises(DomainError):
        shell_region(0.0, 1.0, 0.0, 1.0)

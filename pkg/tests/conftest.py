import pytest

from wavelab.energy import EnergyRecorder
from wavelab.flux import AxisRecorder, ConeFluxRecorder, FluxRecorder, Region
from wavelab.mathlib import ModelParams
from wavelab.solver import InitialData, RadialGrid, SolverConfig, evolve


def small_run(d=3, p=3.0, n=512, r_max=12.0, t_final=6.0, regions=(), nonlinear=True,
              initial=None, extra=()):
    """A short compact-bump run with energies, axis samples and flux traces."""
    params = ModelParams(d, p)
    grid = RadialGrid.from_extent(d, r_max, n)
    axis = AxisRecorder()
    recs = [axis, EnergyRecorder(1, (0.5,), axis), FluxRecorder(list(regions)), *extra]
    cfg = SolverConfig(t_final, 0.8, nonlinearity_on=nonlinear)
    return evolve(initial or InitialData(), grid, params, cfg, recs)


@pytest.fixture(scope="session")
def box_run():
    shell = Region.rectangle(1.0, 3.0, 0.5, 3.0, name="shell")
    cone = Region.from_vertices([(0.0, 0.5), (3.5, 0.5), (0.0, 4.0)], name="cone")
    regions = [shell, Region.rectangle(0.0, 3.0, 0.5, 3.0, name="axis"), cone,
               *shell.split(1.7), *cone.split(2.0)]
    return small_run(n=1536, regions=regions,
                     extra=[ConeFluxRecorder((-1.0, 0.0, 1.0, 2.0), (2.0, 3.0, 5.0))])


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[num])

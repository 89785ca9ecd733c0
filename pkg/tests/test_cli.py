import csv
import json

import pytest

from wavelab import cli
from wavelab.config import OUTPUT_ROOT_ENV, RunConfig, required_radius
from wavelab.errors import ConfigError
from wavelab.pipeline import load_traces, simulate

SMALL = {
    "model": {"d": 3, "p": 3.0},
    "grid": {"cells": 256},
    "time": {"t_final": 3.0, "diagnostic_stride": 4},
    "diagnostics": {"cones": {"taus": [0.0], "ss": [2.0]},
                    "regions": [{"name": "box", "vertices": [[1, 0.5], [2, 0.5], [2, 1.5], [1, 1.5]]}],
                    "morawetz_R": [1.0], "kappa_list": [0.5], "interior_c_list": [0.5],
                    "scattering_T_list": [0.5, 1.0]},
}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_auto_radius_covers_padding():
    cfg = RunConfig.from_dict(SMALL)
    assert cfg.grid.r_max >= required_radius(cfg.initial, 3.0, [1.0]) - 2.0
    assert cfg.resolved()["grid"]["cells"] == 256


@pytest.mark.parametrize("patch, field", [
    ({"model": {"d": 3, "p": 6.0}}, "model"),
    ({"grid": {"r_max": 4.0}}, "grid.r_max"),
    ({"grid": {"cfl": 1.5}}, "grid.cfl"),
    ({"time": {"t_final": -1}}, "time.t_final"),
    ({"initial": {"kind": "square"}}, "initial.kind"),
    ({"diagnostics": {"kappa_list": [1.2]}}, "diagnostics.kappa_list"),
    ({"colour": 1}, "colour"),
])
def test_config_errors_name_the_field(patch, field):
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(patch)
    assert err.value.field == field


def test_output_root(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert RunConfig.from_dict({"output_dir": "x"}).output_dir == tmp_path / "x"


def test_simulate_writes_everything(tmp_path):
    run, summary = simulate(RunConfig.from_dict(SMALL), tmp_path / "run")
    names = {p.name for p in (tmp_path / "run").iterdir()}
    assert {"manifest.json", "energies.csv", "cones.csv", "regions.csv", "morawetz.csv",
            "weighted.csv", "decay.json", "scattering.json", "traces.npz"} <= names
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    # 256 cells is a smoke-test grid; the tight bound is checked at n = 4096
    assert summary["max_relative_energy_drift"] < 1e-2
    with open(tmp_path / "run" / "energies.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["t"]) == 0.0
    back = load_traces(tmp_path / "run" / "traces.npz")
    assert back.n_steps == run.n_steps


def test_cli_round_trip(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert cli.main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "a")]) == 0
    assert cli.main(["report", "--dir", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "report" / "energies.csv").read_text() == \
        (tmp_path / "a" / "energies.csv").read_text()


def test_cli_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, {"model": {"d": 3, "p": 9.0}})
    assert cli.main(["simulate", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    bypass = write(tmp_path, {"model": {"d": 3, "p": 9.0, "allow_outside_a1": True}}, "b.json")
    assert cli.main(["verify", "--config", str(bypass), "--output", str(tmp_path / "v")]) == 2


def test_linear_verify_skips_nonlinear_checks(tmp_path):
    cfg = write(tmp_path, {"nonlinearity_on": False})
    code = cli.main(["verify", "--config", str(cfg), "--only", "2,11", "--output", str(tmp_path / "v")])
    assert code == 0
    text = (tmp_path / "v" / "verification.csv").read_text()
    assert "skip" in text and "pass" in text


def test_sweep(tmp_path):
    cfg = write(tmp_path, {**SMALL, "diagnostics": {"kappa_list": [0.5]}})
    code = cli.main(["sweep", "--config", str(cfg), "--axis", "p=pc+0.2,3.0", "--axis", "d=3,4",
                     "--workers", "1", "--output", str(tmp_path / "sw")])
    assert code == 0
    with open(tmp_path / "sw" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    # (4, 3.0) sits at the energy-critical exponent and is recorded as a failed point
    assert [r["status"] == "ok" for r in rows] == [True, True, True, False]


def test_parse_axis():
    assert cli.parse_axis("d=3,4") == ("d", [3, 4])
    with pytest.raises(ConfigError):
        cli.parse_axis("colour=red")

"""Run orchestration: recorders from a config, report files, manifests and re-derivation."""
from __future__ import annotations

import csv
import itertools
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .energy import EnergyRecorder, EnergySeries, weighted_energy
from .errors import ContractViolation, RecorderError, UnstableRunError
from .estimates import (SpaceTimeIntegrals, SpaceTimeRecorder, WeightSpec, decay_fit,
                        morawetz_inequality, weighted_morawetz)
from .flux import AxisRecorder, AxisSeries, ConeFluxRecorder, FluxRecorder, flux_balance
from .mathlib import c_d
from .scattering import (LebesgueRecorder, SnapshotRecorder, extract_profile, interior_energy,
                         s_exponent, s_norm, scatter_defect, w_exponent)
from .solver import FieldState, FieldView, RadialGrid, RunReport, SolverConfig, evolve

OUTPUT_FILES = ("energies.csv", "cones.csv", "regions.csv", "morawetz.csv", "weighted.csv",
                "decay.json", "scattering.json", "manifest.json", "traces.npz")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_json(path: Path, obj):
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_recorders(cfg) -> list:
    diag = cfg.diagnostics
    axis = AxisRecorder()
    recs = [axis]
    if diag["energies"] or diag["kappa_list"] or diag["interior_c_list"]:
        recs.append(EnergyRecorder(cfg.stride, diag["interior_c_list"], axis))
    cones = diag["cones"]
    if cones.get("taus") or cones.get("ss"):
        recs.append(ConeFluxRecorder(cones.get("taus", []), cones.get("ss", [])))
    if cfg.regions:
        recs.append(FluxRecorder(cfg.regions))
    if diag["morawetz_R"] or cfg.weights:
        recs.append(SpaceTimeRecorder([cfg.solver.t_final], cfg.weights))
    if diag["scattering_T_list"]:
        recs.append(SnapshotRecorder(diag["scattering_T_list"]))
        exps = sorted({s_exponent(cfg.params), w_exponent(cfg.params.d)})
        recs.append(LebesgueRecorder(exps))
    return recs


def run_config(cfg) -> RunReport:
    return evolve(cfg.initial, cfg.grid, cfg.params, cfg.solver, build_recorders(cfg))


def _energy0(run) -> float:
    view = FieldView(run.grid, run.params, run.initial_state,
                     nonlinear=run.config.nonlinearity_on)
    return view.integral(view.energy_density)


def energy_rows(run):
    en = run.diagnostics.get("energies")
    if not isinstance(en, EnergySeries):
        return ["t"], []
    cs = sorted(en.interior)
    header = ["t", "E", "E_minus", "E_plus", "split_defect", "hardy", "potential",
              "mu_cumulative"] + [f"interior_c{c:g}" for c in cs]
    rows = []
    for i in range(en.t.size):
        rows.append([en.t[i], en.E[i], en.E_minus[i], en.E_plus[i],
                     en.E_minus[i] + en.E_plus[i] - en.E[i], en.hardy[i], en.potential[i],
                     en.mu[i]] + [en.interior[c][i] for c in cs])
    return header, rows


def cone_rows(run, E):
    header = ["cone_kind", "label", "Q_minus", "Q_plus", "Q_sum", "E", "empty"]
    cones = run.diagnostics.get("cones")
    rows = []
    if cones:
        for kind in ("forward", "backward"):
            s = cones[kind]
            for i in range(s.labels.size):
                rows.append([kind, s.labels[i], s.Q_minus[i], s.Q_plus[i], s.Q_sum[i], E,
                             bool(s.empty[i])])
    return header, rows


def region_rows(run, regions, E):
    width = max([len(r.segments) for r in regions] + [0])
    header = ["region", "energy_type", "n_segments"]
    for i in range(width):
        header += [f"seg{i}_kind", f"seg{i}_value"]
    header += ["mu_term", "morawetz_integral", "residual", "relative_residual"]
    rows, ledgers = [], []
    for reg in regions:
        for et in ("inward", "outward"):
            led = flux_balance(reg, run, run.params, et)
            ledgers.append(led)
            row = [reg.name, et, len(led.per_segment)]
            for seg, val in led.per_segment:
                row += [seg.kind, val]
            row += [""] * (2 * (width - len(led.per_segment)))
            row += [led.mu_term, led.morawetz_integral, led.residual,
                    abs(led.residual) / led.scale(E) if led.scale(E) else 0.0]
            rows.append(row)
    return header, rows, ledgers


def morawetz_rows(run, Rs):
    header = ["R", "interior_term", "sphere_term", "exterior_term", "total", "bound"]
    rows = []
    for R in Rs:
        m = morawetz_inequality(run, run.params, float(R))
        rows.append([float(R), m.interior_term, m.sphere_term, m.exterior_term, m.total, m.bound])
    return header, rows


def weighted_rows(run, weights):
    header = ["kind", "kappa", "gamma", "lhs", "mu_weighted", "c_d_mu_weighted", "K1",
              "E_kappa", "ratio"]
    rows = []
    for w in weights:
        lhs, muw, K1 = weighted_morawetz(run, run.params, w)
        Ek = _weighted_energy(run, w.kappa)
        cmu = c_d(run.params.d) * muw
        rows.append([w.kind, w.kappa, w.gamma, lhs, muw, cmu, K1, Ek,
                     (cmu + lhs) / K1 if K1 > 0 else 0.0])
    return header, rows


def _weighted_energy(run, kappa):
    view = FieldView(run.grid, run.params, run.initial_state,
                     nonlinear=run.config.nonlinearity_on)
    return weighted_energy(view, run.grid, run.params, kappa)


def decay_summary(run, kappas):
    en = run.diagnostics.get("energies")
    out = []
    if not isinstance(en, EnergySeries) or en.t.size < 3:
        return out
    t_f = float(en.t[-1])
    for k in kappas:
        fit = decay_fit(en.t, en.E_minus, float(k), _weighted_energy(run, float(k)),
                        sup_window=(min(5.0, t_f), min(40.0, t_f)))
        d = fit.as_dict()
        d["fit_window"] = list(fit.fit_window)
        d["dropped_nonpositive"] = fit.dropped_nonpositive
        out.append(d)
    return out


def scattering_summary(run, cfg, E):
    Ts = sorted(float(T) for T in cfg.diagnostics["scattering_T_list"])
    out = {"T_list": Ts, "defects": {}, "profile_energies": {}, "S_norm_truncations": [],
           "interior_energy_series_ref": {}}
    if Ts:
        cache = {}
        for a, b in itertools.combinations(Ts, 2):
            out["defects"][f"{a:g},{b:g}"] = scatter_defect(run, a, b, cache)
        for T in Ts:
            if T not in cache:
                cache[T] = extract_profile(run, T)
            out["profile_energies"][f"{T:g}"] = cache[T].energy_norm
        out["energy_norm_bound"] = math.sqrt(2.0 * E)
        spans = sorted(set(Ts + [cfg.solver.t_final]))
        out["S_norm_truncations"] = [[T, s_norm(run, run.params, (0.0, T)).value] for T in spans]
    for c in cfg.diagnostics["interior_c_list"]:
        t, vals = interior_energy(run, float(c))
        out["interior_energy_series_ref"][f"{c:g}"] = {"t": t, "energy": vals}
    return out


def manifest_dict(cfg, status="ok", error=None, summary=None):
    return {
        "package": "wavelab",
        "version": __version__,
        "config": cfg.resolved(),
        "status": status,
        "error": error,
        "summary": summary or {},
        "outputs": list(OUTPUT_FILES),
    }


def save_traces(path: Path, run, cfg):
    arrays = {
        "grid": np.array([run.grid.d, run.grid.h, run.grid.n], dtype=float),
        "model": np.array([run.params.p, float(run.config.nonlinearity_on),
                           float(run.params.allow_outside_a1)]),
        "time": np.array([run.config.t_final, run.config.cfl, run.dt, run.n_steps], dtype=float),
        "initial_u": run.initial_state.u,
        "initial_v": run.initial_state.v,
        "final_u": run.final_state.u,
        "final_v": run.final_state.v,
    }
    en = run.diagnostics.get("energies")
    if isinstance(en, EnergySeries):
        for name in ("t", "E", "E_minus", "E_plus", "hardy", "potential", "mu"):
            arrays[f"energies_{name}"] = getattr(en, name)
        cs = sorted(en.interior)
        arrays["interior_c"] = np.array(cs, dtype=float)
        for i, c in enumerate(cs):
            arrays[f"interior_{i}"] = en.interior[c]
    ax = run.diagnostics.get("axis")
    if isinstance(ax, AxisSeries):
        arrays["axis_t"] = ax.t
        arrays["axis_value_sq"] = ax.value_sq
    st = run.diagnostics.get("spacetime")
    if isinstance(st, SpaceTimeIntegrals):
        t, acc, w = st.at()
        arrays["spacetime_t"] = np.array([t])
        for k, v in acc.items():
            arrays[f"spacetime_{k}"] = v
        arrays["spacetime_weights"] = w
        arrays["weights_json"] = np.array(json.dumps(
            [{"kind": s.kind, "kappa": s.kappa, "gamma": s.gamma,
              "table_r": list(s.table_r), "table_a": list(s.table_a)} for s in st.weights]))
    np.savez_compressed(path, **arrays)


def load_traces(path) -> RunReport:
    """Rebuild a diagnostics-only run from ``traces.npz``."""
    from .mathlib import ModelParams

    z = np.load(path, allow_pickle=False)
    d, h, n = z["grid"]
    grid = RadialGrid(int(d), float(h), int(n))
    p, nonlinear, bypass = z["model"]
    params = ModelParams(int(d), float(p), bool(bypass))
    t_final, cfl, dt, n_steps = z["time"]
    config = SolverConfig(float(t_final), float(cfl), bool(nonlinear))
    diags = {}
    if "energies_t" in z:
        cs = [float(c) for c in z["interior_c"]]
        diags["energies"] = EnergySeries(
            t=z["energies_t"], E=z["energies_E"], E_minus=z["energies_E_minus"],
            E_plus=z["energies_E_plus"], hardy=z["energies_hardy"],
            potential=z["energies_potential"],
            interior={c: z[f"interior_{i}"] for i, c in enumerate(cs)}, mu=z["energies_mu"])
    axis = None
    if "axis_t" in z:
        axis = AxisSeries(z["axis_t"], z["axis_value_sq"], grid.d)
        diags["axis"] = axis
    if "spacetime_t" in z:
        t = float(z["spacetime_t"][0])
        acc = {k[len("spacetime_"):]: z[k] for k in z.files
               if k.startswith("spacetime_") and k not in ("spacetime_t", "spacetime_weights")}
        weights = [WeightSpec(s["kind"], s["kappa"], s["gamma"], tuple(s["table_r"]),
                              tuple(s["table_a"]))
                   for s in json.loads(str(z["weights_json"]))]
        diags["spacetime"] = SpaceTimeIntegrals(grid, t, {t: (t, acc, z["spacetime_weights"])},
                                                weights, axis)
    init = FieldState(0.0, z["initial_u"], z["initial_v"])
    final = FieldState(float(t_final), z["final_u"], z["final_v"])
    return RunReport(grid, params, config, float(dt), int(n_steps), init, final, diags)


def write_outputs(run, cfg, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    E = _energy0(run)
    write_csv(out / "energies.csv", *energy_rows(run))
    write_csv(out / "cones.csv", *cone_rows(run, E))
    header, rows, ledgers = region_rows(run, cfg.regions, E)
    write_csv(out / "regions.csv", header, rows)
    write_csv(out / "morawetz.csv", *morawetz_rows(run, cfg.diagnostics["morawetz_R"]))
    write_csv(out / "weighted.csv", *weighted_rows(run, cfg.weights))
    write_json(out / "decay.json", decay_summary(run, cfg.diagnostics["kappa_list"]))
    write_json(out / "scattering.json", scattering_summary(run, cfg, E))
    save_traces(out / "traces.npz", run, cfg)
    en = run.diagnostics.get("energies")
    summary = {"E0": E, "n_steps": run.n_steps, "dt": run.dt}
    if isinstance(en, EnergySeries):
        summary["E_minus_final"] = float(en.E_minus[-1])
        summary["max_relative_energy_drift"] = float(np.max(np.abs(en.E - en.E[0])) / E) if E else 0.0
    if ledgers:
        summary["max_relative_residual"] = max(
            abs(led.residual) / led.scale(E) if led.scale(E) else 0.0 for led in ledgers)
    return summary


def simulate(cfg, out_dir=None):
    """Run ``cfg`` and write every report file; returns (run, summary).

    On a numerical failure the manifest records the failing step and the
    error is re-raised.
    """
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        run = run_config(cfg)
    except (UnstableRunError, RecorderError) as exc:
        err = {"type": type(exc).__name__, "message": str(exc), "step": getattr(exc, "step", None)}
        write_json(out / "manifest.json", manifest_dict(cfg, "error", err))
        raise
    summary = write_outputs(run, cfg, out)
    write_json(out / "manifest.json", manifest_dict(cfg, "ok", None, summary))
    return run, summary


def report(run_dir) -> dict:
    """Re-derive the estimate reports of a finished run from its stored traces."""
    run_dir = Path(run_dir)
    traces = run_dir / "traces.npz"
    manifest = run_dir / "manifest.json"
    if not traces.exists() or not manifest.exists():
        raise ContractViolation(f"{run_dir} does not contain traces.npz and manifest.json")
    meta = json.loads(manifest.read_text())
    run = load_traces(traces)
    diag = meta["config"]["diagnostics"]
    out = run_dir / "report"
    out.mkdir(exist_ok=True)
    E = _energy0(run)
    write_csv(out / "energies.csv", *energy_rows(run))
    files = ["energies.csv"]
    if "spacetime" in run.diagnostics:
        write_csv(out / "morawetz.csv", *morawetz_rows(run, diag["morawetz_R"]))
        write_csv(out / "weighted.csv", *weighted_rows(run, run.diagnostics["spacetime"].weights))
        files += ["morawetz.csv", "weighted.csv"]
    write_json(out / "decay.json", decay_summary(run, diag["kappa_list"]))
    files.append("decay.json")
    return {"E0": E, "dir": str(out), "files": files}

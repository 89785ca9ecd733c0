"""Command-line entry point: simulate, verify, sweep and report."""
from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import RunConfig, resolve_output
from .errors import ConfigError, ContractViolation, DomainError, WavelabError
from .mathlib import critical_exponents, kappa_0

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
SWEEP_AXES = ("d", "p", "kappa", "amplitude")

log = logging.getLogger("wavelab")


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    data = _read_json(path)
    # a manifest carries the resolved config under "config"
    if "config" in data and "version" in data:
        data = data["config"]
    return RunConfig.from_dict(data)


def _read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}", "config") from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "config")
    return data


def cmd_simulate(args) -> int:
    from .pipeline import simulate

    cfg = _load_config(args.config)
    out = resolve_output(args.output) if args.output else cfg.output_dir
    _, summary = simulate(cfg, out)
    print(f"wrote {out}")
    for k in sorted(summary):
        print(f"  {k} = {summary[k]}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import format_line, run_suite, suite_from_config

    opts = {"nonlinear": True}
    out = Path("verification")
    if args.config:
        cfg = _load_config(args.config)
        opts = suite_from_config(cfg)
        out = cfg.output_dir
    if args.output:
        out = Path(args.output)
    out = resolve_output(out)
    only = {int(x) for x in args.only.split(",")} if args.only else None
    summary = run_suite(fast=args.fast, only=only,
                        progress=lambda r: print(format_line(r), flush=True), **opts)
    summary.write(out)
    failed = [c for c in summary.checks if c.status == "fail"]
    print(f"{len(summary.checks) - len(failed)}/{len(summary.checks)} checks not failing; "
          f"results in {out / 'verification.csv'}")
    return EXIT_CHECK if failed else EXIT_OK


def parse_axis(spec: str):
    """``name=v1,v2,...``; p values may be written relative to p_c or p_e (``pc+0.1``)."""
    if "=" not in spec:
        raise ConfigError(f"axis must look like name=v1,v2, got {spec!r}", "--axis")
    name, values = spec.split("=", 1)
    name = name.strip()
    if name not in SWEEP_AXES:
        raise ConfigError(f"unknown axis {name!r}; choose from {SWEEP_AXES}", "--axis")
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not items:
        raise ConfigError(f"axis {name!r} has no values", "--axis")
    out = []
    for v in items:
        if name == "p" and v[:2] in ("pc", "pe"):
            out.append(v)
            continue
        try:
            out.append(int(v) if name == "d" else float(v))
        except ValueError as exc:
            raise ConfigError(f"bad value {v!r} for axis {name!r}", "--axis") from exc
    return name, out


def _resolve_p(value, d):
    if isinstance(value, str):
        pc, pe = critical_exponents(d)
        base = pc if value.startswith("pc") else pe
        rest = value[2:].strip()
        return base + (float(rest) if rest else 0.0)
    return float(value)


def sweep_points(template: dict, axes):
    names = [n for n, _ in axes]
    for combo in itertools.product(*[vals for _, vals in axes]):
        point = dict(zip(names, combo))
        data = copy.deepcopy(template)
        model = data.setdefault("model", {})
        if "d" in point:
            model["d"] = point["d"]
        d = int(model.get("d", 3))
        if "p" in point:
            model["p"] = _resolve_p(point["p"], d)
        elif isinstance(model.get("p"), str):
            model["p"] = _resolve_p(model["p"], d)
        if "amplitude" in point:
            data.setdefault("initial", {})["amplitude"] = point["amplitude"]
        if "kappa" in point:
            data.setdefault("diagnostics", {})["kappa_list"] = [point["kappa"]]
        yield point, data


def _run_point(job):
    from .pipeline import simulate

    index, point, data, out = job
    row = {"index": index, **{k: point.get(k, "") for k in SWEEP_AXES}}
    try:
        cfg = RunConfig.from_dict(data)
        row["d"], row["p"] = cfg.params.d, cfg.params.p
        run, summary = simulate(cfg, Path(out) / f"point_{index:03d}")
        row.update(_point_scalars(run, cfg, summary))
        row["status"] = "ok"
    except Exception as exc:  # noqa: BLE001 - recorded per point, the sweep continues
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def _point_scalars(run, cfg, summary):
    from .pipeline import decay_summary, morawetz_rows, region_rows, scattering_summary

    out = {"E": summary.get("E0", math.nan), "E_minus_final": summary.get("E_minus_final", math.nan)}
    fits = decay_summary(run, cfg.diagnostics["kappa_list"])
    out["decay_slope"] = fits[0]["fitted_slope"] if fits else math.nan
    try:
        out["kappa0"] = kappa_0(cfg.params.d, cfg.params.p)
    except (ArithmeticError, DomainError):
        out["kappa0"] = math.nan
    sc = scattering_summary(run, cfg, out["E"]) if cfg.diagnostics["scattering_T_list"] else {}
    defects = list(sc.get("defects", {}).values())
    out["defect_last"] = defects[-1] if defects else math.nan
    rows = morawetz_rows(run, cfg.diagnostics["morawetz_R"])[1] if "spacetime" in run.diagnostics else []
    out["morawetz_ratio_max"] = max((r[4] / r[5] for r in rows), default=math.nan)
    if cfg.regions:
        out["max_balance_residual"] = max(r[-1] for r in region_rows(run, cfg.regions, out["E"])[1])
    else:
        out["max_balance_residual"] = math.nan
    return out


SWEEP_COLUMNS = ("index", "d", "p", "kappa", "amplitude", "status", "E", "E_minus_final",
                 "decay_slope", "kappa0", "defect_last", "morawetz_ratio_max", "max_balance_residual")


def cmd_sweep(args) -> int:
    from .pipeline import write_csv

    template = _read_json(args.config)
    if "config" in template and "version" in template:
        template = template["config"]
    axes = [parse_axis(a) for a in args.axis]
    if len({n for n, _ in axes}) != len(axes):
        raise ConfigError("each axis may appear once", "--axis")
    out = resolve_output(args.output or template.get("output_dir", "runs/sweep"))
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(i, point, data, str(out)) for i, (point, data) in enumerate(sweep_points(template, axes))]
    workers = args.workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) == 1:
        rows = [_run_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    rows.sort(key=lambda r: r["index"])
    write_csv(out / "sweep.csv", SWEEP_COLUMNS,
              [[r.get(c, "") for c in SWEEP_COLUMNS] for r in rows])
    bad = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows)} points, {len(bad)} failed; wrote {out / 'sweep.csv'}")
    for r in bad:
        print(f"  point {r['index']}: {r['status']}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .pipeline import report

    info = report(args.dir)
    print(f"re-derived {', '.join(info['files'])} in {info['dir']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavelab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration and write its reports")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="run directory (overrides output_dir)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--config")
    p.add_argument("--fast", action="store_true", help="skip the refinement companion runs")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--output", help="directory for verification.csv")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a template config over parameter axes")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", action="append", required=True, metavar="NAME=V1,V2")
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="re-derive estimates from a finished run directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WavelabError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Space-time norms, interior energy, free profiles and the scattering defect."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import EnergySeries
from .errors import ConsistencyError, ContractViolation, DomainError
from .flux import pl_integral
from .mathlib import (INF, ModelParams, StrichartzPair, critical_exponents, is_admissible,
                      kappa_0, radial_integral)
from .solver import FieldState, FieldView, Recorder, linear_evolve, radial_derivative


class SnapshotRecorder(Recorder):
    """Keeps copies of the state at the steps closest to the requested times."""

    name = "snapshots"

    def __init__(self, times=()):
        self.times = sorted(float(t) for t in times)

    def start(self, ctx):
        super().start(ctx)
        self.states = {}
        for T in self.times:
            if T < 0 or T > ctx.config.t_final + 1e-9:
                raise DomainError(f"snapshot time {T} is outside [0, {ctx.config.t_final}]")

    def observe(self, view: FieldView):
        # a time halfway between two steps goes to the earlier one
        half = 0.5 * self.ctx.dt * (1 + 1e-9)
        for T in self.times:
            if T not in self.states and abs(view.t - T) <= half:
                self.states[T] = (view.step, view.state.copy())

    def result(self):
        return dict(self.states)


class LebesgueRecorder(Recorder):
    """Per-step spatial integrals  |S^{d-1}| int |u|^r rho^{d-1} drho  for each r."""

    name = "lebesgue"

    def __init__(self, exponents=()):
        self.exponents = tuple(float(r) for r in exponents)
        for r in self.exponents:
            if r < 1 or math.isinf(r):
                raise DomainError(f"space exponent must be finite and >= 1, got {r}")

    def start(self, ctx):
        super().start(ctx)
        self.t = []
        self.vals = {r: [] for r in self.exponents}

    def observe(self, view: FieldView):
        self.t.append(view.t)
        au = np.abs(view.u)
        for r in self.exponents:
            self.vals[r].append(view.integral(au ** r))

    def result(self):
        return LebesgueSeries(np.array(self.t), {r: np.array(v) for r, v in self.vals.items()})


@dataclass
class LebesgueSeries:
    t: np.ndarray
    integrals: dict


@dataclass
class SpaceTimeNorm:
    q: float
    r: float
    value: float
    span: tuple


def s_exponent(params: ModelParams) -> float:
    return (params.d + 1) * (params.p - 1) / 2.0


def w_exponent(d: int) -> float:
    return 2.0 * (d + 1) / (d - 1)


def _lebesgue(run) -> LebesgueSeries:
    diags = getattr(run, "diagnostics", run)
    for v in diags.values():
        if isinstance(v, LebesgueSeries):
            return v
    raise ContractViolation("run has no Lebesgue integrals; attach a LebesgueRecorder")


def spacetime_norm(run, q: float, r: float, span=None) -> SpaceTimeNorm:
    """L^q_t L^r_x norm over ``span``; q = inf takes the max over recorded times."""
    if q < 1 or r < 1:
        raise DomainError(f"exponents must be >= 1, got q={q}, r={r}")
    if math.isinf(r):
        raise DomainError("r must be finite")
    series = _lebesgue(run)
    key = next((k for k in series.integrals if abs(k - r) < 1e-12), None)
    if key is None:
        raise ContractViolation(f"space exponent {r} was not recorded")
    t = series.t
    a, b = span if span is not None else (float(t[0]), float(t[-1]))
    if a < t[0] - 1e-12 or b > t[-1] + 1e-9 or b < a:
        raise DomainError(f"span [{a}, {b}] is outside the run [{t[0]}, {t[-1]}]")
    b = min(b, float(t[-1]))
    spatial = np.clip(series.integrals[key], 0.0, None) ** (1.0 / r)
    if math.isinf(q):
        inside = (t >= a - 1e-12) & (t <= b + 1e-12)
        val = float(spatial[inside].max()) if inside.any() else 0.0
    else:
        val = pl_integral(t, spatial ** q, a, b) ** (1.0 / q)
    return SpaceTimeNorm(q, r, val, (a, b))


def s_norm(run, params: ModelParams, span=None) -> SpaceTimeNorm:
    e = s_exponent(params)
    return spacetime_norm(run, e, e, span)


def w_norm(run, params: ModelParams, span=None) -> SpaceTimeNorm:
    e = w_exponent(params.d)
    return spacetime_norm(run, e, e, span)


def _energies(run) -> EnergySeries:
    diags = getattr(run, "diagnostics", run)
    for v in diags.values():
        if isinstance(v, EnergySeries):
            return v
    raise ContractViolation("run has no energy series; attach an EnergyRecorder")


def interior_energy(run, c: float):
    """(t, energy inside |x| < c t) as recorded by the energy recorder."""
    if not 0.0 < c < 1.0:
        raise DomainError(f"c must lie in (0, 1), got {c}")
    series = _energies(run)
    key = next((k for k in series.interior if abs(k - c) < 1e-12), None)
    if key is None:
        raise ContractViolation(f"interior energy for c = {c} was not recorded")
    return series.t, series.interior[key]


@dataclass
class ScatterProfile:
    T: float
    v0: np.ndarray
    v1: np.ndarray
    energy_norm: float


def energy_norm(u, v, grid) -> float:
    """(int |u_r|^2 + |v|^2 dx)^{1/2}."""
    ur = radial_derivative(np.asarray(u, dtype=float), grid.h)
    return math.sqrt(radial_integral(ur * ur + np.asarray(v) ** 2, grid.d, grid))


def _snapshot(run, T):
    diags = getattr(run, "diagnostics", run)
    snaps = diags.get("snapshots")
    if not snaps:
        raise ContractViolation("run has no snapshots; attach a SnapshotRecorder")
    key = next((k for k in snaps if abs(k - T) < 1e-9), None)
    if key is None:
        raise ContractViolation(f"no snapshot at T = {T}; have {sorted(snaps)}")
    return snaps[key]


def extract_profile(run, T: float) -> ScatterProfile:
    """Pull the state at ``T`` back to t = 0 with the free flow."""
    step, state = _snapshot(run, T)
    grid = run.grid
    start = FieldState(step * run.dt, state.u, state.v)
    try:
        back = linear_evolve(start, grid, run.params, 0.0, dt=run.dt)
    except DomainError as exc:
        raise DomainError(f"{exc}; pulling back from T = {T} needs r_max >= "
                          f"support + 2T") from exc
    return ScatterProfile(T, back.u, back.v, energy_norm(back.u, back.v, grid))


def scatter_defect(run, T1: float, T2: float, profiles=None) -> float:
    """Energy-norm distance between the free profiles extracted at T1 and T2."""
    if not T1 < T2:
        raise DomainError(f"need T1 < T2, got {T1}, {T2}")
    cache = profiles if profiles is not None else {}
    for T in (T1, T2):
        if T not in cache:
            cache[T] = extract_profile(run, T)
    a, b = cache[T1], cache[T2]
    return energy_norm(b.v0 - a.v0, b.v1 - a.v1, run.grid)


@dataclass(frozen=True)
class InterconstantSet:
    q1: float
    r1: float
    q2: float
    r2: float
    k1: float
    k2: float


def _inv(x):
    return 0.0 if math.isinf(x) else 1.0 / x


def check_interconstants(params: ModelParams, tol: float = 1e-10) -> InterconstantSet:
    """Exponents used to close the Strichartz bootstrap; all identities asserted."""
    d, p = params.d, params.p
    pc, pe = critical_exponents(d)
    if not 4 <= d <= 8 or not pc < p < pe:
        raise DomainError(f"need 4 <= d <= 8 and {pc} < p < {pe}, got ({d}, {p})")
    k0 = kappa_0(d, p)
    q1 = INF if k0 == 0 else (p + 1) / k0
    r1 = p + 1.0
    q2, r2 = 2.0, 2.0 * d / (d - 3)
    D = 2.0 * d / (p + 1) - (d - 3)
    k1 = (4.0 * d / (d + 1) - (d - 3) * (p - 1)) / D
    k2 = (-4.0 * d / (d + 1) + 2.0 * d * (p - 1) / (p + 1)) / D
    target = 2.0 / (d + 1)
    checks = {
        "k1 + k2 = p - 1": k1 + k2 - (p - 1),
        "k1/q1 + k2/q2 = 2/(d+1)": k1 * _inv(q1) + k2 / q2 - target,
        "k1/r1 + k2/r2 = 2/(d+1)": k1 / r1 + k2 / r2 - target,
    }
    for name, err in checks.items():
        if abs(err) > tol:
            raise ConsistencyError(f"{name} fails by {err:.3e} at (d, p) = ({d}, {p})")
    if not is_admissible(StrichartzPair(q2, r2, 1.0), d):
        raise ConsistencyError(f"(2, {r2}) is not 1-admissible in d = {d}")
    if not (k1 > 0 and k2 > 0):
        raise ConsistencyError(f"k1 = {k1}, k2 = {k2} must both be positive")
    return InterconstantSet(q1, r1, q2, r2, k1, k2)

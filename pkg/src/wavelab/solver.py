"""Radial leapfrog solver for  u_tt - u_rr - (d-1)/r u_r = -|u|^{p-1} u.

The unknown is sampled at cell centers ``r_j = (j + 1/2) h``.  The radial
Laplacian is written in conservative flux form over spherical shells; the
face at ``r = 0`` carries no flux and the outer boundary is a homogeneous
Dirichlet ghost that the causal padding keeps out of reach.  Time stepping
is velocity Verlet (kick-drift-kick), which is symplectic and exactly
time-reversible.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import (
    ConfigError,
    ContractViolation,
    DomainError,
    IndeterminateOrderError,
    RecorderError,
    UnstableRunError,
)
from .mathlib import ModelParams, lambda_d, radial_integral, sphere_area

SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class RadialGrid:
    d: int
    h: float
    n: int

    def __post_init__(self):
        if self.n < 4:
            raise DomainError("grid needs at least 4 cells")
        if not self.h > 0:
            raise DomainError("cell width must be positive")

    @classmethod
    def from_extent(cls, d, r_max, n):
        return cls(d=int(d), h=float(r_max) / int(n), n=int(n))

    @property
    def r_max(self) -> float:
        return self.n * self.h

    @cached_property
    def r(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def faces(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @cached_property
    def rw(self) -> np.ndarray:
        """r_j^{d-1}, the radial volume factor at cell centers."""
        return self.r ** (self.d - 1)

    @cached_property
    def shell_volume(self) -> np.ndarray:
        """Exact shell volume of each cell divided by |S^{d-1}| h."""
        f = self.faces
        return (f[1:] ** self.d - f[:-1] ** self.d) / (self.d * self.h)

    @cached_property
    def _lap_coeffs(self):
        area = self.faces[1:] ** (self.d - 1)  # outer face of each cell
        inv = 1.0 / (self.h * self.h * self.shell_volume)
        return area, inv

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        area, inv = self._lap_coeffs
        flux = area * np.diff(u, append=0.0)
        out = flux.copy()
        out[1:] -= flux[:-1]
        out *= inv
        return out

    @cached_property
    def max_stable_cfl(self) -> float:
        """Largest dt/h for which the linear leapfrog update is stable."""
        area, _ = self._lap_coeffs
        w = self.shell_volume
        diag = (area + np.concatenate(([0.0], area[:-1]))) / w
        off = area[:-1] / np.sqrt(w[:-1] * w[1:])
        top = eigvalsh_tridiagonal(diag, -off, select="i",
                                   select_range=(self.n - 1, self.n - 1))[0]
        return 2.0 / math.sqrt(top)

    def interp(self, profile: np.ndarray, radius) -> np.ndarray | float:
        """Linear interpolation of a cell-centered profile."""
        return np.interp(radius, self.r, profile)


@dataclass
class FieldState:
    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ContractViolation(
                f"u and v must be 1-d arrays of equal length, got {self.u.shape} and {self.v.shape}"
            )

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.u.copy(), self.v.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())

    def support_radius(self, grid: RadialGrid, tol=SUPPORT_TOL) -> float:
        """Outer face of the last cell where |u| or |v| exceeds ``tol``."""
        scale = max(float(np.abs(self.u).max()), float(np.abs(self.v).max()), 1.0)
        idx = np.nonzero((np.abs(self.u) > tol * scale) | (np.abs(self.v) > tol * scale))[0]
        if idx.size == 0:
            return 0.0
        return float(grid.faces[idx[-1] + 1])


_KINDS = ("gaussian", "compact-bump", "ring")
_PROFILES = ("zero", "time-symmetric", "outgoing-biased")


@dataclass(frozen=True)
class InitialData:
    """Radial initial data ``(u0, u1)``.

    ``gaussian``      A exp(-x^2),                      x = (r - center)/width
    ``compact-bump``  A (1 - x^2)^4 on |x| < 1, else 0
    ``ring``          A exp(1 - 1/(1 - x^2)) on |x| < 1 (C-infinity shell)

    ``outgoing-biased`` chooses u1 = -(d/dr u0 + (d-1)/2 u0/r), which makes
    the L_+ component of the data vanish.
    """

    kind: str = "compact-bump"
    amplitude: float = 1.0
    center: float = 2.0
    width: float = 1.0
    velocity_profile: str = "zero"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; choose from {_KINDS}", "initial.kind")
        if self.velocity_profile not in _PROFILES:
            raise ConfigError(f"unknown velocity profile {self.velocity_profile!r}",
                              "initial.velocity_profile")
        if not self.width > 0:
            raise ConfigError("width must be positive", "initial.width")
        if self.center < 0:
            raise ConfigError("center must be >= 0", "initial.center")

    def support_radius(self) -> float:
        if self.kind == "gaussian":
            # exp(-x^2) < 1e-16 beyond x = 6.07
            return self.center + 6.1 * self.width
        return self.center + self.width

    def _shape(self, r):
        x = (r - self.center) / self.width
        if self.kind == "gaussian":
            g = np.exp(-x * x)
            return g, -2.0 * x * g / self.width
        inside = np.abs(x) < 1.0
        one = np.where(inside, 1.0 - x * x, 1.0)
        if self.kind == "compact-bump":
            g = np.where(inside, one ** 4, 0.0)
            dg = np.where(inside, -8.0 * x * one ** 3, 0.0)
        else:
            g = np.where(inside, np.exp(1.0 - 1.0 / one), 0.0)
            dg = np.where(inside, g * (-2.0 * x / (one * one)), 0.0)
        return g, dg / self.width

    def profiles(self, r: np.ndarray, d: int):
        """Return ``(u0, u1)`` sampled at radii ``r`` (all positive)."""
        g, dg = self._shape(np.asarray(r, dtype=float))
        u0 = self.amplitude * g
        if self.velocity_profile == "outgoing-biased":
            u1 = -(self.amplitude * dg + 0.5 * (d - 1) * u0 / r)
        else:
            u1 = np.zeros_like(u0)
        return u0, u1

    def state(self, grid: RadialGrid) -> FieldState:
        u0, u1 = self.profiles(grid.r, grid.d)
        return FieldState(0.0, u0, u1)


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters.

    ``dt`` is the largest step not exceeding ``cfl * h`` that divides
    ``t_final`` evenly, so runs end exactly at ``t_final``.
    """

    t_final: float
    cfl: float = 0.8
    nonlinearity_on: bool = True

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}", "grid.cfl")
        if self.t_final < 0:
            raise ConfigError("t_final must be >= 0", "time.t_final")

    def n_steps(self, grid: RadialGrid) -> int:
        if self.t_final == 0:
            return 0
        return int(math.ceil(self.t_final / (self.cfl * grid.h) - 1e-9))

    def dt(self, grid: RadialGrid) -> float:
        n = self.n_steps(grid)
        return self.cfl * grid.h if n == 0 else self.t_final / n

    def check_stability(self, grid: RadialGrid):
        limit = grid.max_stable_cfl
        if self.dt(grid) / grid.h > limit:
            raise ConfigError(
                f"cfl {self.cfl} exceeds the stability limit {limit:.4f} of the "
                f"d={grid.d} stencil; use cfl <= {math.floor(limit * 0.98 * 100) / 100}",
                "grid.cfl",
            )


def nonlinear_force(u: np.ndarray, p: float) -> np.ndarray:
    """|u|^{p-1} u, the term on the right side with its sign flipped."""
    if p == 3.0:
        return u * u * u
    return np.abs(u) ** (p - 1.0) * u


def acceleration(u, grid: RadialGrid, p: float, nonlinear: bool) -> np.ndarray:
    a = grid.laplacian(u)
    if nonlinear:
        a -= nonlinear_force(u, p)
    return a


def _check(u, v, step_index):
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise UnstableRunError(step_index)


def step(state: FieldState, grid: RadialGrid, params: ModelParams,
         config: SolverConfig, dt: float | None = None, step_index: int = 0) -> FieldState:
    """Advance ``state`` by one kick-drift-kick step."""
    dt = config.dt(grid) if dt is None else dt
    nl = config.nonlinearity_on
    v_half = state.v + 0.5 * dt * acceleration(state.u, grid, params.p, nl)
    u = state.u + dt * v_half
    v = v_half + 0.5 * dt * acceleration(u, grid, params.p, nl)
    _check(u, v, step_index)
    return FieldState(state.t + dt, u, v)


class FieldView:
    """One time level plus lazily derived pointwise quantities.

    All derived arrays live at cell centers.  ``ur`` uses centered
    differences with the even ghost ``u_{-1} = u_0`` at the axis and a
    one-sided difference at the outermost cell.
    """

    def __init__(self, grid: RadialGrid, params: ModelParams, state: FieldState,
                 step: int = 0, is_last: bool = False, nonlinear: bool = True):
        self.grid = grid
        self.params = params
        self.state = state
        self.step = step
        self.is_last = is_last
        # linear runs drop every |u|^{p+1} term from the densities
        self.nonlinear = nonlinear

    @property
    def t(self):
        return self.state.t

    @property
    def u(self):
        return self.state.u

    @property
    def v(self):
        return self.state.v

    @cached_property
    def ur(self):
        return radial_derivative(self.u, self.grid.h)

    @cached_property
    def Lu(self):
        return self.ur + 0.5 * (self.grid.d - 1) * self.u / self.grid.r

    @cached_property
    def Lplus(self):
        return self.Lu + self.v

    @cached_property
    def Lminus(self):
        return self.Lu - self.v

    @cached_property
    def abs_pow(self):
        """|u|^{p+1}"""
        if not self.nonlinear:
            return np.zeros_like(self.u)
        p = self.params.p
        if p == 3.0:
            u2 = self.u * self.u
            return u2 * u2
        return np.abs(self.u) ** (p + 1.0)

    @cached_property
    def potential(self):
        return self.abs_pow / (self.params.p + 1.0)

    @cached_property
    def hardy(self):
        """lambda_d |u|^2 / r^2"""
        return lambda_d(self.grid.d) * self.u * self.u / (self.grid.r * self.grid.r)

    @cached_property
    def e_prime(self):
        return 0.5 * self.hardy + self.potential

    @cached_property
    def morawetz(self):
        d, p = self.grid.d, self.params.p
        r = self.grid.r
        return 0.5 * self.hardy / r + (d - 1) * (p - 1) / (4.0 * (p + 1)) * self.abs_pow / r

    @cached_property
    def energy_density(self):
        return 0.5 * self.ur * self.ur + 0.5 * self.v * self.v + self.potential

    @cached_property
    def inward_density(self):
        return 0.25 * self.Lplus * self.Lplus + 0.5 * self.e_prime

    @cached_property
    def outward_density(self):
        return 0.25 * self.Lminus * self.Lminus + 0.5 * self.e_prime

    @cached_property
    def axis_value(self) -> float:
        """u(0, t) from the even parabola a + b r^2 through the two inner cells."""
        r0, r1 = self.grid.r[0], self.grid.r[1]
        u0, u1 = self.u[0], self.u[1]
        return float((u0 * r1 * r1 - u1 * r0 * r0) / (r1 * r1 - r0 * r0))

    def integral(self, density, lo=None, hi=None) -> float:
        return radial_integral(density, self.grid.d, self.grid, lo, hi)


def radial_derivative(u: np.ndarray, h: float) -> np.ndarray:
    ur = np.empty_like(u)
    ur[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    ur[0] = (u[1] - u[0]) / (2.0 * h)
    ur[-1] = (u[-1] - u[-2]) / h
    return ur


@dataclass
class RunContext:
    grid: RadialGrid
    params: ModelParams
    config: SolverConfig
    dt: float
    n_steps: int
    initial: InitialData | None = None


class Recorder:
    """Observes a run one time level at a time.

    ``start`` is called once before the first observation, ``observe`` at
    t = 0 and after every step, ``result`` once the run has finished.
    """

    name = "recorder"

    def start(self, ctx: RunContext):
        self.ctx = ctx

    def observe(self, view: FieldView):
        raise NotImplementedError

    def result(self):
        return None


@dataclass
class RunReport:
    grid: RadialGrid
    params: ModelParams
    config: SolverConfig
    dt: float
    n_steps: int
    initial_state: FieldState
    final_state: FieldState
    diagnostics: dict = field(default_factory=dict)
    initial: InitialData | None = None
    wall_time: float = 0.0

    def __getitem__(self, name):
        return self.diagnostics[name]


def check_causality(grid: RadialGrid, support: float, horizon: float):
    need = support + horizon + 2.0 * grid.h
    if grid.r_max < need:
        raise DomainError(
            f"r_max = {grid.r_max:.6g} is too small: support {support:.6g} + horizon "
            f"{horizon:.6g} + 2h needs r_max >= {need:.6g}; enlarge the grid"
        )


def evolve(initial: InitialData | FieldState, grid: RadialGrid, params: ModelParams,
           config: SolverConfig, recorders: Sequence[Recorder] = (),
           check_padding: bool = True) -> RunReport:
    """Run from t = 0 to ``config.t_final`` feeding every time level to recorders."""
    if isinstance(initial, FieldState):
        state = initial.copy()
        support = state.support_radius(grid)
        data = None
    else:
        state = initial.state(grid)
        support = initial.support_radius()
        data = initial
    if state.u.shape != (grid.n,):
        raise ContractViolation("initial state does not match the grid")
    if check_padding:
        check_causality(grid, support, config.t_final)
    config.check_stability(grid)
    _check(state.u, state.v, 0)

    n_steps = config.n_steps(grid)
    dt = config.dt(grid)
    ctx = RunContext(grid, params, config, dt, n_steps, data)
    for rec in recorders:
        rec.start(ctx)

    def notify(st, k):
        view = FieldView(grid, params, st, k, k == n_steps, config.nonlinearity_on)
        for rec in recorders:
            try:
                rec.observe(view)
            except Exception as exc:  # noqa: BLE001 - re-raised with context
                raise RecorderError(getattr(rec, "name", type(rec).__name__), k, exc) from exc

    tic = time.perf_counter()
    initial_state = state.copy()
    notify(state, 0)
    p, nl = params.p, config.nonlinearity_on
    u, v = state.u, state.v
    acc = acceleration(u, grid, p, nl)
    t0 = state.t
    for k in range(1, n_steps + 1):
        v = v + 0.5 * dt * acc
        u = u + dt * v
        acc = acceleration(u, grid, p, nl)
        v = v + 0.5 * dt * acc
        _check(u, v, k)
        state = FieldState(t0 + k * dt, u, v)
        notify(state, k)
    report = RunReport(grid, params, config, dt, n_steps, initial_state, state,
                       initial=data)
    report.wall_time = time.perf_counter() - tic
    for rec in recorders:
        report.diagnostics[getattr(rec, "name", type(rec).__name__)] = rec.result()
    return report


def linear_evolve(state: FieldState, grid: RadialGrid, params: ModelParams,
                  t_target: float, dt: float | None = None, cfl: float = 0.8,
                  check_padding: bool = True) -> FieldState:
    """Free evolution to ``t_target`` (earlier or later than ``state.t``).

    Backward evolution flips the velocity, steps forward and flips back,
    which inverts the forward leapfrog map exactly in exact arithmetic.
    """
    span = t_target - state.t
    if span == 0:
        return state.copy()
    if dt is None:
        n = int(math.ceil(abs(span) / (cfl * grid.h) - 1e-9))
        dt = abs(span) / n
    else:
        n = int(round(abs(span) / dt))
        if abs(n * dt - abs(span)) > 1e-9 * max(1.0, abs(span)):
            raise DomainError(f"time span {span} is not a whole number of steps of {dt}")
    if check_padding:
        check_causality(grid, state.support_radius(grid), abs(span))
    if dt / grid.h > grid.max_stable_cfl:
        raise ConfigError(f"dt/h = {dt / grid.h:.4f} exceeds the stability limit", "grid.cfl")
    sign = 1.0 if span > 0 else -1.0
    u = state.u.copy()
    v = sign * state.v
    acc = grid.laplacian(u)
    for k in range(1, n + 1):
        v = v + 0.5 * dt * acc
        u = u + dt * v
        acc = grid.laplacian(u)
        v = v + 0.5 * dt * acc
        _check(u, v, k)
    return FieldState(t_target, u, sign * v)


def richardson_order(coarse: float, medium: float, fine: float) -> float:
    """log2(|O_h - O_{h/2}| / |O_{h/2} - O_{h/4}|)."""
    num = abs(coarse - medium)
    den = abs(medium - fine)
    if den < 1e-14 or num < 1e-14:
        raise IndeterminateOrderError(
            f"differences too small to estimate an order: {num:.3e}, {den:.3e}"
        )
    return math.log2(num / den)


def convergence_order(initial: InitialData, params: ModelParams, config: SolverConfig,
                      r_max: float, cells: int,
                      observable: Callable[[RunReport], float],
                      recorders_factory: Callable[[], Sequence[Recorder]] = lambda: ()) -> float:
    """Richardson order of ``observable`` over cells, 2*cells, 4*cells."""
    values = []
    for m in (1, 2, 4):
        grid = RadialGrid.from_extent(params.d, r_max, cells * m)
        values.append(observable(evolve(initial, grid, params, config, recorders_factory())))
    return richardson_order(*values)


def save_state(path, state: FieldState, grid: RadialGrid, params: ModelParams):
    """Write ``state`` as ``r,u,v`` CSV plus a JSON sidecar with the grid."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("r,u,v\n")
        for r, u, v in zip(grid.r, state.u, state.v):
            fh.write(f"{r:.17g},{u:.17g},{v:.17g}\n")
    meta = {"d": grid.d, "p": params.p, "h": grid.h, "n": grid.n, "t": state.t}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_state(path):
    """Inverse of :func:`save_state`; returns ``(state, grid, p)``."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    grid = RadialGrid(d=int(meta["d"]), h=float(meta["h"]), n=int(meta["n"]))
    if data.shape[0] != grid.n:
        raise ContractViolation(f"{path} has {data.shape[0]} rows, sidecar says n={grid.n}")
    return FieldState(float(meta["t"]), data[:, 1], data[:, 2]), grid, float(meta["p"])


def with_linear(config: SolverConfig) -> SolverConfig:
    return replace(config, nonlinearity_on=False)


__all__ = [
    "RadialGrid", "FieldState", "InitialData", "SolverConfig", "FieldView", "Recorder",
    "RunContext", "RunReport", "step", "evolve", "linear_evolve", "richardson_order",
    "convergence_order", "save_state", "load_state", "nonlinear_force", "sphere_area",
]

"""Morawetz-type space-time bounds, weighted estimates and decay of the inward energy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DomainError, PreconditionError
from .flux import AxisSeries, pl_integral
from .mathlib import ModelParams, c_d, cell_weights, sphere_area
from .solver import FieldView, InitialData, RadialGrid, Recorder

# per-cell quantities integrated in time by SpaceTimeRecorder
_FIELDS = ("ur2", "v2", "pow", "u2", "M", "hardy_r", "pow_r")


@dataclass(frozen=True)
class WeightSpec:
    """Radial weight a(r) for the weighted Morawetz estimate.

    ``kind='power'`` is a(r) = r**kappa; ``kind='table'`` interpolates
    ``(table_r, table_a)`` linearly and is constant beyond the last node.
    """

    kind: str = "power"
    kappa: float = 0.5
    gamma: float | None = None
    table_r: tuple = ()
    table_a: tuple = ()

    def __post_init__(self):
        if self.kind not in ("power", "table"):
            raise PreconditionError(f"unknown weight kind {self.kind!r}")
        if self.gamma is None:
            object.__setattr__(self, "gamma", float(self.kappa) if self.kind == "power" else 1.0)
        if not 0.0 < self.gamma <= 1.0 and not (self.kind == "power" and self.kappa == 0):
            raise PreconditionError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.kind == "table":
            r = np.asarray(self.table_r, dtype=float)
            if r.size < 2 or r.shape != np.asarray(self.table_a).shape or np.any(np.diff(r) <= 0):
                raise PreconditionError("weight table needs >= 2 increasing radii with values")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return np.power(np.maximum(r, 0.0), self.kappa)
        return np.interp(r, self.table_r, self.table_a)

    def validate(self, samples=None):
        """Check 0 <= da/dr <= gamma a(r)/r on consecutive sample pairs."""
        if self.kind == "power":
            if not 0.0 <= self.kappa <= self.gamma + 1e-15:
                raise PreconditionError(
                    f"r^{self.kappa} violates a' <= gamma a/r with gamma = {self.gamma}")
            return True
        r = np.asarray(self.table_r if samples is None else samples, dtype=float)
        a = self(r)
        if np.any(a < 0):
            raise PreconditionError("weight must be nonnegative")
        slope = np.diff(a) / np.diff(r)
        left = r[:-1]
        cap = np.where(left > 0, self.gamma * a[:-1] / np.where(left > 0, left, 1.0), np.inf)
        bad = (slope < -1e-12) | (slope > cap * (1 + 1e-9) + 1e-12)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise PreconditionError(
                f"weight fails 0 <= a' <= gamma a/r on [{r[i]}, {r[i + 1]}]")
        return True


class SpaceTimeRecorder(Recorder):
    """Time integrals, cell by cell, of the densities used by the estimates.

    Integration is trapezoidal over steps.  Snapshots of the running
    integrals are stored at the requested horizons so that one long run
    answers questions about shorter horizons too.  Weighted Morawetz sums
    for each ``WeightSpec`` are accumulated as scalars.
    """

    name = "spacetime"

    def __init__(self, horizons=(), weights=()):
        self.horizons = sorted(float(h) for h in horizons)
        self.weights = list(weights)
        for w in self.weights:
            w.validate()

    def start(self, ctx):
        super().start(ctx)
        n = ctx.grid.n
        self.acc = {k: np.zeros(n) for k in _FIELDS}
        self.prev = None
        self.t_prev = None
        self.w_acc = np.zeros(len(self.weights))
        self.w_prev = None
        self.snaps = {}
        self.t, self.axis = [], []

    def _densities(self, view: FieldView):
        r = view.grid.r
        return {
            "ur2": view.ur * view.ur,
            "v2": view.v * view.v,
            "pow": view.abs_pow,
            "u2": view.u * view.u,
            "M": view.morawetz,
            "hardy_r": view.hardy / r,
            "pow_r": view.abs_pow / r,
        }

    def _weighted(self, view: FieldView, cur):
        if not self.weights:
            return np.zeros(0)
        g = view.grid
        base = (cur["hardy_r"] + cur["pow_r"]) * g.rw
        out = np.empty(len(self.weights))
        t = view.t
        for i, w in enumerate(self.weights):
            a = w(g.r + t)
            if w.gamma >= 1.0:
                a = a * (t / (g.r + t))
            out[i] = sphere_area(g.d) * g.h * float(np.dot(a, base))
        return out

    def observe(self, view: FieldView):
        cur = self._densities(view)
        wcur = self._weighted(view, cur)
        t = view.t
        if self.prev is not None:
            half = 0.5 * (t - self.t_prev)
            for k in _FIELDS:
                self.acc[k] += half * (self.prev[k] + cur[k])
            self.w_acc += half * (self.w_prev + wcur)
        self.prev, self.w_prev, self.t_prev = cur, wcur, t
        self.t.append(t)
        self.axis.append(view.axis_value ** 2)
        dt = self.ctx.dt
        for hz in self.horizons:
            if hz not in self.snaps and (abs(t - hz) <= 0.5 * dt * (1 + 1e-9) or view.is_last):
                self.snaps[hz] = (t, {k: v.copy() for k, v in self.acc.items()}, self.w_acc.copy())
        if view.is_last:
            self.snaps.setdefault(t, (t, {k: v.copy() for k, v in self.acc.items()},
                                      self.w_acc.copy()))

    def result(self):
        return SpaceTimeIntegrals(
            grid=self.ctx.grid,
            t_final=self.t[-1],
            snapshots=self.snaps,
            weights=self.weights,
            axis=AxisSeries(np.array(self.t), np.array(self.axis), self.ctx.grid.d),
        )


@dataclass
class SpaceTimeIntegrals:
    grid: RadialGrid
    t_final: float
    snapshots: dict
    weights: list
    axis: AxisSeries

    def at(self, horizon=None):
        """(actual time, per-cell integrals, weighted sums) at ``horizon``."""
        if horizon is None:
            horizon = self.t_final
        key = min(self.snapshots, key=lambda h: abs(h - horizon))
        t, acc, w = self.snapshots[key]
        if abs(t - horizon) > 1e-6 * max(1.0, horizon) and abs(key - horizon) > 1e-9:
            raise DomainError(f"no snapshot at t = {horizon}; available: {sorted(self.snapshots)}")
        return t, acc, w

    def integrate(self, cells, lo=None, hi=None) -> float:
        g = self.grid
        w = cell_weights(g, lo, hi)
        return sphere_area(g.d) * float(np.dot(cells * g.rw, w))

    def sphere(self, cells, R) -> float:
        g = self.grid
        return sphere_area(g.d) * R ** (g.d - 1) * float(g.interp(cells, R))


def _spacetime(run) -> SpaceTimeIntegrals:
    diags = getattr(run, "diagnostics", run)
    for v in diags.values():
        if isinstance(v, SpaceTimeIntegrals):
            return v
    raise ContractViolation("run has no space-time integrals; attach a SpaceTimeRecorder")


def _initial_energy(run) -> float:
    view = FieldView(run.grid, run.params, run.initial_state,
                     nonlinear=run.config.nonlinearity_on)
    return view.integral(view.energy_density)


@dataclass
class MorawetzReport:
    R: float
    interior_term: float
    sphere_term: float
    exterior_term: float
    bound: float
    horizon: float = math.nan

    @property
    def total(self) -> float:
        return self.interior_term + self.sphere_term + self.exterior_term

    @property
    def holds(self) -> bool:
        return self.total <= self.bound * (1 + 1e-9)


def morawetz_inequality(run, params: ModelParams, R: float, horizon=None,
                        time_symmetric: bool = False) -> MorawetzReport:
    """Left side of the improved Morawetz inequality over the run's time span.

    With ``time_symmetric`` the integrals are doubled, which equals the
    integral over the whole time line when the data has zero velocity
    (the solution is then even in t).
    """
    st = _spacetime(run)
    g = st.grid
    if not 0 < R < g.r_max:
        raise DomainError(f"R = {R} must lie in (0, r_max = {g.r_max})")
    t, acc, _ = st.at(horizon)
    d, p = params.d, params.p
    cp = ((d - 1) * (p - 1) - 2) / (p + 1)
    cp2 = (d - 1) * (p - 1) / (2 * (p + 1))
    k = 2.0 if time_symmetric else 1.0
    interior = k / (2 * R) * st.integrate(acc["ur2"] + acc["v2"] + cp * acc["pow"], 0.0, R)
    sphere = k * (d - 1) / (4 * R * R) * st.sphere(acc["u2"], R)
    # hardy_r already holds lambda_d |u|^2 / r^3
    exterior = k * st.integrate(acc["hardy_r"] + cp2 * acc["pow_r"], R, None)
    return MorawetzReport(R, interior, sphere, exterior, 2.0 * _initial_energy(run), t)


def unweighted_global_integrals(run, params: ModelParams, R: float = 1.0, horizon=None) -> dict:
    """Global space-time integrals implied by the Morawetz bound, normalised by E, R E and R^2 E."""
    st = _spacetime(run)
    t, acc, _ = st.at(horizon)
    E = _initial_energy(run)
    weighted = st.integrate(acc["hardy_r"] + acc["pow_r"])
    local = st.integrate(acc["ur2"] + acc["v2"] + acc["pow"], 0.0, R)
    sphere = st.sphere(acc["u2"], R)
    if E == 0:
        return {"weighted": 0.0, "local": 0.0, "sphere": 0.0}
    return {"weighted": weighted / E, "local": local / (R * E), "sphere": sphere / (R * R * E)}


def slab_morawetz(run, horizon=None, lo=None, hi=None) -> float:
    """Integral of M over [lo, hi] x [0, horizon] from the shared accumulator."""
    st = _spacetime(run)
    _, acc, _ = st.at(horizon)
    return st.integrate(acc["M"], lo, hi)


def initial_K1(data, grid: RadialGrid, params: ModelParams, weight: WeightSpec,
               nonlinear: bool = True) -> float:
    """Weighted inward-type functional of the initial data."""
    if isinstance(data, InitialData):
        data = data.state(grid)
    view = FieldView(grid, params, data, nonlinear=nonlinear)
    dens = 0.25 * view.Lplus ** 2 + 0.25 * view.hardy + 0.5 * view.potential
    return view.integral(weight(grid.r) * dens)


def weighted_morawetz(run, params: ModelParams, weight: WeightSpec, horizon=None):
    """(lhs, mu_weighted, K1) for a weight registered with the space-time recorder."""
    weight.validate()
    st = _spacetime(run)
    try:
        idx = st.weights.index(weight)
    except ValueError:
        raise ContractViolation(f"weight {weight} was not accumulated during the run") from None
    t, _, w = st.at(horizon)
    lhs = float(w[idx])
    ax = st.axis
    mask = ax.t <= t + 1e-12
    mu_w = pl_integral(ax.t[mask], weight(ax.t[mask]) * ax.density[mask], 0.0, t)
    K1 = initial_K1(run.initial_state, run.grid, params, weight,
                    run.config.nonlinearity_on)
    return lhs, mu_w, K1


@dataclass
class DecayFit:
    kappa_target: float
    fitted_slope: float
    fit_residual: float
    bound_constant: float
    truncated_L_power_norm: float
    fit_window: tuple = ()
    dropped_nonpositive: bool = False

    def as_dict(self):
        return {
            "kappa_target": self.kappa_target,
            "fitted_slope": self.fitted_slope,
            "fit_residual": self.fit_residual,
            "bound_constant": self.bound_constant,
            "truncated_L_power_norm": self.truncated_L_power_norm,
        }


def truncated_l_power_norm(t, values, kappa, t_max=None) -> float:
    t = np.asarray(t, dtype=float)
    values = np.clip(np.asarray(values, dtype=float), 0.0, None)
    if t_max is not None:
        keep = t <= t_max + 1e-12
        t, values = t[keep], values[keep]
    integrand = values ** (1.0 / kappa)
    return float(np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))) ** kappa


def decay_fit(t, E_minus, kappa: float, E_kappa: float, fit_window=None,
              sup_window=(5.0, 40.0)) -> DecayFit:
    """Log-log fit of E_-(t), the constant in E_- <= C E_kappa t^-kappa, and the L^{1/kappa} norm."""
    t = np.asarray(t, dtype=float)
    Em = np.asarray(E_minus, dtype=float)
    if t.shape != Em.shape or t.size < 3:
        raise ContractViolation("need matching t and E_minus arrays with >= 3 samples")
    t_f = float(t[-1])
    lo, hi = fit_window if fit_window is not None else (t_f / 8.0, t_f)
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    pos = sel & (Em > 0)
    dropped = bool(np.any(sel & ~(Em > 0)))
    if pos.sum() < 2:
        slope, resid = math.nan, math.nan
    else:
        x, y = np.log(t[pos]), np.log(Em[pos])
        coef, res, *_ = np.polyfit(x, y, 1, full=True)
        slope = float(coef[0])
        resid = float(np.sqrt(res[0] / pos.sum())) if res.size else 0.0
    a, b = sup_window
    win = (t >= a) & (t <= b)
    bound = float(np.max(Em[win] * t[win] ** kappa) / E_kappa) if win.any() and E_kappa > 0 else math.nan
    norm = truncated_l_power_norm(t, Em, kappa)
    return DecayFit(kappa, slope, resid, bound, norm, (lo, hi), dropped)


def _segment_power_integral(y0, y1, rho0, rho1, kappa):
    """Exact integral of y^-kappa times the linear interpolant of rho on [y0, y1]."""
    beta = (rho1 - rho0) / (y1 - y0)
    alpha = rho0 - beta * y0
    e1, e2 = 1.0 - kappa, 2.0 - kappa
    return (alpha * (y1 ** e1 - y0 ** e1) / e1
            + beta * (y1 ** e2 - y0 ** e2) / e2)


def l_power_lemma_check(y, density, kappa: float, order: int = 24):
    """(||f||_{L^{1/kappa}}, total mass) for f(x) = int_x^inf y^-kappa dmu'(y).

    ``mu'`` has the piecewise-linear density tabulated at ``y`` (zero
    outside).  f has a closed form anywhere, so the norm is computed with
    Gauss-Legendre nodes inside every table interval rather than from the
    node values alone; coarse tables would otherwise overestimate it.
    """
    if not 0.0 < kappa < 1.0:
        raise PreconditionError(f"kappa must lie in (0, 1), got {kappa}")
    y = np.asarray(y, dtype=float)
    rho = np.asarray(density, dtype=float)
    if y.shape != rho.shape or y.size < 2 or np.any(np.diff(y) <= 0) or y[0] < 0:
        raise PreconditionError("need increasing nonnegative nodes with one density value each")
    if np.any(rho < 0):
        raise PreconditionError("density must be nonnegative")
    pieces = _segment_power_integral(y[:-1], y[1:], rho[:-1], rho[1:], kappa)
    f_nodes = np.concatenate((np.cumsum(pieces[::-1])[::-1], [0.0]))
    mass = float(np.sum(0.5 * (rho[1:] + rho[:-1]) * np.diff(y)))

    xi, wi = np.polynomial.legendre.leggauss(order)
    a, b = y[:-1, None], y[1:, None]
    x = a + (b - a) * 0.5 * (xi + 1.0)
    frac = (x - a) / (b - a)
    rho_x = rho[:-1, None] + frac * (rho[1:, None] - rho[:-1, None])
    f_x = _segment_power_integral(x, b, rho_x, rho[1:, None], kappa) + f_nodes[1:, None]
    f_x = np.clip(f_x, 0.0, None)
    p = 1.0 / kappa
    integral = float(np.sum(0.5 * (b - a) * (wi * f_x ** p)))
    integral += f_nodes[0] ** p * y[0]  # f is constant on [0, y0]
    return integral ** kappa, mass


@dataclass
class DecayChain:
    """Terms of t0^kappa E_-(t0) <= c_d mu_w + lhs + t0^kappa E_-(T) at each t0."""

    t0: np.ndarray
    left: np.ndarray
    right: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return bool(np.all(self.left <= self.right * (1 + 1e-9)))


def decay_chain(run, params: ModelParams, weight: WeightSpec, energies) -> DecayChain:
    lhs, mu_w, _ = weighted_morawetz(run, params, weight)
    t = np.asarray(energies.t)
    Em = np.asarray(energies.E_minus)
    w0 = weight(t)
    left = w0 * Em
    right = c_d(params.d) * mu_w + lhs + w0 * Em[-1]
    return DecayChain(t, left, np.full_like(left, right) if np.ndim(right) == 0 else right,
                      {"lhs": lhs, "mu_weighted": mu_w})

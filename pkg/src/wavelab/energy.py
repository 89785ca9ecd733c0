"""Energies, the inward/outward split, pointwise densities and Hardy identities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .mathlib import ModelParams, lambda_d, radial_integral, sphere_area
from .solver import FieldState, FieldView, InitialData, RadialGrid, Recorder, radial_derivative


def _view(state, grid, params) -> FieldView:
    if isinstance(state, FieldView):
        return state
    return FieldView(grid, params, state)


def apply_L(state: FieldState, grid: RadialGrid, params: ModelParams, sign: str) -> np.ndarray:
    """u_r + (d-1)/2 u/r +/- u_t at cell centers."""
    view = _view(state, grid, params)
    if sign in ("+", 1, "plus"):
        return view.Lplus
    if sign in ("-", -1, "minus"):
        return view.Lminus
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def total_energy(state, grid: RadialGrid, params: ModelParams) -> float:
    return _view(state, grid, params).integral(_view(state, grid, params).energy_density)


@dataclass
class EnergyReport:
    t: float
    E: float
    E_minus: float
    E_plus: float
    components: dict = field(default_factory=dict)

    @property
    def split_defect(self) -> float:
        return self.E_minus + self.E_plus - self.E


def split_energy(state, grid: RadialGrid, params: ModelParams, region=None) -> EnergyReport:
    """Total, inward and outward energy, optionally restricted to ``region = (lo, hi)``.

    The angular-gradient component is reported as exactly zero so that the
    schema carries every term of the general formula.
    """
    view = _view(state, grid, params)
    lo, hi = region if region is not None else (None, None)

    def integ(density):
        return radial_integral(density, grid.d, grid, lo, hi)

    comps = {
        "kinetic": integ(0.5 * view.v * view.v),
        "radial_gradient": integ(0.5 * view.ur * view.ur),
        "angular_gradient": 0.0,
        "potential": integ(view.potential),
        "hardy": integ(view.hardy),
    }
    E = comps["kinetic"] + comps["radial_gradient"] + comps["potential"]
    return EnergyReport(
        t=view.t,
        E=E,
        E_minus=integ(view.inward_density),
        E_plus=integ(view.outward_density),
        components=comps,
    )


@dataclass
class HardyResidual:
    lhs: float
    rhs: float
    boundary_term: float
    residual: float
    exterior: tuple | None = None

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.boundary_term, self.residual))


def hardy_identity_residual(u, grid: RadialGrid, params: ModelParams, R=None,
                            decay_tol=1e-8) -> HardyResidual:
    """Residual of  int |Lu|^2 + lambda_d |u|^2/r^2  =  int |u_r|^2.

    With a radius ``R`` the interior identity gains the sphere term
    ``(d-1)/(2R) int_{|x|=R} |u|^2`` and the exterior one loses it; the
    returned ``exterior`` tuple holds (lhs, rhs, residual) for ``|x| > R``.
    """
    u = np.asarray(u, dtype=float)
    scale = float(np.abs(u).max()) if u.size else 0.0
    if scale > 0 and float(np.abs(u[-3:]).max()) > decay_tol * max(scale, 1.0):
        raise PreconditionError("u does not decay at the outer cells; enlarge the grid")
    d = grid.d
    ur = radial_derivative(u, grid.h)
    Lu = ur + 0.5 * (d - 1) * u / grid.r
    left = Lu * Lu + lambda_d(d) * u * u / grid.r ** 2
    right = ur * ur
    if R is None:
        lhs = radial_integral(left, d, grid)
        rhs = radial_integral(right, d, grid)
        return HardyResidual(lhs, rhs, 0.0, lhs - rhs)
    uR = float(grid.interp(u, R))
    boundary = (d - 1) / (2.0 * R) * sphere_area(d) * R ** (d - 1) * uR * uR
    lhs = radial_integral(left, d, grid, 0.0, R)
    rhs = radial_integral(right, d, grid, 0.0, R) + boundary
    lhs_ext = radial_integral(left, d, grid, R, None)
    rhs_ext = radial_integral(right, d, grid, R, None) - boundary
    return HardyResidual(lhs, rhs, boundary, lhs - rhs,
                         exterior=(lhs_ext, rhs_ext, lhs_ext - rhs_ext))


@dataclass
class DensitySamples:
    """Column-oriented pointwise densities; ``samples()`` gives per-radius rows."""

    r: np.ndarray
    e_prime: np.ndarray
    M: np.ndarray
    Lplus_sq: np.ndarray
    Lminus_sq: np.ndarray

    def samples(self):
        return [DensitySample(*row) for row in zip(self.r, self.e_prime, self.M,
                                                   self.Lplus_sq, self.Lminus_sq)]


@dataclass(frozen=True)
class DensitySample:
    r: float
    e_prime: float
    M: float
    Lplus_sq: float
    Lminus_sq: float


def densities(state, grid: RadialGrid, params: ModelParams) -> DensitySamples:
    view = _view(state, grid, params)
    return DensitySamples(grid.r, view.e_prime, view.morawetz,
                          view.Lplus ** 2, view.Lminus ** 2)


def _data_view(data, grid, params):
    if isinstance(data, InitialData):
        return FieldView(grid, params, data.state(grid))
    return _view(data, grid, params)


def weighted_energy(data, grid: RadialGrid, params: ModelParams, kappa: float) -> float:
    """E_kappa: energy density of the data weighted by 1 + r^kappa."""
    view = _data_view(data, grid, params)
    return view.integral((1.0 + grid.r ** kappa) * view.energy_density)


def kappa_weighted_split_bound(data, grid: RadialGrid, params: ModelParams, kappa: float):
    """Both sides of the r^kappa-weighted comparison between split and plain energy.

    Returns ``(lhs, rhs)`` with lhs <= rhs up to quadrature error.
    """
    view = _data_view(data, grid, params)
    w = grid.r ** kappa
    lhs = view.integral(w * (0.25 * view.Lplus ** 2 + 0.25 * view.Lminus ** 2
                             + 0.5 * view.hardy + view.potential))
    rhs = view.integral(w * view.energy_density)
    return lhs, rhs


class EnergyRecorder(Recorder):
    """Energy split every ``stride`` steps (and always at the last step).

    Also tracks the interior energy inside |x| < c t for each ``c`` and the
    running axis measure, so one table covers the whole energy history.
    """

    name = "energies"

    def __init__(self, stride: int = 10, interior_c=(), axis=None):
        self.stride = max(1, int(stride))
        self.interior_c = tuple(float(c) for c in interior_c)
        self.axis = axis
        self.rows = []

    def observe(self, view: FieldView):
        if view.step % self.stride and not view.is_last:
            return
        rep = split_energy(view, view.grid, view.params)
        interior = {c: view.integral(view.energy_density, 0.0, c * view.t)
                    for c in self.interior_c}
        mu = self.axis.cumulative() if self.axis is not None else float("nan")
        self.rows.append((rep, interior, mu))

    def result(self):
        return EnergySeries(
            t=np.array([r.t for r, _, _ in self.rows]),
            E=np.array([r.E for r, _, _ in self.rows]),
            E_minus=np.array([r.E_minus for r, _, _ in self.rows]),
            E_plus=np.array([r.E_plus for r, _, _ in self.rows]),
            hardy=np.array([r.components["hardy"] for r, _, _ in self.rows]),
            potential=np.array([r.components["potential"] for r, _, _ in self.rows]),
            interior={c: np.array([i[c] for _, i, _ in self.rows]) for c in self.interior_c},
            mu=np.array([m for _, _, m in self.rows]),
        )


@dataclass
class EnergySeries:
    t: np.ndarray
    E: np.ndarray
    E_minus: np.ndarray
    E_plus: np.ndarray
    hardy: np.ndarray
    potential: np.ndarray
    interior: dict
    mu: np.ndarray

    @property
    def E0(self) -> float:
        return float(self.E[0])

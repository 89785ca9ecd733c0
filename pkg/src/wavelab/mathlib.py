"""Closed-form constants, exponents, admissibility and radial quadrature."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DomainError

INF = math.inf
_EPS = 1e-12


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (the sphere S^{d-1}).

    Uses the two-step recursion ``w(d) = 2*pi/(d-2) * w(d-2)`` seeded with
    the circle and the 2-sphere, so no Gamma function is needed.
    """
    if int(d) != d or d < 2:
        raise DomainError(f"sphere_area needs an integer d >= 2, got {d}")
    d = int(d)
    area = 2.0 * math.pi if d % 2 == 0 else 4.0 * math.pi
    for k in range(4 if d % 2 == 0 else 5, d + 1, 2):
        area *= 2.0 * math.pi / (k - 2)
    return area


def lambda_d(d: int) -> float:
    return (d - 1) * (d - 3) / 4.0


def c_d(d: int) -> float:
    """Scale factor of the axis measure: (d-1)^2/16 times |S^{d-1}|."""
    return (d - 1) ** 2 / 16.0 * sphere_area(d)


def critical_exponents(d: int) -> tuple[float, float]:
    """Return ``(p_c, p_e)``: the conformal and energy-critical exponents."""
    if d < 3:
        raise DomainError(f"critical exponents need d >= 3, got {d}")
    return 1.0 + 4.0 / (d - 1), 1.0 + 4.0 / (d - 2)


def s_p(d: int, p: float) -> float:
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    return d / 2.0 - 2.0 / (p - 1.0)


def satisfies_a1(d: int, p: float) -> bool:
    """Range condition on (d, p) under which the energy theory is proved."""
    if int(d) != d or not 3 <= d <= 9:
        return False
    pc, pe = critical_exponents(int(d))
    if p < pc - _EPS or p >= pe - _EPS:
        return False
    if d >= 7 and p > 1.0 + 3.0 / (d - 3) + _EPS:
        return False
    return True


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``d`` and exponent ``p`` of the defocusing equation.

    Construction rejects pairs outside (A1) unless ``allow_outside_a1`` is
    set; verification entry points refuse params built with the bypass.
    """

    d: int
    p: float
    allow_outside_a1: bool = False

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise DomainError(f"d must be an integer >= 3, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", float(self.p))
        if self.p <= 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        if not self.allow_outside_a1 and not satisfies_a1(self.d, self.p):
            pc, pe = critical_exponents(self.d)
            raise DomainError(
                f"(d, p) = ({self.d}, {self.p}) violates assumption (A1): "
                f"need {pc:.6g} <= p < {pe:.6g}"
                + (f" and p <= {1 + 3 / (self.d - 3):.6g}" if self.d >= 7 else "")
                + " and 3 <= d <= 9"
            )

    @property
    def in_a1(self) -> bool:
        return satisfies_a1(self.d, self.p)

    @property
    def lam(self) -> float:
        return lambda_d(self.d)

    @property
    def omega(self) -> float:
        return sphere_area(self.d)


def _kappa_0_forms(d, p):
    num = (d + 2) * (d + 3) - (d + 3) * (d - 2) * p
    den = (d - 1) * (d + 3) - (d + 1) * (d - 3) * p
    if abs(den) < 1e-300:
        raise DomainError(f"kappa_0 denominator vanishes at (d, p) = ({d}, {p})")
    pc, pe = critical_exponents(d)
    den2 = (pe - p) + 3.0 * (d - 1) / ((d - 2) * (d + 3)) * (p - pc)
    if abs(den2) < 1e-300:
        raise DomainError(f"kappa_0 denominator vanishes at (d, p) = ({d}, {p})")
    return num / den, (pe - p) / den2


def kappa_0(d: int, p: float) -> float:
    """Minimal decay exponent for energy-norm scattering.

    Both closed forms are evaluated; they must agree to 1e-12 (relative once
    above 1, absolute below).
    """
    first, second = _kappa_0_forms(d, p)
    if abs(first - second) > 1e-12 * max(1.0, abs(first), abs(second)):
        raise ArithmeticError(f"kappa_0 forms disagree: {first!r} vs {second!r}")
    return first


@dataclass(frozen=True)
class StrichartzPair:
    """Exponents of a space-time norm. ``q`` may be ``INF``."""

    q: float
    r: float
    s: float
    rho: float = 0.0


def _inv(x):
    return 0.0 if math.isinf(x) else 1.0 / x


def is_admissible(pair: StrichartzPair, d: int) -> bool:
    q, r = pair.q, pair.r
    if not (2 - _EPS <= q <= INF) or not (2 - _EPS <= r < INF):
        return False
    if 2 * _inv(q) + (d - 1) / r > (d - 1) / 2 + _EPS:
        return False
    if d > 3 and abs(q - 2) < _EPS and abs(r - 2 * (d - 1) / (d - 3)) < _EPS:
        return False
    return abs(_inv(q) + d / r - (d / 2 + pair.rho - pair.s)) <= _EPS


def cell_weights(grid, lo=None, hi=None) -> np.ndarray:
    """Overlap length of each cell with ``[lo, hi]`` (whole grid by default)."""
    h = grid.h
    faces = np.arange(grid.n + 1) * h
    lo = 0.0 if lo is None else float(lo)
    hi = faces[-1] if hi is None else float(hi)
    w = np.minimum(faces[1:], hi) - np.maximum(faces[:-1], lo)
    return np.clip(w, 0.0, h)


def radial_integral(values, d: int, grid, lo=None, hi=None) -> float:
    """Integral over R^d of a radial function sampled at cell centers.

    Midpoint rule ``|S^{d-1}| * sum f(r_j) r_j^{d-1} h``; an optional radial
    interval clips partial cells by their overlap length.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise ContractViolation(
            f"values have shape {values.shape}, grid has {grid.n} cells"
        )
    if lo is None and hi is None:
        return sphere_area(d) * grid.h * float(np.dot(values, grid.r ** (d - 1)))
    w = cell_weights(grid, lo, hi)
    return sphere_area(d) * float(np.dot(values * grid.r ** (d - 1), w))

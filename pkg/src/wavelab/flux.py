"""Regions in the (r, t) half-plane, boundary energy fluxes and their balance.

Every boundary piece is a horizontal segment, a cylinder ``r = r0``, a piece
of the axis ``r = 0`` or a piece of a light cone ``t +/- r = const``.  The
flux through each piece is a one-dimensional integral of a trace captured
during the run by :class:`FluxRecorder`; the space-time Morawetz integral of
a region is captured the same way, slice by slice.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DomainError
from .mathlib import c_d, cell_weights, lambda_d, sphere_area
from .solver import FieldView, Recorder

SEGMENT_KINDS = (
    "horizontal-up", "horizontal-down",
    "cylinder-outward", "cylinder-inward",
    "axis",
    "backward-cone-up", "backward-cone-down",
    "forward-cone-up", "forward-cone-down",
)
ENERGY_TYPES = ("inward", "outward")
_GEOM_TOL = 1e-9


def _family(kind: str) -> str:
    return kind.rsplit("-", 1)[0] if kind != "axis" else "axis"


def _orientation(kind: str) -> int:
    if kind == "axis":
        return 1
    return 1 if kind.endswith(("-up", "-outward")) else -1


def _flip(kind: str) -> str:
    swaps = {"up": "down", "down": "up", "outward": "inward", "inward": "outward"}
    if kind == "axis":
        raise ContractViolation("the axis segment has a single orientation")
    fam, tail = kind.rsplit("-", 1)
    return f"{fam}-{swaps[tail]}"


@dataclass(frozen=True)
class SurfaceSegment:
    """A straight boundary piece with an orientation encoded in ``kind``."""

    kind: str
    start: tuple
    end: tuple

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ContractViolation(f"unknown segment kind {self.kind!r}")
        a = (float(self.start[0]), float(self.start[1]))
        b = (float(self.end[0]), float(self.end[1]))
        object.__setattr__(self, "start", a)
        object.__setattr__(self, "end", b)
        dr, dt = b[0] - a[0], b[1] - a[1]
        if abs(dr) < _GEOM_TOL and abs(dt) < _GEOM_TOL:
            raise ContractViolation(f"degenerate {self.kind} segment at {a}")
        if min(a[0], b[0]) < -_GEOM_TOL:
            raise ContractViolation(f"{self.kind} segment leaves r >= 0")
        fam = _family(self.kind)
        ok = {
            "horizontal": abs(dt) < _GEOM_TOL,
            "cylinder": abs(dr) < _GEOM_TOL and a[0] > _GEOM_TOL,
            "axis": abs(a[0]) < _GEOM_TOL and abs(b[0]) < _GEOM_TOL,
            "backward-cone": abs(dr + dt) < _GEOM_TOL,
            "forward-cone": abs(dr - dt) < _GEOM_TOL,
        }[fam]
        if not ok:
            raise ContractViolation(
                f"endpoints {a} -> {b} are inconsistent with kind {self.kind!r}")

    @property
    def family(self) -> str:
        return _family(self.kind)

    @property
    def sign(self) -> int:
        return _orientation(self.kind)

    @property
    def t_range(self) -> tuple:
        return tuple(sorted((self.start[1], self.end[1])))

    @property
    def r_range(self) -> tuple:
        return tuple(sorted((self.start[0], self.end[0])))

    @property
    def key(self) -> tuple:
        """Geometry without orientation; both orientations share one trace."""
        pts = tuple(sorted((self.start, self.end)))
        return (self.family, tuple(round(x, 12) for p in pts for x in p))

    def reversed(self) -> "SurfaceSegment":
        return SurfaceSegment(_flip(self.kind), self.end, self.start)


def _classify(a, b, area_sign) -> str:
    dr, dt = b[0] - a[0], b[1] - a[1]
    # outward normal of a counter-clockwise loop in (r, t) is (dt, -dr)
    nr, nt = area_sign * dt, -area_sign * dr
    if abs(dt) < _GEOM_TOL:
        return "horizontal-up" if nt > 0 else "horizontal-down"
    if abs(dr) < _GEOM_TOL:
        if abs(a[0]) < _GEOM_TOL:
            if nr > 0:
                raise ContractViolation("axis edge with a normal pointing to r > 0")
            return "axis"
        return "cylinder-outward" if nr > 0 else "cylinder-inward"
    if abs(dr + dt) < _GEOM_TOL:
        return "backward-cone-up" if nt > 0 else "backward-cone-down"
    if abs(dr - dt) < _GEOM_TOL:
        return "forward-cone-up" if nt > 0 else "forward-cone-down"
    raise ContractViolation(f"edge {a} -> {b} is neither horizontal, vertical nor null")


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def on(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4):
        return True
    return ((o1 == 0 and on(p1, p2, q1)) or (o2 == 0 and on(p1, p2, q2))
            or (o3 == 0 and on(q1, q2, p1)) or (o4 == 0 and on(q1, q2, p2)))


@dataclass(frozen=True)
class Region:
    """A simple polygon in r >= 0 whose edges are admissible segments."""

    segments: tuple
    name: str = "region"

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if len(segs) < 3:
            raise ContractViolation("a region needs at least three segments")
        for i, s in enumerate(segs):
            nxt = segs[(i + 1) % len(segs)]
            if max(abs(s.end[0] - nxt.start[0]), abs(s.end[1] - nxt.start[1])) > _GEOM_TOL:
                raise ContractViolation(f"loop does not close between segments {i} and {i + 1}")
        n = len(segs)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(segs[i].start, segs[i].end, segs[j].start, segs[j].end):
                    raise ContractViolation(f"segments {i} and {j} cross")
        if abs(self.signed_area) < _GEOM_TOL:
            raise ContractViolation("region has zero area")
        sign = 1 if self.signed_area > 0 else -1
        for i, s in enumerate(segs):
            if _classify(s.start, s.end, sign) != s.kind:
                raise ContractViolation(
                    f"segment {i} is labelled {s.kind!r} but its outward normal "
                    f"says {_classify(s.start, s.end, sign)!r}")

    @classmethod
    def from_vertices(cls, vertices, name="region") -> "Region":
        """Build a region from its corner points, inferring every edge kind."""
        pts = [(float(r), float(t)) for r, t in vertices]
        if len(pts) > 1 and max(abs(pts[0][0] - pts[-1][0]), abs(pts[0][1] - pts[-1][1])) < _GEOM_TOL:
            pts = pts[:-1]
        if len(pts) < 3:
            raise ContractViolation("a region needs at least three vertices")
        area = _shoelace(pts)
        if abs(area) < _GEOM_TOL:
            raise ContractViolation("region has zero area")
        sign = 1 if area > 0 else -1
        segs = []
        for a, b in zip(pts, pts[1:] + pts[:1]):
            segs.append(SurfaceSegment(_classify(a, b, sign), a, b))
        return cls(tuple(segs), name)

    @classmethod
    def rectangle(cls, r1, r2, t1, t2, name="rectangle") -> "Region":
        """[r1, r2] x [t1, t2]; r1 = 0 gives an axis edge."""
        return cls.from_vertices([(r1, t1), (r2, t1), (r2, t2), (r1, t2)], name)

    @property
    def vertices(self):
        return [s.start for s in self.segments]

    @property
    def signed_area(self) -> float:
        return _shoelace(self.vertices)

    @property
    def t_range(self) -> tuple:
        ts = [v[1] for v in self.vertices]
        return min(ts), max(ts)

    @property
    def r_max(self) -> float:
        return max(v[0] for v in self.vertices)

    @property
    def has_axis(self) -> bool:
        return any(s.kind == "axis" for s in self.segments)

    def slice(self, t: float):
        """Radial intervals of the region at time ``t`` (half-open edge rule)."""
        xs = []
        for s in self.segments:
            (r0, t0), (r1, t1) = s.start, s.end
            if abs(t1 - t0) < _GEOM_TOL:
                continue
            lo, hi = min(t0, t1), max(t0, t1)
            if lo <= t < hi:
                xs.append(r0 + (r1 - r0) * (t - t0) / (t1 - t0))
        xs.sort()
        return [(xs[i], xs[i + 1]) for i in range(0, len(xs) - 1, 2)]

    def split(self, t_cut: float):
        """Cut by the horizontal line t = t_cut into (lower, upper) regions."""
        tmin, tmax = self.t_range
        if not tmin < t_cut < tmax:
            raise DomainError(f"cut at t = {t_cut} is outside the region's span")
        pts = self.vertices
        if self.signed_area < 0:
            pts = pts[::-1]
        lower, upper = [], []
        for a, b in zip(pts, pts[1:] + pts[:1]):
            for part, keep in ((lower, lambda p: p[1] <= t_cut + _GEOM_TOL),
                               (upper, lambda p: p[1] >= t_cut - _GEOM_TOL)):
                if keep(a):
                    part.append(a)
            if (a[1] - t_cut) * (b[1] - t_cut) < 0:
                f = (t_cut - a[1]) / (b[1] - a[1])
                x = (a[0] + f * (b[0] - a[0]), t_cut)
                lower.append(x)
                upper.append(x)
        return (Region.from_vertices(_dedupe(lower), self.name + "-lower"),
                Region.from_vertices(_dedupe(upper), self.name + "-upper"))


def _dedupe(pts):
    out = []
    for p in pts:
        if not out or max(abs(p[0] - out[-1][0]), abs(p[1] - out[-1][1])) > _GEOM_TOL:
            out.append(p)
    if len(out) > 1 and max(abs(out[0][0] - out[-1][0]), abs(out[0][1] - out[-1][1])) < _GEOM_TOL:
        out.pop()
    return out


def _shoelace(pts) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def pl_integral(t: np.ndarray, g: np.ndarray, a: float, b: float) -> float:
    """Exact integral over [a, b] of the piecewise-linear interpolant of (t, g)."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    if b <= a:
        return 0.0
    if t.size == 0 or a < t[0] - 1e-12 or b > t[-1] + 1e-12:
        raise DomainError(f"interval [{a}, {b}] is outside the sampled span")
    if t.size == 1:
        return 0.0
    inner = (t > a) & (t < b)
    ts = np.concatenate(([a], t[inner], [b]))
    gs = np.concatenate(([np.interp(a, t, g)], g[inner], [np.interp(b, t, g)]))
    return float(0.5 * np.sum((gs[1:] + gs[:-1]) * np.diff(ts)))


# --- pointwise traces -----------------------------------------------------

def _weighted_at(view: FieldView, radii):
    """Interpolate u, u_t, u_r at ``radii`` and return r^{d-1}-weighted densities.

    Returns (e', |L+ u|^2, |L- u|^2), each multiplied by r^{d-1}, written so
    that nothing blows up as r -> 0.
    """
    grid, d, p = view.grid, view.grid.d, view.params.p
    radii = np.asarray(radii, dtype=float)
    # even extension keeps the interpolant symmetric near the axis
    rr = np.concatenate(([0.0], grid.r))
    u = np.interp(radii, rr, np.concatenate(([view.axis_value], view.u)))
    v = np.interp(radii, rr, np.concatenate(([view.v[0]], view.v)))
    ur = np.interp(radii, rr, np.concatenate(([0.0], view.ur)))
    half = 0.5 * (d - 1)
    pos = np.maximum(radii, 0.0)
    w = pos ** half
    wm = pos ** (0.5 * (d - 3))
    pot = np.abs(u) ** (p + 1.0) / (p + 1.0) * pos ** (d - 1)
    if not view.nonlinear:
        pot = np.zeros_like(pot)
    e_w = 0.5 * lambda_d(d) * (u * wm) ** 2 + pot
    base = w * ur + half * u * wm
    lp = (base + w * v) ** 2
    lm = (base - w * v) ** 2
    return e_w, lp, lm


def _axis_density(view: FieldView) -> float:
    """Density of the axis measure.  Only d = 3 carries flux through the axis."""
    return view.axis_value ** 2 if view.grid.d == 3 else 0.0


def _positive_rate(fam: str, seg: SurfaceSegment, view: FieldView):
    """(inward, outward) integrands in t for the up/outward orientation."""
    omega = sphere_area(view.grid.d)
    t = view.t
    if fam == "cylinder":
        e_w, lp, lm = _weighted_at(view, [seg.start[0]])
        return omega * (-0.25 * lp[0] + 0.5 * e_w[0]), omega * (0.25 * lm[0] - 0.5 * e_w[0])
    if fam == "axis":
        m = c_d(view.grid.d) * _axis_density(view)
        return m, -m
    if fam == "backward-cone":
        s = seg.start[0] + seg.start[1]
        e_w, lp, lm = _weighted_at(view, [max(s - t, 0.0)])
        return omega * e_w[0], 0.5 * omega * lm[0]
    if fam == "forward-cone":
        tau = seg.start[1] - seg.start[0]
        e_w, lp, lm = _weighted_at(view, [max(t - tau, 0.0)])
        return 0.5 * omega * lp[0], omega * e_w[0]
    raise ContractViolation(fam)


def _clamp(t, lo, hi):
    return min(max(t, lo), hi)


class _Trace:
    def __init__(self, seg: SurfaceSegment):
        self.seg = seg
        self.t = []
        self.inward = []
        self.outward = []


class FluxRecorder(Recorder):
    """Captures boundary traces and Morawetz slices for a set of regions.

    Extra free-standing segments can be traced too.  Every trace is sampled
    at each step whose time lies within one step of the segment's span, with
    the segment geometry clamped to its own span.
    """

    name = "flux"

    def __init__(self, regions=(), segments=()):
        self.regions = list(regions)
        self.extra = list(segments)
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ContractViolation("region names must be unique")

    def start(self, ctx):
        super().start(ctx)
        self.traces = {}
        for seg in [s for r in self.regions for s in r.segments] + self.extra:
            self.traces.setdefault(seg.key, _Trace(seg))
        self.slices = {r.name: ([], []) for r in self.regions}
        self.axis_t, self.axis_raw = [], []
        t_end = ctx.config.t_final
        for r in self.regions:
            a, b = r.t_range
            if a < -1e-12 or b > t_end + 1e-9:
                raise DomainError(f"region {r.name!r} spans t in [{a}, {b}], run covers [0, {t_end}]")
            if r.r_max > ctx.grid.r_max + 1e-12:
                raise DomainError(f"region {r.name!r} reaches r = {r.r_max} beyond r_max")

    def observe(self, view: FieldView):
        t, dt = view.t, self.ctx.dt
        self.axis_t.append(t)
        self.axis_raw.append(view.axis_value ** 2)
        for tr in self.traces.values():
            seg = tr.seg
            a, b = seg.t_range
            if t < a - dt * 1.000001 or t > b + dt * 1.000001:
                continue
            fam = seg.family
            tr.t.append(t)
            if fam == "horizontal":
                lo, hi = seg.r_range
                tr.inward.append(view.integral(view.inward_density, lo, hi))
                tr.outward.append(view.integral(view.outward_density, lo, hi))
            else:
                # evaluate the segment geometry at a time clamped to its span
                tc = _clamp(t, a, b)
                rate = _positive_rate(fam, seg, _Shifted(view, tc))
                tr.inward.append(rate[0])
                tr.outward.append(rate[1])
        for reg in self.regions:
            a, b = reg.t_range
            if t < a - dt * 1.000001 or t > b + dt * 1.000001:
                continue
            eta = 1e-9 * max(1.0, b - a)
            tc = _clamp(t, a + eta, b - eta)
            w = np.zeros(view.grid.n)
            for lo, hi in reg.slice(tc):
                w += cell_weights(view.grid, lo, hi)
            m = sphere_area(view.grid.d) * float(np.dot(view.morawetz * view.grid.rw, w))
            ts, ms = self.slices[reg.name]
            ts.append(t)
            ms.append(m)

    def result(self):
        return FluxTraces(
            traces={k: (np.array(v.t), np.array(v.inward), np.array(v.outward))
                    for k, v in self.traces.items()},
            slices={k: (np.array(a), np.array(b)) for k, (a, b) in self.slices.items()},
            axis=AxisSeries(np.array(self.axis_t), np.array(self.axis_raw), self.ctx.grid.d),
            regions={r.name: r for r in self.regions},
        )


class _Shifted:
    """A view whose reported time is replaced (for clamped cone geometry)."""

    def __init__(self, view, t):
        self._view = view
        self.t = t

    def __getattr__(self, name):
        return getattr(self._view, name)


@dataclass
class AxisSeries:
    """|u~(0, t)|^2 at every step and the induced axis measure."""

    t: np.ndarray
    value_sq: np.ndarray
    d: int

    @property
    def density(self) -> np.ndarray:
        return self.value_sq if self.d == 3 else np.zeros_like(self.value_sq)

    def mu(self, t1: float, t2: float, raw: bool = False) -> float:
        if self.t.size == 0:
            raise ContractViolation("no axis samples were recorded")
        if t1 > t2:
            raise DomainError(f"empty interval [{t1}, {t2}]")
        if t1 < self.t[0] - 1e-12 or t2 > self.t[-1] + 1e-9:
            raise DomainError(f"[{t1}, {t2}] is outside the run span [{self.t[0]}, {self.t[-1]}]")
        t2 = min(t2, float(self.t[-1]))
        return pl_integral(self.t, self.value_sq if raw else self.density, t1, t2)

    def cumulative(self) -> np.ndarray:
        g = self.density
        inc = 0.5 * (g[1:] + g[:-1]) * np.diff(self.t)
        return np.concatenate(([0.0], np.cumsum(inc)))


@dataclass
class FluxTraces:
    traces: dict
    slices: dict
    axis: AxisSeries
    regions: dict = field(default_factory=dict)


class AxisRecorder(Recorder):
    """Running axis measure, usable by other recorders via ``cumulative``."""

    name = "axis"

    def start(self, ctx):
        super().start(ctx)
        self.t, self.vals, self.total = [], [], 0.0

    def observe(self, view: FieldView):
        val = view.axis_value ** 2
        if self.t and view.grid.d == 3:
            self.total += 0.5 * (val + self.vals[-1]) * (view.t - self.t[-1])
        self.t.append(view.t)
        self.vals.append(val)

    def cumulative(self) -> float:
        return self.total

    def result(self):
        return AxisSeries(np.array(self.t), np.array(self.vals), self.ctx.grid.d)


def _flux_traces(run) -> FluxTraces:
    diags = getattr(run, "diagnostics", run)
    for v in diags.values():
        if isinstance(v, FluxTraces):
            return v
    raise ContractViolation("run has no flux traces; attach a FluxRecorder")


def _axis_series(run) -> AxisSeries:
    diags = getattr(run, "diagnostics", run)
    if isinstance(diags.get("axis"), AxisSeries):
        return diags["axis"]
    return _flux_traces(run).axis


def surface_integral(segment: SurfaceSegment, run, params=None, energy_type="inward") -> float:
    """Signed flux of the inward or outward energy through ``segment``."""
    if energy_type not in ENERGY_TYPES:
        raise ContractViolation(f"energy_type must be one of {ENERGY_TYPES}")
    data = _flux_traces(run)
    if segment.key not in data.traces:
        raise ContractViolation(f"no trace recorded for segment {segment.kind} "
                                f"{segment.start} -> {segment.end}")
    ts, g_in, g_out = data.traces[segment.key]
    g = g_in if energy_type == "inward" else g_out
    if segment.family == "horizontal":
        t0 = segment.start[1]
        if ts.size == 0 or t0 < ts[0] - 1e-12 or t0 > ts[-1] + 1e-12:
            raise ContractViolation(f"horizontal trace does not bracket t = {t0}")
        val = float(np.interp(t0, ts, g))
    else:
        a, b = segment.t_range
        val = pl_integral(ts, g, a, b)
    return segment.sign * val


def mu_accumulate(run, t_interval, raw: bool = False) -> float:
    """Axis measure of ``[t1, t2]``.

    The default is the measure that enters energy balances, which vanishes
    for d >= 4; ``raw=True`` integrates |u~(0, t)|^2 regardless of d.
    """
    t1, t2 = t_interval
    return _axis_series(run).mu(t1, t2, raw=raw)


def morawetz_region_integral(region: Region, run, params=None) -> float:
    data = _flux_traces(run)
    if region.name not in data.slices:
        raise ContractViolation(f"no Morawetz slices recorded for region {region.name!r}")
    ts, ms = data.slices[region.name]
    a, b = region.t_range
    if ts.size == 0 or a < ts[0] - 1e-12 or b > ts[-1] + 1e-12:
        raise DomainError(f"region {region.name!r} exceeds the recorded span")
    return pl_integral(ts, ms, a, b)


@dataclass
class FluxLedger:
    region: str
    energy_type: str
    per_segment: list
    mu_term: float
    morawetz_integral: float
    residual: float

    @property
    def boundary_sum(self) -> float:
        return float(sum(v for _, v in self.per_segment))

    def scale(self, energy: float) -> float:
        return abs(self.morawetz_integral) + 0.01 * energy


def flux_balance(region: Region, run, params=None, energy_type="inward") -> FluxLedger:
    """Boundary fluxes, axis term and Morawetz integral of ``region``.

    For the inward energy the boundary sum plus the axis term equals minus
    the Morawetz integral; for the outward energy it equals plus it.  The
    reported residual is the defect of that identity.
    """
    if energy_type not in ENERGY_TYPES:
        raise ContractViolation(f"energy_type must be one of {ENERGY_TYPES}")
    per, mu_term = [], 0.0
    for seg in region.segments:
        val = surface_integral(seg, run, params, energy_type)
        if seg.kind == "axis":
            mu_term += val
        per.append((seg, val))
    mor = morawetz_region_integral(region, run, params)
    total = sum(v for _, v in per)
    residual = total + mor if energy_type == "inward" else total - mor
    return FluxLedger(region.name, energy_type, per, mu_term, mor, residual)


# --- light-cone fluxes ----------------------------------------------------

@dataclass
class ConeFluxSeries:
    """Fluxes of inward and outward energy through a family of light cones."""

    cone_kind: str
    labels: np.ndarray
    Q_minus: np.ndarray
    Q_plus: np.ndarray
    empty: np.ndarray

    @property
    def Q_sum(self) -> np.ndarray:
        return self.Q_minus + self.Q_plus


class ConeFluxRecorder(Recorder):
    """Fluxes through forward cones t - r = tau and backward cones t + r = s.

    One sample per step per cone at the crossing radius; integration in t is
    trapezoidal over the part of the cone inside the run.
    """

    name = "cones"

    def __init__(self, taus=(), ss=()):
        self.taus = np.asarray(taus, dtype=float)
        self.ss = np.asarray(ss, dtype=float)

    def start(self, ctx):
        super().start(ctx)
        self.t = []
        self.fw = []
        self.bw = []

    def observe(self, view: FieldView):
        omega = sphere_area(view.grid.d)
        t = view.t
        self.t.append(t)
        if self.taus.size:
            e_w, lp, _ = _weighted_at(view, np.clip(t - self.taus, 0.0, view.grid.r_max))
            self.fw.append((0.5 * omega * lp, omega * e_w))
        if self.ss.size:
            e_w, _, lm = _weighted_at(view, np.clip(self.ss - t, 0.0, view.grid.r_max))
            self.bw.append((omega * e_w, 0.5 * omega * lm))

    def _integrate(self, labels, samples, forward):
        t = np.array(self.t)
        t_end = t[-1]
        qm = np.zeros(labels.size)
        qp = np.zeros(labels.size)
        empty = np.zeros(labels.size, dtype=bool)
        if not labels.size:
            return qm, qp, empty
        gm = np.array([s[0] for s in samples])
        gp = np.array([s[1] for s in samples])
        r_max = self.ctx.grid.r_max
        for i, lab in enumerate(labels):
            if forward:
                a, b = max(lab, 0.0), min(t_end, lab + r_max)
            else:
                a, b = max(0.0, lab - r_max), min(lab, t_end)
            if b <= a:
                empty[i] = True
                continue
            qm[i] = pl_integral(t, gm[:, i], a, b)
            qp[i] = pl_integral(t, gp[:, i], a, b)
        return qm, qp, empty

    def result(self):
        out = {}
        qm, qp, e = self._integrate(self.taus, self.fw, True)
        out["forward"] = ConeFluxSeries("forward", self.taus, qm, qp, e)
        qm, qp, e = self._integrate(self.ss, self.bw, False)
        out["backward"] = ConeFluxSeries("backward", self.ss, qm, qp, e)
        return out


def cone_flux_recorders(taus, ss) -> ConeFluxRecorder:
    return ConeFluxRecorder(taus, ss)


def shell_region(r1, r2, t1, t2, name="shell") -> Region:
    if r1 <= 0:
        raise DomainError("a shell region needs r1 > 0")
    return Region.rectangle(r1, r2, t1, t2, name)


def axis_region(r2, t1, t2, name="axis") -> Region:
    return Region.rectangle(0.0, r2, t1, t2, name)


def cone_region(s, t1, name="cone") -> Region:
    """Truncated backward light cone {r + t <= s, t >= t1} touching the axis."""
    if s <= t1:
        raise DomainError("cone apex must lie above t1")
    return Region.from_vertices([(0.0, t1), (s - t1, t1), (0.0, s)], name)


def region_span(regions) -> float:
    return max((r.t_range[1] for r in regions), default=0.0)


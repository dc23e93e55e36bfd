"""Initial configurations, experiment protocols and geometric measurements.

Shapes are signed-distance functions (negative inside) on the periodic box;
``init_from_shapes`` composes them with the optimal profile.  Measurements
work on the half-level sets ``u_k = 1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .grid import Grid
from .phases import MobilitySet, TensionSet, optimal_profile
from .solver import (
    Diagnostics,
    PhaseState,
    RunResult,
    SolverParams,
    VolumeSchedule,
    project_partition,
    run,
)

__all__ = [
    "BadPartition",
    "NoJunction",
    "Shape",
    "Circle",
    "HalfSpace",
    "Slab",
    "Substrate",
    "Intersection",
    "Union",
    "Difference",
    "Rest",
    "init_from_shapes",
    "Contour",
    "extract_contour",
    "locate_junction",
    "measure_angles",
    "substrate_height",
    "contact_angle",
    "rise_distance",
    "interface_width",
    "VLSResult",
    "vls_protocol",
    "wetting_scenario",
    "Diagnostics",
]


class BadPartition(ValueError):
    """Shapes overlap or leave gaps, or the initial projection failed."""


class NoJunction(RuntimeError):
    """No triple junction found."""


# -- shapes ----------------------------------------------------------------


class Shape:
    def distance(self, grid: Grid) -> np.ndarray:
        raise NotImplementedError


def _offsets(grid: Grid, point) -> list[np.ndarray]:
    coords = grid.coordinates()
    return [grid.minimum_image(x - p, ax) for ax, (x, p) in enumerate(zip(coords, point))]


@dataclass(frozen=True)
class Circle(Shape):
    """Disk (ball in 3D) with periodic minimum-image distance."""

    center: tuple[float, ...]
    radius: float

    def distance(self, grid):
        off = _offsets(grid, self.center)
        return np.sqrt(sum(o**2 for o in off)) - self.radius


@dataclass(frozen=True)
class HalfSpace(Shape):
    """``x[axis] < value`` (or ``>`` when ``below=False``), measured by minimum image."""

    axis: int
    value: float
    below: bool = True

    def distance(self, grid):
        x = grid.coordinates()[self.axis]
        d = grid.minimum_image(x - self.value, self.axis)
        d = d if self.below else -d
        return np.broadcast_to(d, grid.shape).copy()


@dataclass(frozen=True)
class Slab(Shape):
    """Band ``lo <= x[axis] < hi`` (periodic)."""

    axis: int
    lo: float
    hi: float

    def distance(self, grid):
        if not self.hi > self.lo:
            raise ValueError("slab needs hi > lo")
        x = grid.coordinates()[self.axis]
        mid, half = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)
        d = np.abs(grid.minimum_image(x - mid, self.axis)) - half
        return np.broadcast_to(d, grid.shape).copy()


@dataclass(frozen=True)
class Substrate(Shape):
    """Solid below a height profile in 2D: ``bottom <= y < h(x)``.

    ``heights`` is a constant or a polyline ``[(x0, h0), (x1, h1), ...]``
    spanning one period in ``x``; distance to the polyline is exact.
    """

    heights: float | tuple = 0.25
    bottom: float = 0.0

    def distance(self, grid):
        if grid.dim != 2:
            raise ValueError("Substrate is a 2D shape")
        x, y = grid.coordinates()
        if np.isscalar(self.heights):
            top = np.broadcast_to(y - float(self.heights), grid.shape)
        else:
            top = self._polyline_distance(grid)
        below = np.broadcast_to(grid.minimum_image(self.bottom - y, 1), grid.shape)
        inside = (top < 0) & (below < 0)
        outside = np.minimum(np.where(top > 0, top, np.inf), np.where(below > 0, below, np.inf))
        return np.where(inside, np.maximum(top, below), outside)

    def _polyline_distance(self, grid):
        pts = np.asarray(self.heights, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("polyline heights need at least two (x, h) points")
        Lx = grid.lengths[0]
        # periodic copies so distances near x = 0 and x = Lx are exact
        pts = np.concatenate([pts - [Lx, 0.0], pts, pts + [Lx, 0.0]])
        x, y = grid.coordinates()
        X = np.broadcast_to(x, grid.shape)[..., None]
        Y = np.broadcast_to(y, grid.shape)[..., None]
        a, b = pts[:-1], pts[1:]
        d = b - a
        t = ((X - a[:, 0]) * d[:, 0] + (Y - a[:, 1]) * d[:, 1]) / np.maximum(
            (d**2).sum(1), 1e-300
        )
        t = np.clip(t, 0.0, 1.0)
        dist = np.sqrt((X - a[:, 0] - t * d[:, 0]) ** 2 + (Y - a[:, 1] - t * d[:, 1]) ** 2).min(-1)
        h = np.interp(np.broadcast_to(x, grid.shape), pts[:, 0], pts[:, 1])
        return np.where(np.broadcast_to(y, grid.shape) < h, -dist, dist)


@dataclass(frozen=True)
class Intersection(Shape):
    parts: tuple

    def distance(self, grid):
        return np.maximum.reduce([p.distance(grid) for p in self.parts])


@dataclass(frozen=True)
class Union(Shape):
    parts: tuple

    def distance(self, grid):
        return np.minimum.reduce([p.distance(grid) for p in self.parts])


@dataclass(frozen=True)
class Difference(Shape):
    keep: Shape
    remove: Shape

    def distance(self, grid):
        return np.maximum(self.keep.distance(grid), -self.remove.distance(grid))


@dataclass(frozen=True)
class Rest(Shape):
    """Complement of the union of ``others``."""

    others: tuple

    def distance(self, grid):
        return -np.minimum.reduce([p.distance(grid) for p in self.others])


def init_from_shapes(grid: Grid, epsilon: float, shapes: Sequence[Shape]) -> PhaseState:
    """``u_k = q(d_k / eps)`` followed by one partition projection.

    Away from all boundaries (``|d_k| > 4 eps`` for every ``k``) exactly one
    shape must contain each point.
    """
    if len(shapes) < 2:
        raise ValueError("need at least two shapes")
    d = np.stack([s.distance(grid) for s in shapes])
    far = np.all(np.abs(d) > 4.0 * epsilon, axis=0)
    count = np.sum(d < 0, axis=0)
    if np.any(far & (count != 1)):
        n_bad = int(np.count_nonzero(far & (count != 1)))
        raise BadPartition(f"{n_bad} bulk cells are covered by zero or several shapes")
    state = PhaseState(grid, optimal_profile(d / epsilon), epsilon)
    state = project_partition(state, np.ones(len(shapes)), SolverParams(dt=1.0))
    res = state.partition_residual()
    if res > 1e-8:
        raise BadPartition(f"partition residual {res:.3e} after projection")
    return state


# -- contours ----------------------------------------------------------------


@dataclass
class Contour:
    """Polyline in physical coordinates, unwrapped across the periodic boundary."""

    points: np.ndarray
    closed: bool

    @property
    def length(self) -> float:
        p = np.vstack([self.points, self.points[:1]]) if self.closed else self.points
        return float(np.sum(np.hypot(*np.diff(p, axis=0).T)))

    @property
    def area(self) -> float:
        x, y = self.points.T
        return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    @property
    def radius(self) -> float:
        """Radius of the disk with the enclosed area."""
        return math.sqrt(self.area / math.pi)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


# segments per marching-squares case, as pairs of cell-edge numbers;
# saddles (5, 10) are listed for "centre outside" and "centre inside"
_CASES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(0, 2)], 11: [(1, 2)], 12: [(1, 3)], 13: [(0, 1)], 14: [(3, 0)],
}
_SADDLE = {
    5: ([(3, 0), (1, 2)], [(0, 1), (2, 3)]),
    10: ([(0, 1), (2, 3)], [(3, 0), (1, 2)]),
}


def extract_contour(
    state: PhaseState | np.ndarray, phase: int = 0, level: float = 0.5, grid: Grid | None = None
) -> list[Contour]:
    """Level-set polylines of one phase by periodic marching squares.

    Crossings are linearly interpolated along grid lines; ambiguous saddle
    cells are resolved with the cell average.  ``state`` may also be a bare
    array together with ``grid``.  A 3D field gives one contour list per
    slice along the last axis.
    """
    if isinstance(state, PhaseState):
        grid, f = state.grid, state.u[phase]
    else:
        f = np.asarray(state, dtype=float)
        if grid is None:
            raise ValueError("a bare array needs its grid")
    if grid.dim == 3:
        plane = Grid(grid.sizes[:2], grid.lengths[:2])
        return [extract_contour(f[..., k], level=level, grid=plane) for k in range(grid.sizes[2])]
    if grid.dim != 2:
        raise ValueError("extract_contour needs a 2D or 3D field")
    f = f - level
    n0, n1 = grid.shape
    h0, h1 = grid.spacings
    inside = f > 0
    c0 = inside
    c1 = np.roll(inside, -1, 0)
    c2 = np.roll(c1, -1, 1)
    c3 = np.roll(inside, -1, 1)
    case = c0 + 2 * c1.astype(int) + 4 * c2.astype(int) + 8 * c3.astype(int)
    cells = np.argwhere((case != 0) & (case != 15))
    if cells.size == 0:
        return []

    def edge_key(i, j, e):
        # global identity of a cell edge: ('a', i, j) joins (i,j)-(i+1,j), ('b', i, j) joins (i,j)-(i,j+1)
        if e == 0:
            return (0, i, j)
        if e == 1:
            return (1, (i + 1) % n0, j)
        if e == 2:
            return (0, i, (j + 1) % n1)
        return (1, i, j)

    def edge_point(key):
        kind, i, j = key
        a = f[i, j]
        if kind == 0:
            b = f[(i + 1) % n0, j]
            t = a / (a - b)
            return np.array([(i + t) * h0, j * h1])
        b = f[i, (j + 1) % n1]
        t = a / (a - b)
        return np.array([i * h0, (j + t) * h1])

    links: dict = {}
    for i, j in cells:
        c = int(case[i, j])
        if c in _SADDLE:
            centre = 0.25 * (f[i, j] + f[(i + 1) % n0, j] + f[(i + 1) % n0, (j + 1) % n1] + f[i, (j + 1) % n1])
            segs = _SADDLE[c][1 if centre > 0 else 0]
        else:
            segs = _CASES[c]
        for ea, eb in segs:
            ka, kb = edge_key(i, j, ea), edge_key(i, j, eb)
            links.setdefault(ka, []).append(kb)
            links.setdefault(kb, []).append(ka)

    period = np.array(grid.lengths)
    seen: set = set()
    contours = []
    for start in links:
        if start in seen:
            continue
        path = [start]
        seen.add(start)
        prev, cur, looped = None, start, False
        while True:
            cands = list(links[cur])
            if prev is not None:
                cands.remove(prev)
            if not cands:
                break
            nxt = cands[0]
            if nxt == start:
                looped = True
                break
            if nxt in seen:
                break
            path.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        pts = [edge_point(path[0])]
        for key in path[1:]:
            p = edge_point(key)
            pts.append(p - period * np.round((p - pts[-1]) / period))
        pts = np.array(pts)
        closing = edge_point(path[0])
        closing = closing - period * np.round((closing - pts[-1]) / period)
        closed = looped and np.allclose(closing, pts[0])
        if looped and not closed:
            # wraps the torus: keep the last segment so the polyline spans a period
            pts = np.vstack([pts, closing])
        contours.append(Contour(pts, bool(closed)))
    return contours


# -- junctions -------------------------------------------------------------


def _sample(grid: Grid, field_: np.ndarray, pts: np.ndarray) -> np.ndarray:
    idx = (np.asarray(pts, dtype=float) / np.array(grid.spacings)).T
    return ndimage.map_coordinates(field_, idx, order=3, mode="grid-wrap")


def locate_junction(state: PhaseState, phases=(0, 1, 2), min_level: float = 0.2) -> list[np.ndarray]:
    """Triple points of ``phases``, refined to sub-cell accuracy.

    Candidates are the maxima of ``min_k u_k`` over connected regions where it
    exceeds ``min_level``; each is refined by Newton's method on
    ``u_i - u_j = u_j - u_k = 0`` with cubic interpolation.
    """
    g = state.grid
    if g.dim != 2:
        raise ValueError("junction diagnostics are 2D only")
    i, j, k = phases
    u = state.u
    m = np.minimum(np.minimum(u[i], u[j]), u[k])
    labels, n = ndimage.label(m > min_level)
    if n == 0:
        raise NoJunction(f"min over phases never exceeds {min_level}")
    h = np.array(g.spacings)
    out = []
    for lab in range(1, n + 1):
        cells = np.argwhere(labels == lab)
        best = cells[np.argmax(m[labels == lab])]
        x = best * h
        fi, fj, fk = u[i], u[j], u[k]

        def resid(p):
            vi, vj, vk = (_sample(g, a, p[None])[0] for a in (fi, fj, fk))
            return np.array([vi - vj, vj - vk])

        for _ in range(20):
            r = resid(x)
            jac = np.empty((2, 2))
            for ax in range(2):
                dx = np.zeros(2)
                dx[ax] = 1e-3 * h[ax]
                jac[:, ax] = (resid(x + dx) - resid(x - dx)) / (2e-3 * h[ax])
            try:
                step = np.linalg.solve(jac, r)
            except np.linalg.LinAlgError:
                break
            step_len = np.linalg.norm(step / h)
            if step_len > 2.0:
                step *= 2.0 / step_len
            x = x - step
            if np.linalg.norm(step / h) < 1e-10:
                break
        out.append(np.mod(x, g.lengths))
    return out


def measure_angles(
    state: PhaseState,
    junction: np.ndarray | None = None,
    phases=(0, 1, 2),
    radius: float | None = None,
    n_samples: int = 1440,
    extrapolate: bool = True,
) -> np.ndarray:
    """Sector angles (radians) of ``phases`` around a triple junction.

    The phase label ``argmax_k u_k`` is read on a circle of radius ``radius``
    (default ``5 eps``) about the junction; label changes are located by
    linear interpolation of ``u_a - u_b``.  The angles sum to ``2 pi``.

    Curved interfaces seen along a chord of length ``rho`` are off by roughly
    ``rho / (2 R)``; with ``extrapolate`` the result is ``2 s(rho) - s(2 rho)``,
    which removes that first-order bias.
    """
    if junction is None:
        junction = locate_junction(state, phases)[0]
    rho = 5.0 * state.epsilon if radius is None else radius
    near = _sectors(state, junction, phases, rho, n_samples)
    if not extrapolate:
        return near
    return 2.0 * near - _sectors(state, junction, phases, 2.0 * rho, n_samples)


def _sectors(state, junction, phases, rho, n_samples):
    g = state.grid
    t = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    pts = np.asarray(junction)[None, :] + rho * np.column_stack([np.cos(t), np.sin(t)])
    vals = np.stack([_sample(g, state.u[p], pts) for p in phases])
    lab = np.argmax(vals, axis=0)
    change = np.flatnonzero(lab != np.roll(lab, -1))
    if change.size < 3:
        raise NoJunction(f"only {change.size} interface crossings on the sampling circle")
    dt = t[1] - t[0]
    angles = []
    for c in change:
        a, b = lab[c], lab[(c + 1) % n_samples]
        d0 = vals[a, c] - vals[b, c]
        d1 = vals[a, (c + 1) % n_samples] - vals[b, (c + 1) % n_samples]
        frac = d0 / (d0 - d1) if d0 != d1 else 0.5
        angles.append((t[c] + frac * dt, b))
    sectors = np.zeros(len(phases))
    for n_, (theta, entering) in enumerate(angles):
        nxt = angles[(n_ + 1) % len(angles)][0]
        span = (nxt - theta) % (2.0 * np.pi)
        sectors[entering] += span
    return sectors


# -- wetting / interface metrics ---------------------------------------------


def substrate_height(state: PhaseState, solid: int) -> float:
    """Median height of the solid's half-level along the columns of a 2D state."""
    g = state.grid
    s = state.u[solid]
    h = g.spacings[1]
    heights = []
    for col in s:
        above = np.flatnonzero((col[:-1] >= 0.5) & (col[1:] < 0.5))
        for j in above:
            heights.append((j + (col[j] - 0.5) / (col[j] - col[j + 1])) * h)
    if not heights:
        raise ValueError("solid phase has no upper boundary")
    return float(np.median(heights))


def _fit_circle(pts: np.ndarray) -> tuple[np.ndarray, float]:
    # algebraic least-squares fit x^2 + y^2 + D x + E y + F = 0
    x, y = pts.T
    a = np.column_stack([x, y, np.ones_like(x)])
    rhs = -(x**2 + y**2)
    (D, E, F), *_ = np.linalg.lstsq(a, rhs, rcond=None)
    c = np.array([-D / 2, -E / 2])
    return c, float(np.sqrt(c @ c - F))


def contact_angle(
    state: PhaseState,
    liquid: int,
    solid: int,
    height: float | None = None,
    margin: float | None = None,
) -> float:
    """Contact angle (radians, through the liquid) of a droplet resting on a flat solid.

    A circle is fitted to the liquid half-level points more than ``margin``
    (default ``4 eps``) above the substrate; ``cos(theta) = (y_s - y_c) / R``.
    """
    ys = substrate_height(state, solid) if height is None else height
    margin = 4.0 * state.epsilon if margin is None else margin
    contours = extract_contour(state, liquid)
    if not contours:
        raise ValueError("no liquid interface")
    drop = max(contours, key=lambda c: c.area)
    pts = drop.points[drop.points[:, 1] > ys + margin]
    if len(pts) < 5:
        raise ValueError("too few interface points above the substrate")
    c, r = _fit_circle(pts)
    return float(np.arccos(np.clip((ys - c[1]) / r, -1.0, 1.0)))


def rise_distance(positions: np.ndarray, values: np.ndarray, lo: float = 0.1, hi: float = 0.9) -> float:
    """Distance between the last crossings of ``hi`` and ``lo`` along a sampled profile."""
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)

    def crossing(level):
        s = values - level
        idx = np.flatnonzero(np.sign(s[:-1]) != np.sign(s[1:]))
        if idx.size == 0:
            raise ValueError(f"profile never crosses {level}")
        i = idx[-1]
        t = s[i] / (s[i] - s[i + 1])
        return positions[i] + t * (positions[i + 1] - positions[i])

    return abs(crossing(lo) - crossing(hi))


def interface_width(
    state: PhaseState, phase: int, start, end, n_samples: int = 2001
) -> float:
    """10-90% rise distance of ``u_phase`` along the segment ``start -> end``."""
    start, end = np.asarray(start, float), np.asarray(end, float)
    s = np.linspace(0.0, 1.0, n_samples)
    pts = start[None] + s[:, None] * (end - start)[None]
    vals = _sample(state.grid, state.u[phase], pts)
    return rise_distance(s * np.linalg.norm(end - start), vals)


# -- protocols -------------------------------------------------------------


@dataclass
class VLSResult:
    stage_a: RunResult
    stage_b: RunResult | None
    initial_volumes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def state(self) -> PhaseState:
        return (self.stage_b or self.stage_a).state


def vls_mobilities(delta: float, solid: int, n_phases: int = 3) -> MobilitySet:
    """Per-phase ``m_S = delta`` and ``1`` elsewhere, i.e. pairs ``(delta/(1+delta), 1/2, ...)``."""
    m = np.ones(n_phases)
    m[solid] = delta
    return MobilitySet.from_per_phase(m)


def vls_protocol(
    state: PhaseState,
    tensions: TensionSet,
    params: SolverParams,
    t_end: float,
    solid: int = 0,
    liquid: int = 1,
    vapor: int = 2,
    t_growth: float = 0.2,
    growth_rate: float = 0.25,
    delta: float | None = None,
    callbacks=(),
    every: int = 10,
) -> VLSResult:
    """Two-stage nanowire growth.

    Stage A (``t <= t_growth``): equal pairwise mobilities and every volume
    held at its initial value, so the droplet relaxes to its wetted shape.
    Stage B: per-phase mobilities ``(delta, 1, 1)`` with ``delta = 1/(2K)`` by
    default, liquid volume fixed, solid fed from the vapour at rate
    ``growth_rate``.
    """
    v0 = state.volumes()
    equal = MobilitySet.from_pairs(np.ones(len(v0) * (len(v0) - 1) // 2))
    sched_a = VolumeSchedule.constant(state, range(state.n_phases))
    t_a = min(t_growth, t_end)
    res_a = run(state, tensions, equal, params, t_a, sched_a, callbacks, every)
    if t_end <= t_growth:
        return VLSResult(res_a, None, v0)
    if delta is None:
        delta = 1.0 / (2.0 * state.grid.shape[0])
    mob = vls_mobilities(delta, solid, state.n_phases)
    sched_b = VolumeSchedule.vls(res_a.state, solid, liquid, vapor, growth_rate)
    targets = sched_b.targets.copy()
    targets[liquid] = v0[liquid]
    sched_b = VolumeSchedule(
        sched_b.modes, targets, sched_b.potentials, growth_rate, solid, liquid, vapor
    )
    res_b = run(res_a.state, tensions, mob, params, t_end, sched_b, callbacks, every)
    return VLSResult(res_a, res_b, v0)


def wetting_scenario(
    state: PhaseState,
    tensions: TensionSet,
    params: SolverParams,
    t_end: float,
    liquid: int = 0,
    vapor: int = 1,
    solid: int = 2,
    hold_liquid: bool = True,
    mobility: MobilitySet | None = None,
    callbacks=(),
    every: int = 10,
) -> RunResult:
    """Droplet on a frozen solid: ``m_LV = 1`` and zero mobility on both solid interfaces.

    With ``hold_liquid`` the liquid volume is fixed so the droplet settles to
    an equilibrium cap instead of slowly evaporating.  A custom ``mobility``
    must still give the solid zero per-phase mobility.
    """
    if mobility is None:
        m = np.zeros(state.n_phases)
        m[liquid] = m[vapor] = 2.0
        mob = MobilitySet.from_per_phase(m)
    else:
        mob = mobility
        if mob.kind != "additive" or mob.per_phase[solid] != 0.0:
            raise ValueError("wetting needs a frozen solid (per-phase mobility 0)")
    sched = VolumeSchedule.constant(state, [liquid]) if hold_liquid else None
    return run(state, tensions, mob, params, t_end, sched, callbacks, every)

"""Unit-speed geodesics on a surface of revolution.

State is (t, theta, u, v) with u = dt/ds and v = dtheta/ds.  The Clairaut
constant c = r(t)^2 v is conserved; r * v is the cosine of the angle with
the local parallel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as kern
from .surface import SurfaceOfRevolution

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
TWO_PI = 2.0 * math.pi


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Tolerances:
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    h_max: float = 0.05          # max stored step (keeps the polyline fine)
    dtheta_max: float = 0.05     # max rotation per stored step
    max_steps: int = 20_000_000


FAST = Tolerances(h_max=1.0, dtheta_max=0.0)


@dataclass(frozen=True)
class GeodesicState:
    t: float
    theta: float
    u: float
    v: float
    s: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.theta, self.u, self.v])

    def clairaut(self, surface: SurfaceOfRevolution) -> float:
        r = surface.profile.r(self.t)
        return r * r * self.v


@dataclass(frozen=True)
class SelfIntersection:
    s1: float
    s2: float
    t: float
    theta: float
    point: tuple
    sin_angle: float
    low_confidence: bool


@dataclass(eq=False)
class GeodesicTrace:
    """Sampled geodesic.  Rows of ``y`` are exact integrator states (not
    interpolated), so ``state_at`` can reach any arc length with one short
    step."""

    surface: SurfaceOfRevolution
    s: np.ndarray
    y: np.ndarray
    flags: np.ndarray
    c: float
    launch_alpha: float | None = None
    kind: str = "numeric"          # numeric | meridian | parallel
    pole_passes: np.ndarray = field(default_factory=lambda: np.empty(0))
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0])

    @property
    def t(self) -> np.ndarray:
        return self.y[:, 0]

    @property
    def theta(self) -> np.ndarray:
        return self.y[:, 1]

    @property
    def states(self) -> list[GeodesicState]:
        return [GeodesicState(*row, s=float(si)) for si, row in zip(self.s, self.y)]

    @property
    def turning_events(self) -> list[tuple[float, float]]:
        idx = np.flatnonzero(self.flags == kern.FLAG_TURN)
        return [(float(self.s[i]), float(self.y[i, 0])) for i in idx]

    @property
    def gp_crossings(self) -> np.ndarray:
        return self.s[self.flags == kern.FLAG_GP]

    def state_at(self, s) -> np.ndarray:
        q = np.atleast_1d(np.asarray(s, dtype=float))
        if self.kind == "parallel":
            y0 = self.y[0]
            out = np.empty((len(q), 4))
            out[:, 0] = y0[0]
            out[:, 1] = y0[1] + y0[3] * (q - self.s[0])
            out[:, 2] = 0.0
            out[:, 3] = y0[3]
            return out
        if self.kind == "meridian":
            return _meridian_states(self, q)
        return kern.states_at(self.s, self.y, q, self.surface.profile.packed)

    def rotation(self, s) -> np.ndarray:
        """Net oriented rotation theta(s) - theta(s0); chart jumps at pole
        passages of meridians are not rotation and are removed."""
        q = np.atleast_1d(np.asarray(s, dtype=float))
        th = self.state_at(q)[:, 1] - self.y[0, 1]
        if len(self.pole_passes):
            th = th - math.pi * np.searchsorted(self.pole_passes, q, side="right")
        return th

    def positions(self, rows: np.ndarray | None = None) -> np.ndarray:
        y = self.y if rows is None else rows
        return self.surface.position(y[:, 0], y[:, 1])

    def clairaut_values(self) -> np.ndarray:
        r = self.surface.profile.r(self.y[:, 0])
        return r * r * self.y[:, 3]

    def speed_values(self) -> np.ndarray:
        r = self.surface.profile.r(self.y[:, 0])
        return np.sqrt(self.y[:, 2] ** 2 + (r * self.y[:, 3]) ** 2)

    def to_csv(self, path) -> None:
        c = self.clairaut_values()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "t", "theta", "u", "v", "c"])
            for si, row, ci in zip(self.s, self.y, c):
                w.writerow([repr(float(si))] + [repr(float(v)) for v in row] + [repr(float(ci))])


def _meridian_states(trace: GeodesicTrace, q: np.ndarray) -> np.ndarray:
    """Exact states on a meridian: t moves at unit speed and reflects at the
    poles, where theta jumps by pi."""
    L = trace.surface.total_length
    y0 = trace.y[0]
    u0 = 1.0 if y0[2] >= 0 else -1.0
    # unfold t onto a line of period 2L
    z = y0[0] if u0 > 0 else 2 * L - y0[0]
    zz = (z + (q - trace.s[0])) % (2 * L)
    out = np.empty((len(q), 4))
    fwd = zz <= L
    out[:, 0] = np.where(fwd, zz, 2 * L - zz)
    out[:, 2] = np.where(fwd, 1.0, -1.0)
    out[:, 3] = 0.0
    out[:, 1] = y0[1] + math.pi * np.searchsorted(trace.pole_passes, q, side="right")
    return out


def launch_from_great_parallel(surface: SurfaceOfRevolution, alpha: float,
                               orientation: int = 1, theta0: float = 0.0) -> GeodesicState:
    """State on the great parallel making angle ``alpha`` with it, heading
    toward larger t (the cone side of a smoothed cone)."""
    rmax = surface.r_max
    sgn = 1.0 if orientation >= 0 else -1.0
    if abs(alpha - 0.5 * math.pi) < 1e-15:
        return GeodesicState(surface.great_parallel_t, theta0, 1.0, 0.0)
    return GeodesicState(surface.great_parallel_t, theta0, math.sin(alpha),
                         sgn * math.cos(alpha) / rmax)


def clairaut_angle(state: GeodesicState, surface: SurfaceOfRevolution) -> float:
    r = surface.profile.r(state.t)
    return math.acos(min(1.0, max(-1.0, r * state.v)))


def _normalize(surface, y0: np.ndarray) -> np.ndarray:
    r = surface.profile.r(y0[0])
    sp = math.hypot(y0[2], r * y0[3])
    if sp == 0.0:
        raise IntegrationError("zero initial velocity")
    y = y0.copy()
    y[2] /= sp
    y[3] /= sp
    return y


def integrate(surface: SurfaceOfRevolution, state0: GeodesicState, max_length: float,
              tol: Tolerances = Tolerances(), stop_turns: int = 0, stop_gp: int = 0,
              record: bool = True, launch_alpha: float | None = None,
              t_event: float | None = None) -> GeodesicTrace:
    """Integrate a unit-speed geodesic for ``max_length`` or until the given
    number of turning events / great-parallel crossings.

    Meridians (c = 0) and geodesic parallels (u = 0 where r' = 0) are
    produced in closed form.  ``t_event`` replaces the great parallel as
    the parallel whose crossings are counted by ``stop_gp``.
    """
    prof = surface.profile
    y0 = _normalize(surface, state0.as_array())
    r0 = prof.r(y0[0])
    c = r0 * r0 * y0[3]
    if y0[3] == 0.0:
        return _meridian_trace(surface, y0, max_length, tol, stop_gp, launch_alpha)
    if y0[2] == 0.0 and abs(prof.dr(y0[0])) < 1e-13:
        return _parallel_trace(surface, y0, max_length, tol, launch_alpha)
    S, Y, F, n, status, n_turn, n_gp = kern.integrate_kernel(
        prof.packed, y0, float(max_length), tol.rtol, tol.atol, tol.h_max,
        tol.dtheta_max, surface.great_parallel_t if t_event is None else float(t_event),
        int(stop_turns), int(stop_gp),
        bool(record), int(tol.max_steps))
    if status < 0:
        why = {kern.STATUS_UNDERFLOW: "step size underflow",
               kern.STATUS_FORBIDDEN: "trajectory entered r < |c|",
               kern.STATUS_MAXSTEPS: "step limit reached"}[status]
        raise IntegrationError(f"{why} at s={S[-1]:.6g} (c={c:.12g})")
    S = S + state0.s
    return GeodesicTrace(surface, S, Y, F, float(c), launch_alpha)


def _meridian_trace(surface, y0, max_length, tol, stop_gp, launch_alpha):
    L = surface.total_length
    if surface.topology == "torus":
        raise IntegrationError("torus meridians are not handled in closed form; launch with v != 0")
    u0 = 1.0 if y0[2] >= 0 else -1.0
    first = (L - y0[0]) if u0 > 0 else y0[0]
    passes = np.arange(first, max_length - 1e-15, L) if first < max_length else np.empty(0)
    npts = max(2, int(math.ceil(max_length / tol.h_max)) + 1)
    grid = np.linspace(0.0, max_length, npts)
    grid = grid[np.min(np.abs(grid[:, None] - passes[None, :]), axis=1, initial=np.inf) > 1e-12]
    s = np.sort(np.concatenate([grid, passes, passes]))
    y = np.zeros((len(s), 4))
    tr = GeodesicTrace(surface, s, y, np.zeros(len(s), dtype=np.int64), 0.0,
                       launch_alpha, "meridian", passes)
    y[0] = [y0[0], y0[1], u0, 0.0]
    y[:] = _meridian_states(tr, s)
    # each pole appears twice: before and after the chart jump
    for p in passes:
        i = int(np.searchsorted(s, p, side="left"))
        y[i, 1] -= math.pi
    tr.flags[0] = kern.FLAG_START
    return tr


def _parallel_trace(surface, y0, max_length, tol, launch_alpha):
    step = tol.h_max
    if tol.dtheta_max > 0:
        step = min(step, tol.dtheta_max / abs(y0[3]))
    npts = max(2, int(math.ceil(max_length / step)) + 1)
    s = np.linspace(0.0, max_length, npts)
    y = np.empty((npts, 4))
    y[:, 0] = y0[0]
    y[:, 1] = y0[1] + y0[3] * s
    y[:, 2] = 0.0
    y[:, 3] = y0[3]
    r = surface.profile.r(y0[0])
    flags = np.zeros(npts, dtype=np.int64)
    flags[0] = kern.FLAG_START
    return GeodesicTrace(surface, s, y, flags, float(r * r * y0[3]), launch_alpha, "parallel")


def total_rotation(trace: GeodesicTrace, s):
    out = trace.rotation(s)
    return out if np.ndim(s) else float(out[0])


def crosses_great_parallel(trace: GeodesicTrace, tol: float = 1e-9) -> bool:
    surf = trace.surface
    g = trace.t - surf.great_parallel_t
    if surf.topology == "torus":
        L = surf.total_length
        g = g - np.floor(g / L + 0.5) * L
    if np.any(np.abs(g) <= tol):
        return True
    sg = np.sign(g)
    jumps = np.abs(np.diff(g)) < 0.25 * surf.total_length
    return bool(np.any((sg[1:] != sg[:-1]) & jumps))


def _wrap(x):
    return (x + math.pi) % TWO_PI - math.pi


def detect_self_intersections(trace: GeodesicTrace, closed: bool = False,
                              max_sep: float = 0.0, refine: bool = True,
                              angle_tol: float = 1e-3) -> list[SelfIntersection]:
    """Transverse self-crossings on the (theta mod 2pi, t) cylinder.

    Candidates come from a uniform-grid sweep over the stored polyline and
    are refined by Newton's method on exact states.  ``closed`` joins the
    last row back to the first (the last row must repeat the start point).
    ``max_sep`` > 0 keeps only pairs at most that far apart along the curve.
    """
    s, y = trace.s, trace.y
    rows = len(s) - 1 if closed else len(s)
    th = np.ascontiguousarray(y[:rows, 1])
    tt = np.ascontiguousarray(y[:rows, 0])
    if rows < 3:
        return []
    seg_th = np.abs(np.diff(th))
    seg_t = np.abs(np.diff(tt))
    cell_th = max(4.0 * float(np.max(seg_th, initial=0.0)), 0.02)
    cell_t = max(4.0 * float(np.max(seg_t, initial=0.0)), 1e-3)
    cell_th = min(cell_th, TWO_PI)
    raw = kern.polyline_crossings(th, tt, np.ascontiguousarray(s), closed, cell_th, cell_t,
                                  float(max_sep), float(trace.length))
    if len(raw) == 0:
        return []
    a = raw[:, 0].astype(np.int64)
    b = raw[:, 1].astype(np.int64)
    s1 = s[a] + raw[:, 2] * (s[a + 1] - s[a])
    s2 = s[b] + raw[:, 3] * (s[b + 1] - s[b])
    sang = raw[:, 4]
    ok = np.ones(len(raw), dtype=bool)
    if refine:
        s1, s2, ok = _refine_crossings(trace, s1, s2, closed, trace.length)
    st1 = trace.state_at(s1)
    pts = trace.surface.position(st1[:, 0], st1[:, 1])
    out = [SelfIntersection(float(s1[i]), float(s2[i]), float(st1[i, 0]), float(st1[i, 1] % TWO_PI),
                            tuple(float(v) for v in pts[i]), float(sang[i]),
                            bool(sang[i] < angle_tol or not ok[i]))
           for i in range(len(raw))]
    out.sort(key=lambda x: (x.s1, x.s2))
    return out


def _refine_crossings(trace, s1, s2, closed, period):
    """Newton's method on (theta difference mod 2pi, t difference), run on
    all candidate pairs at once."""
    lo, hi = trace.s[0], trace.s[-1]
    s1 = s1.astype(float).copy()
    s2 = s2.astype(float).copy()
    m = len(s1)
    active = np.ones(m, dtype=bool)
    bad = np.zeros(m, dtype=bool)
    for _ in range(12):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        st = trace.state_at(np.concatenate([s1[idx], s2[idx]]))
        A, B = st[: idx.size], st[idx.size:]
        f1 = _wrap(A[:, 1] - B[:, 1])
        f2 = A[:, 0] - B[:, 0]
        done = (np.abs(f1) < 1e-13) & (np.abs(f2) < 1e-13)
        active[idx[done]] = False
        j11, j12, j21, j22 = A[:, 3], -B[:, 3], A[:, 2], -B[:, 2]
        det = j11 * j22 - j12 * j21
        sing = ~done & (np.abs(det) < 1e-14)
        bad[idx[sing]] = True
        active[idx[sing]] = False
        go = ~done & ~sing
        g = idx[go]
        d1 = (j22[go] * f1[go] - j12[go] * f2[go]) / det[go]
        d2 = (-j21[go] * f1[go] + j11[go] * f2[go]) / det[go]
        n1 = s1[g] - d1
        n2 = s2[g] - d2
        if closed:
            n1 = lo + (n1 - lo) % period
            n2 = lo + (n2 - lo) % period
        else:
            out = ~((lo <= n1) & (n1 <= hi) & (lo <= n2) & (n2 <= hi))
            bad[g[out]] = True
            active[g[out]] = False
            n1 = np.clip(n1, lo, hi)
            n2 = np.clip(n2, lo, hi)
        s1[g] = n1
        s2[g] = n2
    st = trace.state_at(np.concatenate([s1, s2]))
    A, B = st[:m], st[m:]
    ok = ~bad & (np.abs(_wrap(A[:, 1] - B[:, 1])) < 1e-10) & (np.abs(A[:, 0] - B[:, 0]) < 1e-10)
    return s1, s2, ok


@dataclass(frozen=True)
class SymmetricCrossing:
    """Crossing of the two halves of an excursion on the meridian through
    its turning point; ``order`` j means the loop between them rotates by
    2*pi*j."""
    order: int
    s_turn: float
    sigma: float
    t: float
    theta: float

    @property
    def s1(self) -> float:
        return self.s_turn - self.sigma

    @property
    def s2(self) -> float:
        return self.s_turn + self.sigma

    @property
    def loop_length(self) -> float:
        return 2.0 * self.sigma


def symmetric_crossings(trace: GeodesicTrace, s_turn: float, sigma_max: float,
                        step: float = 0.02) -> list[SymmetricCrossing]:
    """Crossings symmetric about the turning point at ``s_turn``: points
    s_turn -/+ sigma where the two halves have rotated apart by 2*pi*j.
    Both halves are mirror images, so they meet on the turning meridian."""
    if sigma_max <= 0:
        return []
    th_turn = float(trace.state_at(s_turn)[0, 1])

    def g(sig):
        st = trace.state_at(np.array([s_turn - sig, s_turn + sig]))
        return abs(st[1, 1] - st[0, 1])

    m = max(8, int(math.ceil(sigma_max / step)))
    sig = np.linspace(0.0, sigma_max, m + 1)
    st = trace.state_at(np.concatenate([s_turn - sig, s_turn + sig]))
    sep = np.abs(st[m + 1:, 1] - st[:m + 1, 1])
    out = []
    jmax = int(sep[-1] // TWO_PI)
    for j in range(1, jmax + 1):
        target = TWO_PI * j
        k = int(np.searchsorted(sep, target))
        if k == 0 or k > m:
            continue
        root = brentq(lambda x: g(x) - target, sig[k - 1], sig[k], xtol=1e-14, rtol=1e-15)
        p = trace.state_at(np.array([s_turn + root]))[0]
        out.append(SymmetricCrossing(j, float(s_turn), float(root), float(p[0]),
                                     float((th_turn + math.copysign(math.pi * j, p[1] - th_turn)) % TWO_PI)))
    return out

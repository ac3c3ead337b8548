"""Closed geodesics by shooting on the launch angle at the great parallel.

A geodesic launched from the great parallel at angle alpha makes one
excursion to each side and comes back to the great parallel with the same
angle.  The rotation accumulated over that period, Phi(alpha), decides
closure: the geodesic closes after q periods iff q * Phi = 2 pi p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .geodesic_flow import (FAST, GeodesicState, GeodesicTrace, IntegrationError, Tolerances,
                            integrate, launch_from_great_parallel, symmetric_crossings)
from .surface import SurfaceOfRevolution

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
CASE_LABELS = ("meridian", "great_parallel", "belt", "cap", "cone", "other")


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodInfo:
    alpha: float
    phi: float           # rotation over one period
    length: float        # arc length of one period
    half_rot_cone: float  # rotation from the launch to the cone-side turn
    half_rot_disc: float
    t_turn_cone: float
    t_turn_disc: float


def _half(surface, alpha, toward_cone, tol):
    st = launch_from_great_parallel(surface, alpha)
    if not toward_cone:
        st = GeodesicState(st.t, st.theta, -st.u, st.v)
    cap = 4.0 * surface.total_length + 20.0
    tr = integrate(surface, st, cap, tol=tol, stop_turns=1, record=False)
    if tr.flags[-1] != 1:
        raise IntegrationError(f"no turning point within {cap:.3g} (alpha={alpha!r})")
    return tr.s[-1], tr.y[-1, 1] - tr.y[0, 1], tr.y[-1, 0]


def period_info(surface: SurfaceOfRevolution, alpha: float, tol: Tolerances = FAST) -> PeriodInfo:
    if not 0.0 < alpha < HALF_PI:
        raise SearchError("period rotation needs alpha in (0, pi/2)")
    sa, ra, ta = _half(surface, alpha, True, tol)
    sb, rb, tb = _half(surface, alpha, False, tol)
    return PeriodInfo(alpha, 2.0 * (ra + rb), 2.0 * (sa + sb), ra, rb, ta, tb)


def period_rotation(surface: SurfaceOfRevolution, alpha: float, tol: Tolerances = FAST) -> float:
    """Phi(alpha): rotation over one full period (both excursions)."""
    return period_info(surface, alpha, tol).phi


@dataclass(eq=False)
class ClosedGeodesic:
    """A closed geodesic stored as one period; any state along the whole
    curve is the period state rotated by a multiple of the period rotation."""

    surface: SurfaceOfRevolution
    launch_alpha: float
    period_trace: GeodesicTrace
    periods: int                 # q
    turns: int                   # p: full turns about the axis after q periods
    closure_residual: float
    case_label: str = ""
    family: int | None = None    # id of a continuous family, if any
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def period_length(self) -> float:
        return self.period_trace.length

    @property
    def length(self) -> float:
        return self.periods * self.period_length

    @property
    def phi(self) -> float:
        return float(self.period_trace.rotation(self.period_trace.s[-1])[0])

    @property
    def chart_shift(self) -> float:
        return float(self.period_trace.y[-1, 1] - self.period_trace.y[0, 1])

    @property
    def winding(self) -> tuple[int, int]:
        return self.turns, self.periods

    def state_at(self, s) -> np.ndarray:
        q = np.atleast_1d(np.asarray(s, dtype=float))
        P = self.period_length
        m = np.floor(q / P)
        r = q - m * P
        st = self.period_trace.state_at(r)
        st[:, 1] += m * self.chart_shift
        return st

    def point_at(self, s) -> np.ndarray:
        st = self.state_at(s)
        return self.surface.position(st[:, 0], st[:, 1])

    @property
    def trace(self) -> GeodesicTrace:
        """Full trace over all q periods (built on first use)."""
        tr = self._cache.get("trace")
        if tr is None:
            pt = self.period_trace
            if self.periods == 1:
                tr = pt
            else:
                P = self.period_length
                ss = [pt.s]
                ys = [pt.y]
                fs = [pt.flags]
                for m in range(1, self.periods):
                    y = pt.y[1:].copy()
                    y[:, 1] += m * self.chart_shift
                    ss.append(pt.s[1:] + m * P)
                    ys.append(y)
                    fs.append(pt.flags[1:])
                poles = np.concatenate([pt.pole_passes + m * P for m in range(self.periods)])
                tr = GeodesicTrace(self.surface, np.concatenate(ss), np.vstack(ys),
                                   np.concatenate(fs), pt.c, self.launch_alpha, pt.kind, poles)
                if pt.kind == "meridian":
                    tr.y[0] = pt.y[0]
            self._cache["trace"] = tr
        return tr

    def release(self) -> None:
        self._cache.clear()

    def turning_points(self) -> list[tuple[float, float]]:
        """(s, t) of the turning events of the first period."""
        return self.period_trace.turning_events

    def cone_turn(self) -> tuple[float, float] | None:
        """(s, t) of the turning point on the far side (first excursion)."""
        ev = self.turning_points()
        return ev[0] if ev else None

    def symmetric_loops(self) -> list:
        """Symmetric crossings of the first excursion (beyond the great
        parallel on the launch side)."""
        key = "sym"
        if key not in self._cache:
            ev = self.turning_points()
            out = []
            if self.period_trace.kind == "numeric" and ev:
                s_t = ev[0][0]
                out = symmetric_crossings(self.period_trace, s_t, s_t)
            self._cache[key] = out
        return self._cache[key]

    def record(self) -> dict:
        return {
            "alpha": self.launch_alpha,
            "case": self.case_label,
            "turns": self.turns,
            "periods": self.periods,
            "length": self.length,
            "period_length": self.period_length,
            "phi": self.phi,
            "closure_residual": self.closure_residual,
            "family": self.family,
        }


def classify(closed: ClosedGeodesic, surface: SurfaceOfRevolution | None = None) -> str:
    surface = surface or closed.surface
    return classify_alpha(closed.launch_alpha, surface, closed.period_trace.kind)


def classify_alpha(alpha: float, surface: SurfaceOfRevolution, kind: str = "numeric") -> str:
    if kind == "meridian" or abs(alpha - HALF_PI) < 1e-12:
        return "meridian"
    if kind == "parallel" or abs(alpha) < 1e-12:
        return "great_parallel"
    if not surface.is_smoothed_cone:
        return "other"
    a1, a2 = surface.alpha_prime, surface.alpha_double_prime
    if alpha < a1:
        return "belt"
    if alpha < a2:
        return "cone"
    return "cap"


def _period_trace(surface, alpha, tol):
    st = launch_from_great_parallel(surface, alpha)
    if abs(alpha) < 1e-15:
        return integrate(surface, st, TWO_PI * surface.r_max, tol=tol, launch_alpha=alpha)
    if abs(alpha - HALF_PI) < 1e-15:
        return integrate(surface, st, 2.0 * surface.total_length, tol=tol, launch_alpha=alpha)
    cap = 10.0 * surface.total_length + 50.0
    tr = integrate(surface, st, cap, tol=tol, stop_gp=2, launch_alpha=alpha)
    if tr.flags[-1] != 2:
        raise IntegrationError(f"period did not close within {cap:.3g} (alpha={alpha!r})")
    return tr


def closed_from_alpha(surface: SurfaceOfRevolution, alpha: float, turns: int, periods: int,
                      tol: Tolerances = Tolerances(), family: int | None = None) -> ClosedGeodesic:
    """Build the closed geodesic with launch angle alpha that closes after
    ``periods`` periods and ``turns`` turns; the residual measures how far
    the end state misses the start."""
    pt = _period_trace(surface, alpha, tol)
    cg = ClosedGeodesic(surface, float(alpha), pt, int(periods), int(turns), 0.0, family=family)
    cg.closure_residual = closure_residual(cg)
    cg.case_label = classify(cg, surface)
    return cg


def closure_residual(cg: ClosedGeodesic) -> float:
    """3D gap plus velocity gap between the start and the state after all
    q periods (the period end state is an exact integrator state)."""
    pt = cg.period_trace
    y0, pe = pt.y[0], pt.y[-1]
    th_end = y0[1] + cg.periods * (pe[1] - y0[1])
    p0 = cg.surface.position(y0[0], y0[1])[0]
    p1 = cg.surface.position(pe[0], th_end)[0]
    r0 = cg.surface.profile.r(y0[0])
    r1 = cg.surface.profile.r(pe[0])
    dvel = math.hypot(pe[2] - y0[2], r1 * pe[3] - r0 * y0[3])
    return float(np.linalg.norm(p1 - p0) + dvel)


def parallel_geodesic(surface: SurfaceOfRevolution, t: float, tol: Tolerances = Tolerances()) -> ClosedGeodesic:
    """Closed geodesic along the parallel at t (r'(t) must vanish)."""
    prof = surface.profile
    if abs(prof.dr(t)) > 1e-10:
        raise SearchError(f"parallel at t={t} is not a geodesic (r'={prof.dr(t):.3g})")
    r = prof.r(t)
    tr = integrate(surface, GeodesicState(t, 0.0, 0.0, 1.0 / r), TWO_PI * r, tol=tol, launch_alpha=0.0)
    cg = ClosedGeodesic(surface, 0.0, tr, 1, 1, 0.0, "great_parallel"
                        if abs(t - surface.great_parallel_t) < 1e-12 else "other")
    cg.closure_residual = float(abs(tr.y[-1, 1] - tr.y[0, 1] - TWO_PI) * r)
    return cg


def rational_targets(phi_lo: float, phi_hi: float, q_max: int) -> list[tuple[int, int]]:
    lo, hi = phi_lo / TWO_PI, phi_hi / TWO_PI
    out = set()
    for q in range(1, q_max + 1):
        for p in range(max(1, math.ceil(lo * q)), math.floor(hi * q) + 1):
            f = Fraction(p, q)
            out.add((f.numerator, f.denominator))
    return sorted(out, key=lambda pq: (pq[0] / pq[1], pq[1]))


@dataclass
class SearchResult:
    closed: list[ClosedGeodesic]
    unresolved: list[dict]
    families: list[dict]
    grid_alpha: np.ndarray
    grid_phi: np.ndarray
    grid_length: np.ndarray
    truncation: dict


def default_grid(size: int) -> np.ndarray:
    if size < 1000:
        raise SearchError(f"alpha grid needs at least 1000 points, got {size}")
    # uniform interior grid (endpoints handled as known closed geodesics)
    return (np.arange(size) + 0.5) * (HALF_PI / size)


def find_closed(surface: SurfaceOfRevolution, alpha_grid=2000, pq_list=None,
                closure_tol: float = 1e-6, q_max: int = 12, length_cutoff: float | None = None,
                tol: Tolerances = Tolerances(), flat_tol: float = 1e-7,
                build: bool = True) -> SearchResult:
    """Shoot on the launch angle for every rational rotation 2 pi p / q.

    Roots of Phi(alpha) - 2 pi p/q are bracketed on the grid and polished by
    Brent's method; each root becomes a ClosedGeodesic (or an unresolved
    record if its closure residual exceeds ``closure_tol``).  Stretches of
    the grid where Phi stays within ``flat_tol`` of a target are reported
    as continuous families with a few representatives.  The great parallel
    and the meridian are always included.
    """
    grid = default_grid(alpha_grid) if np.isscalar(alpha_grid) else np.asarray(alpha_grid, float)
    if len(grid) < 1000:
        raise SearchError(f"alpha grid needs at least 1000 points, got {len(grid)}")
    fast = Tolerances(rtol=tol.rtol, atol=tol.atol, h_max=1.0, dtheta_max=0.0)
    infos = [period_info(surface, float(a), fast) for a in grid]
    phi = np.array([i.phi for i in infos])
    plen = np.array([i.length for i in infos])
    if length_cutoff is None:
        length_cutoff = math.inf
    if pq_list is None:
        targets = rational_targets(float(phi.min()) - flat_tol, float(phi.max()) + flat_tol, q_max)
    else:
        targets = sorted({(Fraction(p, q).numerator, Fraction(p, q).denominator) for p, q in pq_list},
                         key=lambda pq: (pq[0] / pq[1], pq[1]))
    closed: list[ClosedGeodesic] = []
    unresolved: list[dict] = []
    families: list[dict] = []
    roots: list[tuple[float, int, int, int | None]] = []

    def phi_of(a):
        return period_info(surface, a, fast).phi

    for p, q in targets:
        tau = TWO_PI * p / q
        g = phi - tau
        flat = np.abs(g) < flat_tol
        # continuous families: runs of >= 3 flat grid points
        i = 0
        n = len(grid)
        while i < n:
            if flat[i]:
                j = i
                while j + 1 < n and flat[j + 1]:
                    j += 1
                if j - i + 1 >= 3:
                    if np.min(plen[i:j + 1]) * q <= length_cutoff:
                        fid = len(families)
                        reps = sorted({i, (i + j) // 2, j})
                        families.append({"id": fid, "turns": p, "periods": q,
                                         "alpha_range": [float(grid[i]), float(grid[j])],
                                         "n_grid_points": int(j - i + 1),
                                         "representatives": [float(grid[r]) for r in reps]})
                        roots.extend((float(grid[r]), p, q, fid) for r in reps)
                    i = j + 1
                    continue
            i += 1
        # isolated sign changes
        for i in range(len(grid) - 1):
            if flat[i] or flat[i + 1]:
                continue
            if (g[i] > 0) == (g[i + 1] > 0):
                continue
            if min(plen[i], plen[i + 1]) * q > length_cutoff:
                continue
            try:
                a = brentq(lambda x: phi_of(x) - tau, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15,
                           maxiter=200)
            except (ValueError, RuntimeError, IntegrationError) as exc:
                unresolved.append({"turns": p, "periods": q, "bracket": [float(grid[i]), float(grid[i + 1])],
                                   "reason": f"root polish failed: {exc}"})
                continue
            roots.append((float(a), p, q, None))

    roots.sort(key=lambda x: (x[0], x[2], x[1]))
    if build:
        for a, p, q, fid in roots:
            try:
                cg = closed_from_alpha(surface, a, p, q, tol, family=fid)
            except IntegrationError as exc:
                unresolved.append({"alpha": a, "turns": p, "periods": q, "reason": str(exc)})
                continue
            if cg.closure_residual > closure_tol or cg.length > length_cutoff:
                if cg.closure_residual > closure_tol:
                    unresolved.append({"alpha": a, "turns": p, "periods": q,
                                       "closure_residual": cg.closure_residual,
                                       "reason": "closure residual above tolerance"})
                continue
            closed.append(cg)
            cg.release()
        for a, p in ((0.0, 1), (HALF_PI, 0)):
            closed.append(closed_from_alpha(surface, a, p, 1, tol))
    closed = dedupe(closed)
    closed.sort(key=lambda c: (c.launch_alpha, c.length))
    trunc = {"alpha_grid": int(len(grid)), "q_max": int(q_max),
             "length_cutoff": None if math.isinf(length_cutoff) else float(length_cutoff),
             "targets": len(targets), "closure_tol": closure_tol,
             "explicit_pq": pq_list is not None}
    return SearchResult(closed, unresolved, families, grid, phi, plen, trunc)


def dedupe(closed: list[ClosedGeodesic], tol: float = 1e-6) -> list[ClosedGeodesic]:
    """Merge geodesics congruent by rotation: same (length, alpha, |phi|)."""
    out: list[ClosedGeodesic] = []
    for c in sorted(closed, key=lambda c: (c.length, c.launch_alpha)):
        key = (c.length, c.launch_alpha, abs(c.phi))
        if any(abs(key[0] - o.length) < tol and abs(key[1] - o.launch_alpha) < tol
               and abs(key[2] - abs(o.phi)) < tol for o in out):
            continue
        out.append(c)
    return out

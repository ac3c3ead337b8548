"""Generating curves for surfaces of revolution.

A profile is a planar curve (x(t), r(t)) parameterized by arc length t,
where x is the axial coordinate and r >= 0 the distance to the axis.  The
curve is stored as a short list of analytic pieces (lines, circular arcs,
fillets whose tangent angle is a quintic polynomial, or tabulated Hermite
pieces read back from CSV); the compiled kernels evaluate it exactly.

The smoothed cone is the two-segment curve (0,0) -> (0,1) -> (n,0) with both
corners replaced by fillets, revolved about the x-axis.  Regions follow the
usual naming: ``disc`` (flat base), ``belt`` (fillet around the great
parallel), ``cone`` (flat lateral surface) and ``cap`` (fillet at the tip).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq

from . import _kernels as kern

CHEB_DEG = 40
REGIONS = ("disc", "belt", "cone", "cap")


class ProfileError(ValueError):
    """Invalid profile parameters or an impossible construction."""


class FilletKind(str, Enum):
    CIRCULAR = "circular_arc"
    QUINTIC = "quintic"


@dataclass(frozen=True)
class ConeParams:
    n: float
    belt: float = 0.02
    cap: float = 0.05
    fillet: FilletKind = FilletKind.QUINTIC

    def __post_init__(self):
        object.__setattr__(self, "fillet", FilletKind(self.fillet))
        if not self.n >= 2:
            raise ProfileError(f"cone height n must be >= 2, got {self.n}")
        if not 0.0 < self.belt < 0.1:
            raise ProfileError(f"belt half-width must lie in (0, 0.1), got {self.belt}")
        slant = math.hypot(self.n, 1.0)
        if not 0.0 < self.cap < 0.1 * slant:
            raise ProfileError(f"cap width must lie in (0, {0.1 * slant:.4g}), got {self.cap}")

    @property
    def slant(self) -> float:
        return math.hypot(self.n, 1.0)


@dataclass(frozen=True)
class _Piece:
    kind: int
    length: float
    x0: float
    r0: float
    phi0: float
    curv: float = 0.0
    phi_poly: tuple = (0.0,) * 6
    coef_x: tuple = ()
    coef_r: tuple = ()


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    """Arc-length parameterized generating curve.

    ``regions`` is a tuple of (label, t_start, t_end) covering the whole
    parameter range without gaps.  ``periodic`` profiles (the torus) have no
    poles and t wraps modulo ``total_length``.
    """

    pieces: tuple
    regions: tuple
    periodic: bool = False
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        breaks = np.concatenate([[0.0], np.cumsum([p.length for p in self.pieces])])
        object.__setattr__(self, "_breaks", breaks)
        object.__setattr__(self, "_packed", self._pack())

    # -- evaluation ---------------------------------------------------------

    def _pack(self):
        P = len(self.pieces)
        mx = max([len(p.coef_x) for p in self.pieces] + [len(p.coef_r) for p in self.pieces] + [6])
        kind = np.array([p.kind for p in self.pieces], dtype=np.int64)
        x0 = np.array([p.x0 for p in self.pieces], dtype=float)
        r0 = np.array([p.r0 for p in self.pieces], dtype=float)
        phi0 = np.array([p.phi0 for p in self.pieces], dtype=float)
        curv = np.array([p.curv for p in self.pieces], dtype=float)
        poly = np.array([p.phi_poly for p in self.pieces], dtype=float).reshape(P, 6)
        cx = np.zeros((P, mx))
        cr = np.zeros((P, mx))
        for i, p in enumerate(self.pieces):
            cx[i, : len(p.coef_x)] = p.coef_x
            cr[i, : len(p.coef_r)] = p.coef_r
        arrays = [self._breaks.copy(), kind, x0, r0, phi0, curv, poly, cx, cr]
        for a in arrays:
            a.setflags(write=False)
        period = float(self._breaks[-1]) if self.periodic else 0.0
        return tuple(arrays) + (period,)

    @property
    def packed(self):
        return self._packed

    @property
    def breaks(self) -> np.ndarray:
        return self._breaks

    @property
    def total_length(self) -> float:
        return float(self._breaks[-1])

    def evaluate(self, t) -> np.ndarray:
        """Columns (x, r, r', r'') at the given parameters."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = kern.profile_eval_many(np.ascontiguousarray(ts), self._packed)
        r = out[:, 1]
        r[(r < 0.0) & (r > -1e-12)] = 0.0   # roundoff at the poles
        return out

    def r(self, t):
        out = self.evaluate(t)[:, 1]
        return out if np.ndim(t) else float(out[0])

    def dr(self, t):
        out = self.evaluate(t)[:, 2]
        return out if np.ndim(t) else float(out[0])

    def ddr(self, t):
        out = self.evaluate(t)[:, 3]
        return out if np.ndim(t) else float(out[0])

    def x(self, t):
        out = self.evaluate(t)[:, 0]
        return out if np.ndim(t) else float(out[0])

    def region_of(self, t: float) -> str:
        if self.periodic:
            t = t % self.total_length
        for label, a, b in self.regions:
            if a <= t <= b:
                return label
        return self.regions[-1][0] if t > 0 else self.regions[0][0]

    def region_bounds(self, label: str) -> tuple[float, float]:
        for name, a, b in self.regions:
            if name == label:
                return a, b
        raise KeyError(label)

    def has_region(self, label: str) -> bool:
        return any(name == label for name, _, _ in self.regions)

    # -- derived data -------------------------------------------------------

    def samples(self, chord_tol: float = 1e-10, max_spacing: float = 0.01) -> np.ndarray:
        """Dense table with columns t, x, r, r', r''.

        Spacing per piece keeps the arc-minus-chord defect below
        ``chord_tol`` (defect ~ kappa^2 h^3 / 24)."""
        ts = []
        for i, p in enumerate(self.pieces):
            a, b = self._breaks[i], self._breaks[i + 1]
            kap = _piece_kmax(p)
            h = max_spacing
            if kap > 0:
                h = min(h, (24.0 * chord_tol / kap**2) ** (1.0 / 3.0))
            m = max(2, int(math.ceil((b - a) / h)) + 1)
            seg = np.linspace(a, b, m)
            ts.append(seg if i == 0 else seg[1:])
        t = np.concatenate(ts)
        ev = self.evaluate(t)
        return np.column_stack([t, ev])

    def to_csv(self, path) -> None:
        tab = self.samples()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "r", "r'", "r''", "region"])
            for row in tab:
                w.writerow([repr(float(v)) for v in row] + [self.region_of(row[0])])


# --------------------------------------------------------------------------
# fillet helpers
# --------------------------------------------------------------------------

def _piece_kmax(p: _Piece) -> float:
    if p.kind == 0:
        return 0.0
    if p.kind == 1:
        return abs(p.curv)
    if p.kind == 2:
        # |phi'| <= |delta| * max(30 x^2 (1-x)^2) / len = 1.875 |delta| / len
        return 1.875 * abs(p.phi_poly[3] / 10.0) / p.length
    # tabulated piece: |r''| bounds the curvature away from vertical tangents
    c = p.coef_r
    h = p.length
    return max(abs(2 * c[2]), abs(2 * c[2] + 6 * c[3] * h + 12 * c[4] * h**2 + 20 * c[5] * h**3))


def _smoothstep_poly(phi_a: float, phi_b: float) -> tuple:
    # phi(x) = phi_a + (phi_b - phi_a) * (10x^3 - 15x^4 + 6x^5), x in [0, 1]
    d = phi_b - phi_a
    return (phi_a, 0.0, 0.0, 10.0 * d, -15.0 * d, 6.0 * d)


def _poly_phi(poly, x):
    return np.polynomial.polynomial.polyval(x, poly)


def _quintic_piece(length: float, x0: float, r0: float, phi_a: float, phi_b: float) -> _Piece:
    poly = _smoothstep_poly(phi_a, phi_b)
    dom = [0.0, length]
    cosf = C.Chebyshev.interpolate(lambda s: np.cos(_poly_phi(poly, s / length)), CHEB_DEG, domain=dom)
    sinf = C.Chebyshev.interpolate(lambda s: np.sin(_poly_phi(poly, s / length)), CHEB_DEG, domain=dom)
    xs = cosf.integ(lbnd=0.0) + x0
    rs = sinf.integ(lbnd=0.0) + r0
    # kernels evaluate on the canonical window [-1, 1]
    return _Piece(2, length, x0, r0, phi_a, 0.0, poly,
                  tuple(xs.coef), tuple(rs.coef))


def _arc_piece(length: float, x0: float, r0: float, phi_a: float, phi_b: float) -> _Piece:
    return _Piece(1, length, x0, r0, phi_a, (phi_b - phi_a) / length)


def _line_piece(length: float, x0: float, r0: float, phi: float) -> _Piece:
    return _Piece(0, length, x0, r0, phi)


def _piece_end(p: _Piece) -> tuple[float, float]:
    prof = ProfileCurve(pieces=(p,), regions=(("belt", 0.0, p.length),))
    ev = prof.evaluate([p.length])[0]
    return float(ev[0]), float(ev[1])


def _fillet(kind: FilletKind, length, x0, r0, phi_a, phi_b) -> _Piece:
    if kind is FilletKind.QUINTIC:
        return _quintic_piece(length, x0, r0, phi_a, phi_b)
    return _arc_piece(length, x0, r0, phi_a, phi_b)


def _shift(p: _Piece, dx: float) -> _Piece:
    if p.kind == 2:
        cx = list(p.coef_x)
        cx[0] += dx
        return _Piece(p.kind, p.length, p.x0 + dx, p.r0, p.phi0, p.curv, p.phi_poly, tuple(cx), p.coef_r)
    return _Piece(p.kind, p.length, p.x0 + dx, p.r0, p.phi0, p.curv, p.phi_poly, p.coef_x, p.coef_r)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def build_smoothed_cone(params: ConeParams) -> ProfileCurve:
    """Profile of the smoothed cone M_k for the given parameters.

    The corner fillet has arc length 2*belt and the tip fillet has arc length
    ``cap``.  The disc radius is chosen so the fillet apex (the great
    parallel) sits at radius exactly 1; the profile is then translated along
    the axis so the straight cone segment, extended, meets the axis at x = n.
    """
    n = float(params.n)
    beta = math.atan2(1.0, n)  # cone half-angle
    lb = 2.0 * params.belt
    lc = float(params.cap)

    belt0 = _fillet(params.fillet, lb, 0.0, 0.0, math.pi / 2, -beta)
    # apex of the belt fillet: tangent angle zero
    if params.fillet is FilletKind.QUINTIC:
        frac = (math.pi / 2) / (math.pi / 2 + beta)
        x_gp = brentq(lambda x: 10 * x**3 - 15 * x**4 + 6 * x**5 - frac, 0.0, 1.0, xtol=1e-15)
        s_gp = x_gp * lb
    else:
        s_gp = lb * (math.pi / 2) / (math.pi / 2 + beta)
    probe = ProfileCurve(pieces=(belt0,), regions=(("belt", 0.0, lb),))
    rise_gp = float(probe.evaluate([s_gp])[0, 1])
    bx, brise = _piece_end(belt0)

    cap0 = _fillet(params.fillet, lc, 0.0, 0.0, -beta, -math.pi / 2)
    cx_run, c_drop = _piece_end(cap0)

    r_disc = 1.0 - rise_gp
    if r_disc <= 0.0:
        raise ProfileError("belt fillet too wide for a unit great parallel")
    r_cone0 = r_disc + brise
    lam = (r_cone0 + c_drop) / math.sin(beta)
    if lam <= 0.0:
        raise ProfileError("belt and cap fillets overlap")

    pieces = [
        _line_piece(r_disc, 0.0, 0.0, math.pi / 2),
        _fillet(params.fillet, lb, 0.0, r_disc, math.pi / 2, -beta),
        _line_piece(lam, bx, r_cone0, -beta),
    ]
    x_cap = bx + lam * math.cos(beta)
    r_cap = r_cone0 - lam * math.sin(beta)
    pieces.append(_fillet(params.fillet, lc, x_cap, r_cap, -beta, -math.pi / 2))

    # the extended cone line should hit the axis at x = n
    dx = n - (bx + r_cone0 * n)
    pieces = [_shift(p, dx) for p in pieces]

    t1 = r_disc
    t2 = t1 + lb
    t3 = t2 + lam
    t4 = t3 + lc
    regions = (("disc", 0.0, t1), ("belt", t1, t2), ("cone", t2, t3), ("cap", t3, t4))
    prof = ProfileCurve(
        pieces=tuple(pieces),
        regions=regions,
        kind="smoothed_cone",
        params={"n": n, "belt": params.belt, "cap": params.cap, "fillet": params.fillet.value,
                "great_parallel_t": t1 + s_gp},
    )
    return prof


def build_sphere(radius: float = 1.0) -> ProfileCurve:
    if not radius > 0:
        raise ProfileError("sphere radius must be positive")
    L = math.pi * radius
    piece = _Piece(1, L, -radius, 0.0, math.pi / 2, -1.0 / radius)
    return ProfileCurve(pieces=(piece,), regions=(("belt", 0.0, L),), kind="sphere",
                        params={"radius": float(radius), "great_parallel_t": L / 2})


def build_torus(R: float, a: float) -> ProfileCurve:
    """Tube circle r(t) = R + a cos(t/a); t = 0 is the outer equator."""
    if not (R > a > 0):
        raise ProfileError(f"torus needs R > a > 0, got R={R}, a={a}")
    L = 2 * math.pi * a
    piece = _Piece(1, L, 0.0, R + a, 0.0, -1.0 / a)
    return ProfileCurve(pieces=(piece,), regions=(("belt", 0.0, L),), periodic=True, kind="torus",
                        params={"R": float(R), "a": float(a), "great_parallel_t": 0.0})


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------

def profile_from_config(doc: dict) -> ProfileCurve:
    """Build a profile from a JSON-style dict with key ``kind``."""
    kind = doc.get("kind", "smoothed_cone")
    if kind in ("smoothed_cone", "cone"):
        return build_smoothed_cone(ConeParams(
            n=float(doc["n"]), belt=float(doc.get("belt", 0.02)),
            cap=float(doc.get("cap", 0.05)), fillet=doc.get("fillet", "quintic")))
    if kind == "sphere":
        return build_sphere(float(doc.get("radius", 1.0)))
    if kind == "torus":
        return build_torus(float(doc["R"]), float(doc["a"]))
    raise ProfileError(f"unknown profile kind {kind!r}")


def load_profile_json(path) -> ProfileCurve:
    return profile_from_config(json.loads(Path(path).read_text(encoding="utf-8")))


def profile_from_csv(path) -> ProfileCurve:
    """Tabulated profile: quintic Hermite in r (from r, r', r''), cubic
    Hermite in x (slope from the unit-speed condition)."""
    rows = []
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        for row in rd:
            rows.append([float(row["t"]), float(row["x"]), float(row["r"]),
                         float(row["r'"]), float(row["r''"])])
            labels.append(row.get("region", "belt"))
    tab = np.array(rows)
    t, x, r, rp, rpp = tab.T
    pieces = []
    for i in range(len(t) - 1):
        h = t[i + 1] - t[i]
        if h <= 0:
            continue
        coef_r = _hermite5(r[i], rp[i], rpp[i], r[i + 1], rp[i + 1], rpp[i + 1], h)
        sgn = 1.0 if x[i + 1] >= x[i] else -1.0
        xp0 = sgn * math.sqrt(max(0.0, 1.0 - rp[i] ** 2))
        xp1 = sgn * math.sqrt(max(0.0, 1.0 - rp[i + 1] ** 2))
        coef_x = _hermite3(x[i], xp0, x[i + 1], xp1, h)
        pieces.append(_Piece(3, h, x[i], r[i], math.atan2(rp[i], xp0), 0.0, (0.0,) * 6,
                             tuple(coef_x), tuple(coef_r)))
    regions = []
    for i, lab in enumerate(labels):
        if not regions or regions[-1][0] != lab:
            regions.append([lab, t[i], t[i]])
        regions[-1][2] = t[i]
    for i in range(len(regions) - 1):
        regions[i][2] = regions[i + 1][1]
    gp = float(t[np.argmax(r)])
    return ProfileCurve(pieces=tuple(pieces), regions=tuple(tuple(r_) for r_ in regions),
                        kind="table", params={"great_parallel_t": gp})


def _hermite5(p0, d0, a0, p1, d1, a1, h):
    # power-basis coefficients in s for the quintic matching value, slope and
    # second derivative at s = 0 and s = h
    c0, c1, c2 = p0, d0, a0 / 2.0
    m = np.array([[h**3, h**4, h**5], [3 * h**2, 4 * h**3, 5 * h**4], [6 * h, 12 * h**2, 20 * h**3]])
    rhs = np.array([p1 - (c0 + c1 * h + c2 * h**2), d1 - (c1 + 2 * c2 * h), a1 - 2 * c2])
    c3, c4, c5 = np.linalg.solve(m, rhs)
    return (c0, c1, c2, c3, c4, c5)


def _hermite3(p0, d0, p1, d1, h):
    c2 = (3 * (p1 - p0) / h - 2 * d0 - d1) / h
    c3 = (d0 + d1 - 2 * (p1 - p0) / h) / h**2
    return (p0, d0, c2, c3)

"""Planar development of the flat cone region.

On the cone region the profile is a straight segment, so a point at profile
parameter t lies at distance rho(t) from the apex and rotation theta maps to
the planar polar angle theta * sin(beta), beta being the cone half-angle.
Geodesics become straight chords.  A chord entering the outer circle at
angle a (with the circle) turns back at distance rho_out * cos(a) from the
apex and subtends the planar angle 2a.

Lengths can be reported in normalized units, where the outer boundary
parallel has length 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .surface import SurfaceOfRevolution

TWO_PI = 2.0 * math.pi


class DevelopmentError(ValueError):
    pass


class OutOfDomain(DevelopmentError):
    """Chord reaches the inner (cap) boundary before turning back."""


@dataclass(frozen=True)
class DevelopedCone:
    apex_radius_outer: float       # developed radius of the belt/cone parallel
    apex_radius_inner: float       # developed radius of the cone/cap parallel
    sector_angle_per_turn: float   # planar angle of one full turn on the surface
    normalization: float           # scale making the outer parallel length 1
    t_outer: float = math.nan      # profile parameter of the outer boundary
    t_inner: float = math.nan
    model: str = "surface"         # "surface" or "idealized"

    @property
    def sin_half_angle(self) -> float:
        return self.sector_angle_per_turn / TWO_PI

    @classmethod
    def idealized(cls, n: float) -> "DevelopedCone":
        """Normalized chord model with outer radius n and one full turn
        corresponding to unit arc length on the outer circle."""
        if n <= 0:
            raise DevelopmentError("n must be positive")
        return cls(float(n), 0.0, 1.0 / n, 1.0, model="idealized")

    # -- maps --------------------------------------------------------------
    def rho(self, t):
        return self.apex_radius_outer - (np.asarray(t, dtype=float) - self.t_outer)

    def to_plane(self, t, theta) -> np.ndarray:
        """(t, theta) on the cone region, theta unreduced (universal cover)."""
        rho = self.rho(t)
        psi = np.asarray(theta, dtype=float) * self.sin_half_angle
        return np.stack([rho * np.cos(psi), rho * np.sin(psi)], axis=-1)

    def from_plane(self, xy, theta_ref=0.0) -> np.ndarray:
        """Inverse of ``to_plane``; the sheet of the cover is the one whose
        theta is closest to ``theta_ref``."""
        xy = np.asarray(xy, dtype=float)
        rho = np.hypot(xy[..., 0], xy[..., 1])
        psi = np.arctan2(xy[..., 1], xy[..., 0])
        sh = self.sin_half_angle
        psi_ref = np.asarray(theta_ref, dtype=float) * sh
        psi = psi + TWO_PI * np.round((psi_ref - psi) / TWO_PI)
        t = self.t_outer + (self.apex_radius_outer - rho)
        return np.stack([t, psi / sh], axis=-1)

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.t_outer) & (t <= self.t_inner)


def develop(surface: SurfaceOfRevolution) -> DevelopedCone:
    if not surface.is_smoothed_cone:
        raise DevelopmentError("surface has no flat cone region")
    prof = surface.profile
    t_b, t_c = prof.region_bounds("cone")
    slope = -prof.dr(0.5 * (t_b + t_c))          # sin(beta)
    if not 0.0 < slope < 1.0:
        raise DevelopmentError("cone region is not a straight decreasing segment")
    r_b = prof.r(t_b)
    r_c = prof.r(t_c)
    return DevelopedCone(r_b / slope, r_c / slope, TWO_PI * slope, 1.0 / (TWO_PI * r_b),
                         float(t_b), float(t_c), "surface")


def first_return_rotation(dev: DevelopedCone, alpha_tilde) -> np.ndarray | float:
    """Surface rotation between entering the cone across the outer boundary
    at angle ``alpha_tilde`` and first returning to it (radians)."""
    a = np.asarray(alpha_tilde, dtype=float)
    if np.any((a <= 0) | (a >= 0.5 * math.pi)):
        raise DevelopmentError("entry angle must lie in (0, pi/2)")
    d = dev.apex_radius_outer * np.cos(a)
    if np.any(d <= dev.apex_radius_inner):
        raise OutOfDomain("chord reaches the cap boundary")
    out = 2.0 * a / dev.sin_half_angle
    return out if np.ndim(alpha_tilde) else float(out)


def rotation_as_arc(dev: DevelopedCone, rotation):
    """Normalized arc length on the outer parallel equivalent to a rotation."""
    return np.asarray(rotation) / TWO_PI


def chord_depth(dev: DevelopedCone, alpha_tilde):
    """Normalized depth below the outer boundary where the chord turns."""
    return dev.normalization * dev.apex_radius_outer * (1.0 - np.cos(alpha_tilde))


def entry_angle_for_depth(dev: DevelopedCone, depth: float) -> float:
    x = 1.0 - depth / (dev.normalization * dev.apex_radius_outer)
    if not -1.0 < x < 1.0:
        raise OutOfDomain("depth outside the developed cone")
    return math.acos(x)


def rotation_at_depth(dev: DevelopedCone, depth: float) -> float:
    """First-return rotation of the chord turning back ``depth`` (normalized)
    below the outer boundary."""
    return float(first_return_rotation(dev, entry_angle_for_depth(dev, depth)))


def entry_angle(surface: SurfaceOfRevolution, alpha: float) -> float:
    """Angle with the belt/cone parallel of the geodesic launched at angle
    alpha from the great parallel (Clairaut: r cos = const)."""
    r_b = surface.profile.r(surface.profile.region_bounds("cone")[0])
    x = surface.r_max * math.cos(alpha) / r_b
    if x >= 1.0:
        raise OutOfDomain("geodesic does not reach the cone")
    return math.acos(x)


def chord_depth_L(n: float) -> float:
    """Depth of the chord that subtends unit arc on a circle of radius n."""
    if n < 2:
        raise DevelopmentError("n must be at least 2")
    s2 = math.sin(0.5 / n) ** 2
    # n (1 - sqrt(1 - s2)) written without cancellation
    return n * s2 / (1.0 + math.sqrt(1.0 - s2))


def _idealized_rotation(n: int, zeta: float) -> float:
    if zeta >= n:
        return -math.inf
    return rotation_at_depth(DevelopedCone.idealized(n), zeta)


def min_n_for_rotation(target: float, zeta: float, model: str = "idealized",
                       template=None, n_max: int = 10**7) -> int:
    """Smallest integer n >= 2 such that every chord turning back deeper
    than ``zeta`` (normalized) rotates by more than ``target``.

    The first-return rotation grows with depth, so it suffices that the
    chord at depth exactly zeta reaches the target.  ``model="idealized"``
    uses the normalized chord model (outer radius n, unit arc per turn);
    ``model="surface"`` builds smoothed cones from ``template`` (ConeParams
    whose n is replaced) and uses their exact development.
    """
    if target <= 0:
        raise ValueError("target rotation must be positive")
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    if model == "idealized":
        rot = lambda n: _idealized_rotation(n, zeta)  # noqa: E731
    elif model == "surface":
        from dataclasses import replace

        from .profile import ConeParams, build_smoothed_cone
        tpl = template or ConeParams(n=2)

        def rot(n):
            surf = SurfaceOfRevolution.from_profile(build_smoothed_cone(replace(tpl, n=float(n))))
            try:
                return rotation_at_depth(develop(surf), zeta)
            except OutOfDomain:
                return -math.inf
    else:
        raise ValueError(f"unknown model {model!r}")

    ok = lambda n: rot(n) >= target * (1.0 - 1e-12)  # noqa: E731
    if ok(2):
        return 2
    lo, hi = 2, 4
    while not ok(hi):
        lo, hi = hi, hi * 2
        if hi > n_max:
            raise DevelopmentError(f"no n <= {n_max} reaches rotation {target} at depth {zeta}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def required_rotation(k: int) -> float:
    """Rotation per cone excursion that forces enough symmetric crossings:
    one crossing (2*pi) for k = 2, k + 1 crossings (2(k+1)*pi) for k >= 3."""
    return TWO_PI if k == 2 else TWO_PI * (k + 1)


def first_return_rotation_ode(surface: SurfaceOfRevolution, alpha_tilde: float, tol=None) -> float:
    """First-return rotation measured on the surface itself: integrate from
    the belt/cone parallel into the cone until the turning point and double
    the rotation (the path is symmetric about its turn)."""
    from .geodesic_flow import GeodesicState, Tolerances, integrate
    prof = surface.profile
    t_b, t_c = prof.region_bounds("cone")
    r_b = prof.r(t_b)
    st = GeodesicState(t_b, 0.0, math.sin(alpha_tilde), math.cos(alpha_tilde) / r_b)
    tr = integrate(surface, st, 4.0 * (t_c - t_b) + 10.0, tol=tol or Tolerances(), stop_turns=1,
                   record=False)
    ev = tr.turning_events
    if not ev or tr.t[-1] > t_c:
        raise OutOfDomain("chord reaches the cap boundary")
    return 2.0 * float(tr.theta[-1] - tr.theta[0])

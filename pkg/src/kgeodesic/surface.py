"""Surfaces of revolution and graph meshes for distance upper bounds.

Coordinates are (t, theta): t is the profile arc length, theta the rotation
angle.  The metric is ds^2 = dt^2 + r(t)^2 dtheta^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .profile import ProfileCurve

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)
_GL8_X = 0.5 * (_GL8_X + 1.0)
_GL8_W = 0.5 * _GL8_W


class SurfaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SurfaceOfRevolution:
    profile: ProfileCurve
    great_parallel_t: float
    topology: str  # "sphere" (two poles) or "torus" (periodic profile)

    @classmethod
    def from_profile(cls, profile: ProfileCurve) -> "SurfaceOfRevolution":
        t_gp = profile.params.get("great_parallel_t")
        if t_gp is None:
            tab = profile.samples()
            i = int(np.argmax(tab[:, 2]))
            t_gp = float(tab[i, 0])
            lo, hi = tab[max(i - 1, 0), 0], tab[min(i + 1, len(tab) - 1), 0]
            if profile.dr(lo) > 0 > profile.dr(hi):
                t_gp = brentq(profile.dr, lo, hi, xtol=1e-14)
        return cls(profile, float(t_gp), "torus" if profile.periodic else "sphere")

    @property
    def r_max(self) -> float:
        return self.profile.r(self.great_parallel_t)

    @property
    def total_length(self) -> float:
        return self.profile.total_length

    @property
    def is_smoothed_cone(self) -> bool:
        return all(self.profile.has_region(lab) for lab in ("disc", "belt", "cone", "cap"))

    @cached_property
    def alpha_prime(self) -> float:
        return region_angles(self)[0]

    @cached_property
    def alpha_double_prime(self) -> float:
        return region_angles(self)[1]

    def position(self, t, theta) -> np.ndarray:
        """3D points (x, r cos theta, r sin theta)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        theta = np.broadcast_to(np.asarray(theta, dtype=float), t.shape)
        ev = self.profile.evaluate(t)
        return np.column_stack([ev[:, 0], ev[:, 1] * np.cos(theta), ev[:, 1] * np.sin(theta)])

    def zeta_depth(self, zeta: float) -> float:
        """Profile distance corresponding to a neighborhood depth ``zeta``
        measured after dilating the surface so the belt/cone boundary
        parallel has length 1."""
        t_b = self.profile.region_bounds("cone")[0]
        return zeta * 2.0 * math.pi * self.profile.r(t_b)


def metric_at(surface: SurfaceOfRevolution, t: float) -> tuple[float, float]:
    """(E, G) with E = 1, G = r(t)^2."""
    r = surface.profile.r(t)
    return 1.0, r * r


def gauss_curvature(surface: SurfaceOfRevolution, t, pole_eps: float = 1e-9):
    """K = -r''/r.  At a pole (r = 0) returns the limit -r'''/r' from a
    one-sided difference of r''."""
    prof = surface.profile
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    ev = prof.evaluate(ts)
    r, rp, rpp = ev[:, 1], ev[:, 2], ev[:, 3]
    K = np.empty_like(r)
    at_pole = np.abs(r) < 1e-12
    K[~at_pole] = -rpp[~at_pole] / r[~at_pole]
    if np.any(at_pole):
        tp = ts[at_pole]
        step = np.where(tp < 0.5 * prof.total_length, 1e-4, -1e-4)
        d3 = (prof.ddr(tp + step) - rpp[at_pole]) / step
        K[at_pole] = -d3 / rp[at_pole]
    return K if np.ndim(t) else float(K[0])


def region_angles(surface: SurfaceOfRevolution) -> tuple[float, float]:
    """Launch angles (alpha', alpha'') at the great parallel whose Clairaut
    constants equal the radii of the belt/cone and cone/cap boundaries."""
    if not surface.is_smoothed_cone:
        raise SurfaceError("region angles are defined for smoothed cones only")
    prof = surface.profile
    t_b, t_c = prof.region_bounds("cone")
    rmax = surface.r_max
    a1 = math.acos(min(1.0, prof.r(t_b) / rmax))
    a2 = math.acos(min(1.0, prof.r(t_c) / rmax))
    return a1, a2


# --------------------------------------------------------------------------
# mesh
# --------------------------------------------------------------------------

_OFFSETS = {
    1: [(0, 1), (1, 0), (1, 1), (1, -1)],
    2: [(1, 2), (1, -2), (2, 1), (2, -1)],
    3: [(1, 3), (1, -3), (3, 1), (3, -1), (2, 3), (2, -3), (3, 2), (3, -2)],
}


def _offsets(neighborhood: int):
    out = []
    for k in range(1, neighborhood + 1):
        out.extend(_OFFSETS[k])
    return out


def param_segment_length(profile: ProfileCurve, t0, th0, t1, th1) -> np.ndarray:
    """Length of the surface curve whose (t, theta) image is the straight
    segment between the endpoints.  8-point Gauss-Legendre on each piece
    between profile breakpoints, so the result is additive under
    subdivision to roundoff."""
    t0, th0, t1, th1 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (t0, th0, t1, th1))
    dt = t1 - t0
    dth = th1 - th0
    inner = profile.breaks[1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (inner[None, :] - t0[:, None]) / dt[:, None]
    f = np.where(np.isfinite(f), np.clip(f, 0.0, 1.0), 0.0)
    cuts = np.sort(np.concatenate([np.zeros((len(t0), 1)), f, np.ones((len(t0), 1))], axis=1), axis=1)
    lo, width = cuts[:, :-1], np.diff(cuts, axis=1)
    x = lo[:, :, None] + width[:, :, None] * _GL8_X[None, None, :]
    tq = t0[:, None, None] + dt[:, None, None] * x
    r = profile.evaluate(tq.ravel())[:, 1].reshape(tq.shape)
    speed = np.sqrt(dt[:, None, None] ** 2 + (r * dth[:, None, None]) ** 2)
    return np.einsum("ijk,k,ij->i", speed, _GL8_W, width)


@dataclass(eq=False)
class SurfaceMesh:
    """Grid graph on (t, theta) with pole fans.  Edge weights are lengths of
    genuine surface curves, so every graph path gives a distance upper
    bound."""

    surface: SurfaceOfRevolution
    resolution: tuple[int, int]
    neighborhood: int
    t_nodes: np.ndarray          # ring parameters
    vertices_tt: np.ndarray      # (V, 2) (t, theta)
    vertices_xyz: np.ndarray     # (V, 3)
    edges: np.ndarray            # (E, 2)
    weights: np.ndarray          # (E,)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_theta(self) -> int:
        return self.resolution[1]

    @property
    def graph(self):
        g = self._cache.get("graph")
        if g is None:
            V = len(self.vertices_tt)
            m = coo_matrix((self.weights, (self.edges[:, 0], self.edges[:, 1])), shape=(V, V))
            g = (m + m.T).tocsr()
            self._cache["graph"] = g
        return g

    def ring_vertex(self, ring: int, j) -> np.ndarray:
        j = np.asarray(j) % self.n_theta
        if self.surface.topology == "torus":
            return (ring % len(self.t_nodes)) * self.n_theta + j
        return 1 + (ring - 1) * self.n_theta + j

    def pole_vertices(self) -> tuple[int, int]:
        if self.surface.topology == "torus":
            raise SurfaceError("torus mesh has no poles")
        return 0, len(self.vertices_tt) - 1

    def vertex_ring(self, v: int) -> tuple[int, int]:
        """(ring, j) of a vertex; poles map to (0, 0) and (n_t, 0)."""
        nth = self.n_theta
        if self.surface.topology == "torus":
            return v // nth, v % nth
        if v == 0:
            return 0, 0
        if v == len(self.vertices_tt) - 1:
            return self.resolution[0], 0
        return 1 + (v - 1) // nth, (v - 1) % nth

    def _rotate(self, v, shift: int):
        """Vertex obtained by rotating by ``shift`` theta steps."""
        ring, j = self.vertex_ring(int(v))
        if self.surface.topology != "torus" and (ring == 0 or ring == self.resolution[0]):
            return int(v)
        return int(self.ring_vertex(ring, j + shift))

    def _ring_source(self, ring: int) -> int:
        if self.surface.topology == "torus":
            return int(self.ring_vertex(ring, 0))
        if ring == 0:
            return 0
        if ring == self.resolution[0]:
            return len(self.vertices_tt) - 1
        return int(self.ring_vertex(ring, 0))

    def _ring_tree(self, ring: int):
        key = ("ring", ring)
        hit = self._cache.get(key)
        if hit is None:
            d, pred = dijkstra(self.graph, directed=False, indices=self._ring_source(ring),
                               return_predecessors=True)
            hit = (d, pred)
            self._cache[key] = hit
        return hit

    def vertex_distance(self, a: int, b: int) -> float:
        """Graph distance between vertices, using rotational symmetry so only
        one shortest-path tree per ring is ever computed."""
        ring, j = self.vertex_ring(int(a))
        d, _ = self._ring_tree(ring)
        return float(d[self._rotate(b, -j)])

    def vertex_path(self, a: int, b: int) -> list[int]:
        ring, j = self.vertex_ring(int(a))
        _, pred = self._ring_tree(ring)
        src = self._ring_source(ring)
        cur = self._rotate(b, -j)
        path = [cur]
        while cur != src:
            cur = int(pred[cur])
            if cur < 0:
                raise SurfaceError("disconnected mesh")
            path.append(cur)
        path.reverse()
        return [self._rotate(v, j) for v in path]

    def cell_corners(self, t: float, theta: float) -> list[int]:
        """Mesh vertices at the corners of the grid cell containing (t, theta)."""
        L = self.surface.total_length
        nt, nth = self.resolution
        h = L / nt
        if self.surface.topology == "torus":
            t = t % L
        i = int(math.floor(t / h))
        jf = (theta % (2 * math.pi)) / (2 * math.pi / nth)
        j = int(math.floor(jf))
        out = []
        for ring in (i, i + 1):
            if self.surface.topology != "torus" and ring <= 0:
                out.append(0)
            elif self.surface.topology != "torus" and ring >= nt:
                out.append(len(self.vertices_tt) - 1)
            else:
                out.extend(int(v) for v in self.ring_vertex(ring, np.array([j, j + 1])))
        return sorted(set(out))

    def to_obj(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for x, y, z in self.vertices_xyz:
                fh.write(f"v {x:.12g} {y:.12g} {z:.12g}\n")
            for a, b in self.edges:
                fh.write(f"l {a + 1} {b + 1}\n")


def build_mesh(surface: SurfaceOfRevolution, resolution=(128, 128), neighborhood: int = 2) -> SurfaceMesh:
    nt, nth = (int(v) for v in resolution)
    if nt < 64 or nth < 64:
        raise SurfaceError(f"mesh resolution must be at least (64, 64), got {resolution}")
    if neighborhood not in _OFFSETS:
        raise SurfaceError("neighborhood must be 1, 2 or 3")
    prof = surface.profile
    L = surface.total_length
    h = L / nt
    dth = 2 * math.pi / nth
    torus = surface.topology == "torus"
    rings = np.arange(nt) if torus else np.arange(1, nt)
    t_nodes = rings * h

    theta = np.arange(nth) * dth
    tt = np.column_stack([np.repeat(t_nodes, nth), np.tile(theta, len(t_nodes))])
    if not torus:
        tt = np.vstack([[0.0, 0.0], tt, [L, 0.0]])
    xyz = surface.position(tt[:, 0], tt[:, 1])

    def vid(ring, j):
        j = j % nth
        if torus:
            return (ring % nt) * nth + j
        return 1 + (ring - 1) * nth + j

    edges = []
    weights = []
    jj = np.arange(nth)
    for di, dj in _offsets(neighborhood):
        for ring in rings:
            r2 = ring + di
            if not torus and r2 >= nt:
                continue
            w = float(param_segment_length(prof, ring * h, 0.0, r2 * h, dj * dth)[0])
            edges.append(np.column_stack([vid(ring, jj), vid(r2, jj + dj)]))
            weights.append(np.full(nth, w))
    if not torus:
        last = len(tt) - 1
        edges.append(np.column_stack([np.zeros(nth, dtype=int), vid(1, jj)]))
        weights.append(np.full(nth, h))
        edges.append(np.column_stack([np.full(nth, last), vid(nt - 1, jj)]))
        weights.append(np.full(nth, h))
    E = np.vstack(edges).astype(np.int64)
    W = np.concatenate(weights)
    return SurfaceMesh(surface, (nt, nth), neighborhood, t_nodes, tt, xyz, E, W)


def expected_edge_count(resolution, neighborhood: int, torus: bool = False) -> int:
    nt, nth = resolution
    total = 0
    for di, _ in _offsets(neighborhood):
        total += nth * (nt if torus else max(0, (nt - 1) - di))
    if not torus:
        total += 2 * nth
    return total

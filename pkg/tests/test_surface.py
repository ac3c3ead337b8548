import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cone_surface
from kgeodesic.surface import (SurfaceError, build_mesh, expected_edge_count, gauss_curvature, metric_at,
                               param_segment_length, region_angles)


def test_metric_examples(sphere, m2_10):
    assert metric_at(sphere, math.pi / 2) == pytest.approx((1.0, 1.0), abs=1e-15)
    assert metric_at(sphere, 0.0) == (1.0, 0.0)
    a, b = m2_10.profile.region_bounds("cone")
    from scipy.optimize import brentq
    t_half = brentq(lambda t: m2_10.profile.r(t) - 0.5, a, b)
    assert metric_at(m2_10, t_half) == pytest.approx((1.0, 0.25), abs=1e-12)


def test_sphere_curvature(sphere):
    t = np.linspace(0.0, math.pi, 101)
    assert np.max(np.abs(gauss_curvature(sphere, t) - 1.0)) < 1e-8


def test_cone_and_belt_curvature(m2_20):
    prof = m2_20.profile
    a, b = prof.region_bounds("cone")
    t = np.linspace(a, b, 500)[1:-1]
    assert np.max(np.abs(gauss_curvature(m2_20, t))) < 1e-10
    a, b = prof.region_bounds("belt")
    t = np.linspace(a, b, 50)[1:-1]
    assert np.all(gauss_curvature(m2_20, t) > 0)


def test_region_angles_from_clairaut(m2_10):
    surf = cone_surface(10, belt=0.05, cap=0.05)
    a1, a2 = region_angles(surf)
    t_b, t_c = surf.profile.region_bounds("cone")
    assert a1 == pytest.approx(math.acos(surf.profile.r(t_b)), abs=1e-14)
    assert a2 == pytest.approx(math.acos(surf.profile.r(t_c)), abs=1e-14)
    assert 0 < a1 < a2 < math.pi / 2
    assert (surf.alpha_prime, surf.alpha_double_prime) == (a1, a2)


def test_region_angle_limits():
    belts = [0.08, 0.04, 0.01, 0.0025, 0.0005]
    a1 = [region_angles(cone_surface(10, belt=e))[0] for e in belts]
    assert all(x > y for x, y in zip(a1, a1[1:]))
    assert a1[-1] < 0.01
    caps = [0.5, 0.1, 0.02, 0.004]
    a2 = [region_angles(cone_surface(10, cap=c))[1] for c in caps]
    assert all(x < y for x, y in zip(a2, a2[1:]))
    assert math.pi / 2 - a2[-1] < 0.01


def test_region_angles_need_a_cone(sphere):
    with pytest.raises(SurfaceError):
        region_angles(sphere)


def test_sphere_pole_to_pole(sphere):
    mesh = build_mesh(sphere, (256, 256))
    n, s = mesh.pole_vertices()
    d = mesh.vertex_distance(n, s)
    assert math.pi <= d <= math.pi * 1.01


def test_mesh_bounds_on_the_disc(m2_10):
    mesh = build_mesh(m2_10, (128, 128))
    r_d = m2_10.profile.region_bounds("disc")[1]
    ring = int(np.floor(r_d / (m2_10.total_length / 128)))
    assert ring >= 2
    t_ring = mesh.t_nodes[ring - 1]
    for j in (8, 23, 64):
        a = int(mesh.ring_vertex(ring, 0))
        b = int(mesh.ring_vertex(ring, j))
        chord = 2 * t_ring * math.sin(math.pi * j / 128)
        assert mesh.vertex_distance(a, b) >= chord - 1e-12


@pytest.mark.parametrize("nb", [1, 2, 3])
def test_edge_count(sphere, torus, nb):
    nt, nth = 64, 80
    offsets = {1: [0, 1, 1, 1], 2: [0, 1, 1, 1, 1, 1, 2, 2],
               3: [0, 1, 1, 1, 1, 1, 2, 2, 1, 1, 3, 3, 2, 2, 3, 3]}[nb]
    want_sphere = sum(nth * (nt - 1 - di) for di in offsets) + 2 * nth
    assert len(build_mesh(sphere, (nt, nth), nb).edges) == want_sphere
    assert expected_edge_count((nt, nth), nb) == want_sphere
    want_torus = len(offsets) * nt * nth
    assert len(build_mesh(torus, (nt, nth), nb).edges) == want_torus


def test_edges_are_at_least_chords(m2_10):
    mesh = build_mesh(m2_10, (64, 64), 3)
    p = mesh.vertices_xyz
    chord = np.linalg.norm(p[mesh.edges[:, 0]] - p[mesh.edges[:, 1]], axis=1)
    assert np.all(mesh.weights >= chord - 1e-12)


def test_mesh_is_connected_and_poles_fanned(m2_10):
    mesh = build_mesh(m2_10, (64, 64))
    from scipy.sparse.csgraph import connected_components
    assert connected_components(mesh.graph, directed=False)[0] == 1
    n, s = mesh.pole_vertices()
    deg = np.diff(mesh.graph.indptr)
    assert deg[n] == 64 and deg[s] == 64


def test_bad_resolution(sphere):
    with pytest.raises(SurfaceError):
        build_mesh(sphere, (32, 128))
    with pytest.raises(SurfaceError):
        build_mesh(sphere, (64, 64), neighborhood=5)


def test_refinement_never_increases_distance(m2_10):
    coarse = build_mesh(m2_10, (64, 64))
    fine = build_mesh(m2_10, (128, 128))
    rng = np.random.default_rng(3)
    for _ in range(30):
        ra, rb = rng.integers(1, 64, size=2)
        ja, jb = rng.integers(0, 64, size=2)
        dc = coarse.vertex_distance(int(coarse.ring_vertex(ra, ja)), int(coarse.ring_vertex(rb, jb)))
        df = fine.vertex_distance(int(fine.ring_vertex(2 * ra, 2 * ja)), int(fine.ring_vertex(2 * rb, 2 * jb)))
        assert df <= dc + 1e-10   # quadrature residual only


def test_mesh_distance_is_a_path_length(sphere):
    mesh = build_mesh(sphere, (64, 64))
    a = int(mesh.ring_vertex(10, 3))
    b = int(mesh.ring_vertex(40, 37))
    path = mesh.vertex_path(a, b)
    tt = mesh.vertices_tt
    total = 0.0
    for u, v in zip(path, path[1:]):
        (t0, th0), (t1, th1) = tt[u], tt[v]
        if u in mesh.pole_vertices() or v in mesh.pole_vertices():
            total += abs(t1 - t0)
            continue
        dth = (th1 - th0 + math.pi) % (2 * math.pi) - math.pi
        total += float(param_segment_length(sphere.profile, t0, th0, t1, th0 + dth)[0])
    assert total == pytest.approx(mesh.vertex_distance(a, b), abs=1e-12)
    # great-circle distance is a lower bound
    p, q = mesh.vertices_xyz[a], mesh.vertices_xyz[b]
    assert total >= math.acos(np.clip(p @ q, -1, 1)) - 1e-12


@settings(max_examples=30, deadline=None)
@given(t0=st.floats(0.05, 3.0), t1=st.floats(0.05, 3.0), th0=st.floats(-3, 3), th1=st.floats(-3, 3))
def test_segment_length_bounds_chord(t0, t1, th0, th1):
    from kgeodesic.profile import build_sphere
    prof = build_sphere()
    L = float(param_segment_length(prof, t0, th0, t1, th1)[0])
    p = np.array([math.cos(t0), math.sin(t0) * math.cos(th0), math.sin(t0) * math.sin(th0)])
    q = np.array([math.cos(t1), math.sin(t1) * math.cos(th1), math.sin(t1) * math.sin(th1)])
    assert L >= np.linalg.norm(p - q) - 1e-12


def test_obj_export(tmp_path, sphere):
    mesh = build_mesh(sphere, (64, 64))
    path = tmp_path / "m.obj"
    mesh.to_obj(path)
    lines = path.read_text().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == len(mesh.vertices_tt)
    assert sum(ln.startswith("l ") for ln in lines) == len(mesh.edges)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgeodesic.profile import (ConeParams, ProfileError, build_smoothed_cone, build_sphere, build_torus,
                               profile_from_config, profile_from_csv)
from kgeodesic.surface import SurfaceOfRevolution, gauss_curvature


def skeleton_distance(prof, n):
    """Max distance from profile samples to the two-segment skeleton
    (0,0)-(0,1)-(n,0) in the (x, r) half plane."""
    tab = prof.samples()
    pts = tab[:, 1:3]

    def seg_dist(p, a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        d = b - a
        lam = np.clip(((p - a) @ d) / (d @ d), 0.0, 1.0)
        return np.linalg.norm(p - (a + lam[:, None] * d), axis=1)

    return float(np.max(np.minimum(seg_dist(pts, (0, 0), (0, 1)), seg_dist(pts, (0, 1), (n, 0)))))


def test_sphere_profile():
    p = build_sphere(1.0)
    assert p.r(math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert p.total_length == pytest.approx(math.pi, abs=1e-15)
    s2 = SurfaceOfRevolution.from_profile(build_sphere(2.0))
    t = np.linspace(0.05, 2 * math.pi - 0.05, 50)
    assert np.allclose(gauss_curvature(s2, t), 0.25, atol=1e-10)


def test_torus_profile():
    p = build_torus(3.0, 1.0)
    tab = p.samples()
    assert tab[:, 2].min() >= 2.0 and tab[:, 2].max() <= 4.0
    assert p.r(0.0) == pytest.approx(4.0, abs=1e-14)
    t_in = math.pi * 1.0
    assert p.r(t_in) == pytest.approx(2.0, abs=1e-14)
    assert abs(p.dr(t_in)) < 1e-14
    surf = SurfaceOfRevolution.from_profile(p)
    assert surf.topology == "torus"
    k_in = gauss_curvature(surf, t_in)
    assert k_in < 0
    assert k_in == pytest.approx(-1.0 / (1.0 * (3.0 - 1.0)), rel=1e-12)


def test_torus_rejects_thick_tube():
    with pytest.raises(ProfileError):
        build_torus(1.0, 1.0)


@pytest.mark.parametrize("fillet", ["circular_arc", "quintic"])
def test_cone_total_length_window(fillet):
    p = build_smoothed_cone(ConeParams(n=10, belt=0.05, cap=0.05, fillet=fillet))
    skel = 1 + math.sqrt(101)
    assert skel - 0.4 <= p.total_length <= skel


@pytest.mark.parametrize("eps", [0.04, 0.01, 0.0025])
def test_cone_converges_to_skeleton(eps):
    p = build_smoothed_cone(ConeParams(n=10, belt=eps, cap=eps))
    assert skeleton_distance(p, 10) < 2 * eps


def test_cone_flat_regions_have_zero_curvature(m2_10):
    for name in ("disc", "cone"):
        a, b = m2_10.profile.region_bounds(name)
        t = np.linspace(a + 1e-9, b - 1e-9, 400)[1:]
        assert np.max(np.abs(gauss_curvature(m2_10, t))) < 1e-10


def test_max_radius_is_one(m2_10):
    assert m2_10.r_max == pytest.approx(1.0, abs=1e-12)
    assert abs(m2_10.profile.dr(m2_10.great_parallel_t)) < 1e-12


def test_bad_parameters():
    with pytest.raises(ProfileError):
        build_smoothed_cone(ConeParams(n=1.5))
    with pytest.raises(ProfileError):
        ConeParams(n=10, belt=0.2)
    with pytest.raises(ProfileError):
        ConeParams(n=2, belt=0.05, cap=0.1 * math.sqrt(5))


def _check_invariants(p):
    tab = p.samples()
    t, r, dr = tab[:, 0], tab[:, 2], tab[:, 3]
    assert np.all(r >= -1e-15)
    assert np.max(np.abs(dr)) <= 1 + 1e-12
    if not p.periodic:
        assert p.r(0.0) == 0.0 and abs(p.r(p.total_length)) < 1e-12
        assert p.dr(0.0) == pytest.approx(1.0, abs=1e-12)
        assert p.dr(p.total_length) == pytest.approx(-1.0, abs=1e-12)
    # small step so curvature jumps (circular fillets) stay below 1e-6
    h = 1e-8
    mid = t[(t > 2 * h) & (t < p.total_length - 2 * h)][::7]
    fd = (p.r(mid + h) - p.r(mid - h)) / (2 * h)
    assert np.max(np.abs(fd - p.dr(mid))) < 1e-6
    # regions partition the parameter interval
    prev = 0.0
    for _, a, b in p.regions:
        assert a == prev and b > a
        prev = b
    assert prev == pytest.approx(p.total_length, abs=1e-12)


@pytest.mark.parametrize("maker", [lambda: build_sphere(1.3), lambda: build_torus(3, 0.5),
                                   lambda: build_smoothed_cone(ConeParams(n=10))])
def test_profile_invariants(maker):
    _check_invariants(maker())


@settings(max_examples=25, deadline=None)
@given(n=st.floats(2.5, 60), belt=st.floats(0.005, 0.09), cap=st.floats(0.01, 0.2),
       fillet=st.sampled_from(["circular_arc", "quintic"]))
def test_cone_invariants_property(n, belt, cap, fillet):
    p = build_smoothed_cone(ConeParams(n=n, belt=belt, cap=cap, fillet=fillet))
    _check_invariants(p)
    tab = p.samples()
    for name, sign in (("disc", 1), ("cone", -1)):
        a, b = p.region_bounds(name)
        m = (tab[:, 0] > a) & (tab[:, 0] < b)
        assert np.all(sign * np.diff(tab[m, 2]) > 0)
    # a single interior maximum
    i = int(np.argmax(tab[:, 2]))
    assert np.all(np.diff(tab[: i + 1, 2]) >= -1e-14) and np.all(np.diff(tab[i:, 2]) <= 1e-14)
    surf = SurfaceOfRevolution.from_profile(p)
    assert surf.r_max == pytest.approx(1.0, abs=1e-12)
    assert tab[i, 2] <= surf.r_max + 1e-15


def test_csv_round_trip(tmp_path, m2_10):
    path = tmp_path / "profile.csv"
    m2_10.profile.to_csv(path)
    q = profile_from_csv(path)
    t = np.linspace(0.01, m2_10.total_length - 0.01, 300)
    assert np.max(np.abs(q.r(t) - m2_10.profile.r(t))) < 1e-6
    header = path.read_text().splitlines()[0]
    assert header == "t,x,r,r',r'',region"


def test_config_document():
    p = profile_from_config({"kind": "smoothed_cone", "n": 10, "belt": 0.05, "cap": 0.05, "fillet": "quintic"})
    assert p.total_length == pytest.approx(
        build_smoothed_cone(ConeParams(n=10, belt=0.05, cap=0.05)).total_length, abs=0)
    assert profile_from_config({"kind": "sphere", "radius": 2}).total_length == pytest.approx(2 * math.pi)

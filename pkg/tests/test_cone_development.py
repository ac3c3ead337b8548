import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cone_surface
from kgeodesic.cone_development import (DevelopedCone, DevelopmentError, OutOfDomain, chord_depth,
                                        chord_depth_L, develop, entry_angle_for_depth,
                                        first_return_rotation, first_return_rotation_ode,
                                        min_n_for_rotation, required_rotation, rotation_at_depth)
from kgeodesic.geodesic_flow import GeodesicState, integrate


def _sagitta(n):
    return n * (1.0 - math.cos(1.0 / (2.0 * n)))


def test_n10_sector_angle(m2_10):
    dev = develop(m2_10)
    assert dev.sector_angle_per_turn == pytest.approx(2 * math.pi / math.sqrt(101), abs=1e-12)
    assert math.asin(dev.sin_half_angle) == pytest.approx(math.atan(0.1), abs=1e-12)


def test_normalized_outer_length(m2_10, m2_20):
    for surf in (m2_10, m2_20):
        dev = develop(surf)
        arc = dev.normalization * dev.apex_radius_outer * dev.sector_angle_per_turn
        assert arc == pytest.approx(1.0, abs=1e-12)
        assert 0 < dev.sector_angle_per_turn < 2 * math.pi


def test_round_trip(m2_10):
    dev = develop(m2_10)
    rng = np.random.default_rng(0)
    t = rng.uniform(dev.t_outer, dev.t_inner, 100)
    th = rng.uniform(-40.0, 40.0, 100)
    back = dev.from_plane(dev.to_plane(t, th), th)
    assert np.max(np.abs(back[:, 0] - t)) < 1e-10
    assert np.max(np.abs(back[:, 1] - th)) < 1e-10


def test_chords_match_the_integrator(m2_20):
    dev = develop(m2_20)
    a_max = math.acos(dev.apex_radius_inner / dev.apex_radius_outer)
    rng = np.random.default_rng(1)
    for a in rng.uniform(0.01, a_max - 0.01, 50):
        assert first_return_rotation_ode(m2_20, a) == pytest.approx(first_return_rotation(dev, a), abs=1e-6)
    # the turning point is the foot of the perpendicular from the apex
    a = 0.3 * a_max
    r_b = m2_20.profile.r(dev.t_outer)
    tr = integrate(m2_20, GeodesicState(dev.t_outer, 0.0, math.sin(a), math.cos(a) / r_b), 50.0, stop_turns=1)
    s_turn, t_turn = tr.turning_events[0]
    assert t_turn == pytest.approx(dev.t_outer + dev.apex_radius_outer * (1 - math.cos(a)), abs=1e-6)
    assert s_turn == pytest.approx(dev.apex_radius_outer * math.sin(a), abs=1e-6)
    xy = dev.to_plane(tr.t, tr.theta)
    # every sample lies on the straight line through the entry point at angle a
    p0 = xy[0]
    d = np.array([-math.sin(a), math.cos(a)])   # chord direction in the plane
    normal = np.array([-d[1], d[0]])
    assert np.max(np.abs((xy - p0) @ normal)) < 1e-6


def test_full_turn_chord(m2_10):
    dev = develop(m2_10)
    a = 0.5 * dev.sector_angle_per_turn
    assert first_return_rotation(dev, a) == pytest.approx(2 * math.pi, abs=1e-14)
    for n in (5, 10, 50, 100):
        ideal = DevelopedCone.idealized(n)
        assert rotation_at_depth(ideal, chord_depth_L(n)) == pytest.approx(2 * math.pi, abs=1e-9)


def test_grazing_chord_and_domain(m2_10):
    dev = develop(m2_10)
    assert first_return_rotation(dev, 1e-9) < 1e-6
    with pytest.raises(DevelopmentError):
        first_return_rotation(dev, 0.0)
    with pytest.raises(OutOfDomain):
        first_return_rotation(dev, 1.5707)
    with pytest.raises(DevelopmentError):
        develop(_sphere())


def _sphere():
    from kgeodesic.profile import build_sphere
    from kgeodesic.surface import SurfaceOfRevolution
    return SurfaceOfRevolution.from_profile(build_sphere())


def test_rotation_strictly_increasing(m2_10):
    dev = develop(m2_10)
    a_max = math.acos(dev.apex_radius_inner / dev.apex_radius_outer)
    grid = np.linspace(1e-3, a_max - 1e-3, 200)
    T = first_return_rotation(dev, grid)
    assert np.all(np.diff(T) > 0)


@settings(max_examples=50, deadline=None)
@given(a1=st.floats(1e-3, 1.2), gap=st.floats(1e-4, 0.3))
def test_rotation_increasing_property(a1, gap):
    dev = DevelopedCone.idealized(20)
    a2 = a1 + gap
    if dev.apex_radius_outer * math.cos(a2) <= dev.apex_radius_inner or a2 >= math.pi / 2:
        return
    assert first_return_rotation(dev, a2) - first_return_rotation(dev, a1) > 0


def test_chord_depth_L_examples():
    assert chord_depth_L(10) == pytest.approx(0.01249739, abs=1e-8)
    for n in (2, 3, 5, 10, 50, 100, 1000):
        assert chord_depth_L(n) == pytest.approx(_sagitta(n), abs=1e-12)
        assert chord_depth_L(n) == pytest.approx(n * (1 - math.sqrt(1 - math.sin(1 / (2 * n)) ** 2)), abs=1e-12)
    Ls = [chord_depth_L(n) for n in (5, 10, 50, 100)]
    assert all(x > y for x, y in zip(Ls, Ls[1:]))
    for n in (1e4, 1e6, 1e8):
        assert chord_depth_L(n) * 8 * n == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DevelopmentError):
        chord_depth_L(1.5)


def test_depth_angle_consistency(m2_10):
    dev = develop(m2_10)
    for depth in (0.001, 0.01, 0.05):
        a = entry_angle_for_depth(dev, depth)
        assert float(chord_depth(dev, a)) == pytest.approx(depth, abs=1e-14)


def test_min_n_examples():
    for n in (5, 10, 40):
        assert min_n_for_rotation(2 * math.pi, chord_depth_L(n)) <= n
    n3 = min_n_for_rotation(required_rotation(3), 0.01)
    assert rotation_at_depth(DevelopedCone.idealized(n3), 0.01) >= 8 * math.pi
    assert rotation_at_depth(DevelopedCone.idealized(n3 - 1), 0.01) < 8 * math.pi
    assert min_n_for_rotation(1e-9, 0.01) == 2
    with pytest.raises(ValueError):
        min_n_for_rotation(0.0, 0.01)


def test_min_n_surface_model():
    from kgeodesic.profile import ConeParams
    n = min_n_for_rotation(2 * math.pi, 0.05, model="surface", template=ConeParams(n=2, belt=0.02, cap=0.05))
    dev = develop(cone_surface(n))
    assert rotation_at_depth(dev, 0.05) >= 2 * math.pi * (1 - 1e-12)


def test_required_rotation():
    assert required_rotation(2) == pytest.approx(2 * math.pi)
    assert required_rotation(3) == pytest.approx(8 * math.pi)
    assert required_rotation(5) == pytest.approx(12 * math.pi)

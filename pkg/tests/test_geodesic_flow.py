import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgeodesic.closed_search import closed_from_alpha, parallel_geodesic, period_info
from kgeodesic.geodesic_flow import (GeodesicState, Tolerances, clairaut_angle, crosses_great_parallel,
                                     detect_self_intersections, integrate, launch_from_great_parallel,
                                     symmetric_crossings, total_rotation)


def test_launch_clairaut_constant(m2_10, sphere):
    for surf in (m2_10, sphere):
        for a in (0.1, 0.7, 1.3):
            st0 = launch_from_great_parallel(surf, a)
            assert st0.clairaut(surf) == pytest.approx(math.cos(a) * surf.r_max, abs=1e-15)
            assert clairaut_angle(st0, surf) == pytest.approx(a, abs=1e-12)


def test_sphere_equator(sphere):
    tr = integrate(sphere, launch_from_great_parallel(sphere, 0.0), 2 * math.pi)
    assert np.all(tr.t == pytest.approx(math.pi / 2, abs=1e-15))
    assert tr.theta[-1] - tr.theta[0] == pytest.approx(2 * math.pi, abs=1e-12)


def test_sphere_turning_latitude(sphere):
    for a in (0.3, 0.7, 1.2):
        tr = integrate(sphere, launch_from_great_parallel(sphere, a), 3.0, stop_turns=1)
        s_turn, t_turn = tr.turning_events[0]
        assert sphere.profile.r(t_turn) == pytest.approx(math.cos(a), abs=1e-8)
        # great circle: quarter turn from the equator to the turning point
        assert s_turn == pytest.approx(math.pi / 2, abs=1e-8)


def test_meridian_closed_form(m2_10):
    L = m2_10.total_length
    tr = integrate(m2_10, launch_from_great_parallel(m2_10, math.pi / 2), 2 * L)
    assert tr.kind == "meridian"
    assert len(tr.pole_passes) == 2
    assert tr.t[-1] == pytest.approx(m2_10.great_parallel_t, abs=1e-12)
    assert np.allclose(tr.clairaut_values(), 0.0)


def test_rotation_on_great_parallel(m2_10):
    for sgn in (1, -1):
        tr = integrate(m2_10, launch_from_great_parallel(m2_10, 0.0, orientation=sgn), 5.0)
        s = np.linspace(0.0, 5.0, 11)
        assert np.allclose(tr.rotation(s), sgn * s / m2_10.r_max, atol=1e-12)
    g = parallel_geodesic(m2_10, m2_10.great_parallel_t)
    assert g.length == pytest.approx(2 * math.pi, abs=1e-12)


def test_clairaut_and_speed_drift(m2_20):
    tr = integrate(m2_20, launch_from_great_parallel(m2_20, 0.4), 1000.0)
    assert np.max(np.abs(tr.clairaut_values() - tr.c)) < 1e-8
    assert np.max(np.abs(tr.speed_values() - 1.0)) < 1e-8


def test_tolerance_convergence(m2_20):
    st0 = launch_from_great_parallel(m2_20, 0.4)
    ends = [integrate(m2_20, st0, 200.0, tol=Tolerances(rtol=r, atol=r * 1e-2)).y[-1]
            for r in (1e-7, 1e-9, 1e-11)]
    e1 = np.linalg.norm(ends[0] - ends[2])
    e2 = np.linalg.norm(ends[1] - ends[2])
    assert e2 < e1
    assert e2 < 1e-6


def test_turning_point_symmetry(m2_20):
    tr = integrate(m2_20, launch_from_great_parallel(m2_20, 0.5), 60.0, stop_turns=1)
    s_t, _ = tr.turning_events[0]
    tr2 = integrate(m2_20, launch_from_great_parallel(m2_20, 0.5), 2 * s_t)
    sig = np.linspace(0.0, s_t, 41)
    a = tr2.state_at(s_t - sig)
    b = tr2.state_at(s_t + sig)
    th_t = tr2.state_at(s_t)[0, 1]
    assert np.max(np.abs(a[:, 0] - b[:, 0])) < 1e-6
    assert np.max(np.abs((a[:, 1] - th_t) + (b[:, 1] - th_t))) < 1e-6


def test_tangent_launch_leaves_non_geodesic_parallel(m2_10):
    a, b = m2_10.profile.region_bounds("cone")
    t0 = 0.5 * (a + b)
    r0 = m2_10.profile.r(t0)
    tr = integrate(m2_10, GeodesicState(t0, 0.0, 0.0, 1.0 / r0), 1.0)
    assert tr.kind == "numeric"
    assert np.max(np.abs(tr.t - t0)) > 1e-3


def test_rotation_matches_clairaut_quadrature(m2_20):
    # dtheta/dt = c / (r sqrt(r^2 - c^2)) along a monotone stretch
    alpha = 0.9
    tr = integrate(m2_20, launch_from_great_parallel(m2_20, alpha), 30.0, stop_turns=1)
    c = tr.c
    t0, t1 = tr.t[0], tr.t[-1]
    stop = t1 - 0.05 * (t1 - t0)
    from scipy.integrate import quad
    prof = m2_20.profile
    brk = [b for b in prof.breaks if t0 < b < stop]
    want, _ = quad(lambda t: c / (prof.r(t) * math.sqrt(prof.r(t) ** 2 - c * c)), t0, stop,
                   points=brk or None, epsabs=1e-12, epsrel=1e-12, limit=200)
    i = np.searchsorted(tr.t, stop)
    from scipy.optimize import brentq
    s_stop = brentq(lambda s: tr.state_at(s)[0, 0] - stop, tr.s[i - 1], tr.s[i], xtol=1e-14)
    assert total_rotation(tr, s_stop) == pytest.approx(want, abs=1e-7)


def test_great_parallel_has_no_self_crossing(m2_10):
    g = parallel_geodesic(m2_10, m2_10.great_parallel_t)
    assert detect_self_intersections(g.trace, closed=True) == []
    assert crosses_great_parallel(g.trace)


def test_sphere_great_circle_is_simple(sphere):
    cg = closed_from_alpha(sphere, 0.7, 1, 1)
    assert detect_self_intersections(cg.trace, closed=True) == []


def _one_loop_alpha(surf):
    """Launch angle whose cone excursion rotates by between 2pi and 4pi
    from launch to turn-back, so the excursion crosses itself once."""
    for a in np.linspace(surf.alpha_prime + 1e-3, surf.alpha_double_prime - 1e-3, 400):
        h = period_info(surf, a).half_rot_cone
        if 1.1 * math.pi < h < 1.9 * math.pi:
            return float(a)
    raise AssertionError("no single-loop excursion")


def test_single_excursion_figure_eight(m2_20):
    a = _one_loop_alpha(m2_20)
    st0 = launch_from_great_parallel(m2_20, a)
    tr = integrate(m2_20, st0, 400.0, stop_gp=1)
    # sample the same curve from shifted starts; the count must not depend on it
    counts = []
    for off in (0.0, 0.013, 0.21):
        sub = integrate(m2_20, GeodesicState(*tr.state_at(off)[0], s=off), tr.length - off,
                        tol=Tolerances(h_max=0.05 + off))
        counts.append(len(detect_self_intersections(sub)))
    assert counts[0] == 1
    assert counts == [1, 1, 1]
    s_t = tr.turning_events[0][0]
    sym = symmetric_crossings(tr, s_t, s_t)
    assert len(sym) == 1
    x = detect_self_intersections(tr)[0]
    assert x.s1 == pytest.approx(sym[0].s1, abs=1e-8)
    assert x.s2 == pytest.approx(sym[0].s2, abs=1e-8)


def test_large_half_rotation_forces_crossings(m2_20):
    found = 0
    for a in np.linspace(m2_20.alpha_prime + 1e-3, m2_20.alpha_double_prime - 1e-3, 25):
        info = period_info(m2_20, a)
        tr = integrate(m2_20, launch_from_great_parallel(m2_20, a), 400.0, stop_gp=1)
        n = len(detect_self_intersections(tr))
        if abs(info.half_rot_cone) > math.pi + 0.01:
            assert n >= 1
            found += 1
        else:
            assert n == 0
    assert found > 5


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(0.05, 1.5))
def test_rotation_is_monotone(alpha):
    from conftest import cone_surface
    surf = _surf_cache.setdefault("m", cone_surface(10))
    tr = integrate(surf, launch_from_great_parallel(surf, alpha), 30.0)
    rot = tr.rotation(tr.s)
    assert np.all(np.diff(rot) >= -1e-12)


_surf_cache: dict = {}


def test_csv_export(tmp_path, m2_10):
    tr = integrate(m2_10, launch_from_great_parallel(m2_10, 0.6), 10.0)
    path = tmp_path / "g.csv"
    tr.to_csv(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert len(data) == len(tr.s)
    assert np.allclose(data[data.dtype.names[0]], tr.s)

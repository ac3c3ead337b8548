"""Acceptance suite. Each test prints one pass/fail line for its criterion
and the session summary lists all of them."""
import json
import math
import time

import numpy as np
import pytest

from conftest import record
from kgeodesic.cli import main
from kgeodesic.closed_search import closed_from_alpha, find_closed, period_info
from kgeodesic.cone_development import (chord_depth_L, develop, first_return_rotation,
                                        first_return_rotation_ode, min_n_for_rotation)
from kgeodesic.geodesic_flow import (Tolerances, crosses_great_parallel, detect_self_intersections, integrate,
                                     launch_from_great_parallel)
from kgeodesic.minimality import check_k_geodesic
from kgeodesic.scanner import ScanConfig, scan, torus_control
from kgeodesic.surface import build_mesh


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def scan_k2():
    cfg = ScanConfig(k=2, n=20, belt=0.02, zeta=0.05, grid=2000, length_cutoff=800.0)
    return _timed(lambda: scan(cfg))


@pytest.fixture(scope="session")
def scan_k3():
    return _timed(lambda: scan(ScanConfig(k=3)))


def test_criterion_01_conservation(m2_10):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_c = worst_v = 0.0
    for a in rng.uniform(0.0, math.pi / 2, 200):
        tr = integrate(m2_10, launch_from_great_parallel(m2_10, float(a)), 100.0)
        worst_c = max(worst_c, float(np.max(np.abs(tr.clairaut_values() - tr.c))))
        worst_v = max(worst_v, float(np.max(np.abs(tr.speed_values() - 1.0))))
    elapsed = time.perf_counter() - t0
    # drift shrinks as the step tolerance tightens
    st0 = launch_from_great_parallel(m2_10, 0.7)
    drifts = []
    for r in (1e-6, 1e-8, 1e-10):
        tr = integrate(m2_10, st0, 100.0, tol=Tolerances(rtol=r, atol=r * 1e-2))
        drifts.append(float(np.max(np.abs(tr.clairaut_values() - tr.c))))
    scales = drifts[0] > drifts[1] > drifts[2]
    ok = worst_c <= 1e-8 and worst_v <= 1e-8 and scales and elapsed < 60.0
    record(1, ok, f"clairaut {worst_c:.2e}, speed {worst_v:.2e} per 100 units, "
                  f"drift vs rtol {['%.1e' % d for d in drifts]}, {elapsed:.1f} s")
    assert ok


def test_criterion_02_sphere(sphere):
    t0 = time.perf_counter()
    res = find_closed(sphere, 1000)
    worst = max(abs(c.length - 2 * math.pi) for c in res.closed)
    mesh = build_mesh(sphere, (256, 256))
    eq = closed_from_alpha(sphere, 0.0, 1, 1)
    verdicts = {k: check_k_geodesic(sphere, mesh, eq, k).verdict for k in (2, 3, 4)}
    elapsed = time.perf_counter() - t0
    ok = (res.closed and worst <= 1e-4 and all(v == "is_1k_within_tol" for v in verdicts.values())
          and elapsed < 120.0)
    record(2, ok, f"{len(res.closed)} closed, worst length error {worst:.1e}, equator {verdicts}, "
                  f"{elapsed:.1f} s")
    assert ok


def test_criterion_03_chord_depth():
    errs = [abs(chord_depth_L(n) - n * (1 - math.cos(1 / (2 * n)))) for n in (5, 10, 50, 100)]
    l10 = chord_depth_L(10)
    ratio = chord_depth_L(100) * 8 * 100
    ok = max(errs) <= 1e-12 and abs(l10 - 0.01249739) < 1e-8 and abs(ratio - 1) < 0.01
    record(3, ok, f"max sagitta error {max(errs):.1e}, L(10) = {l10:.10f}, 800 L(100) = {ratio:.6f}")
    assert ok


def test_criterion_04_first_return(m2_10, m2_20):
    dev = develop(m2_10)
    a_max = math.acos(dev.apex_radius_inner / dev.apex_radius_outer)
    T = first_return_rotation(dev, np.linspace(1e-3, a_max - 1e-3, 200))
    min_step = float(np.min(np.diff(T)))
    dev20 = develop(m2_20)
    a_max20 = math.acos(dev20.apex_radius_inner / dev20.apex_radius_outer)
    rng = np.random.default_rng(7)
    err = max(abs(first_return_rotation_ode(m2_20, a) - first_return_rotation(dev20, a))
              for a in rng.uniform(0.01, a_max20 - 0.01, 50))
    ok = min_step > -1e-9 and err <= 1e-6
    record(4, ok, f"smallest grid increment {min_step:.2e}, development vs ODE {err:.1e} on 50 chords")
    assert ok


def test_criterion_05_half_rotation_crossings(m2_20):
    hits = total = 0
    for a in np.linspace(m2_20.alpha_prime + 1e-4, m2_20.alpha_double_prime - 1e-4, 400):
        if abs(period_info(m2_20, a).half_rot_cone) <= math.pi + 0.01:
            continue
        tr = integrate(m2_20, launch_from_great_parallel(m2_20, float(a)), 1000.0, stop_gp=1, record=True)
        total += 1
        hits += len(detect_self_intersections(tr)) >= 1
        if total == 100:
            break
    ok = total == 100 and hits == total
    record(5, ok, f"{hits}/{total} launches with |T| > pi + 0.01 self-intersect")
    assert ok


def test_criterion_06_crosses_great_parallel(m2_10, scan_k2, scan_k3):
    res = find_closed(m2_10, 1000, length_cutoff=120.0)
    bad = sum(not (c.period_trace.kind == "parallel" or crosses_great_parallel(c.period_trace))
              for c in res.closed)
    checked = len(res.closed)
    for rep, _ in (scan_k2, scan_k3):
        lem = rep.lemmas["crosses_great_parallel"]
        assert lem["checked"] == len(rep.records)
        checked += lem["checked"]
        bad += lem["violations"]
    ok = bad == 0 and checked > 0
    record(6, ok, f"{checked} closed geodesics checked, {bad} violations")
    assert ok


def test_criterion_07_cone_loops(scan_k3):
    rep, _ = scan_k3
    checked = bad = shortest_bad = 0
    for rec in rep.records:
        loops = rec.get("cone_loops") or []
        if rec["case"] != "cone" or len(loops) < 4:
            continue
        checked += 1
        if not all(loops[0] < x for x in loops[1:]):
            shortest_bad += 1
        jump = [w for w in rec["witnesses"] if w["kind"] == "intersection_jump"]
        if not jump or not jump[0]["loop_length"] < rec["length"] / 3 - rec["margin_tol"]:
            bad += 1
    ok = checked > 0 and bad == 0 and shortest_bad == 0
    record(7, ok, f"{checked} cone geodesics with >= 4 loops, {bad} without a short jump, "
                  f"{shortest_bad} where loop 1 is not strictly shortest")
    assert ok


def _witness_complete(rep):
    return all(any(w["certifies"] for w in r["witnesses"]) for r in rep.records)


def test_criterion_08_scan_k2(scan_k2):
    rep, elapsed = scan_k2
    ok = rep.theorem_verdict and _witness_complete(rep) and elapsed < 1800.0
    record(8, ok, f"verdict {rep.theorem_verdict}, {len(rep.records)} geodesics, "
                  f"{len(rep.unresolved)} unresolved, {elapsed:.0f} s")
    assert ok


def test_criterion_09_scan_k3(scan_k3):
    rep, elapsed = scan_k3
    n_want = 2 * min_n_for_rotation(8 * math.pi, rep.config["zeta"])
    ok = rep.config["n"] == n_want and rep.theorem_verdict and _witness_complete(rep)
    record(9, ok, f"n = {rep.config['n']} (want {n_want}), verdict {rep.theorem_verdict}, "
                  f"{len(rep.records)} geodesics, {len(rep.unresolved)} unresolved, {elapsed:.0f} s")
    assert ok


def test_criterion_10_torus_control():
    inner = torus_control(3.0, 0.5, k=2, which="inner")
    outer = torus_control(3.0, 0.5, k=2, which="outer", mesh_only=True)
    mesh_w = [w for w in outer.witnesses if w.kind == "mesh_path" and w.certifies]
    ok = inner.verdict == "is_1k_within_tol" and outer.verdict == "not_1k" and bool(mesh_w)
    detail = f"inner {inner.verdict}, outer {outer.verdict}"
    if mesh_w:
        detail += f" (shortcut {mesh_w[0].shortcut_length:.3f} < {mesh_w[0].segment_length:.3f})"
    record(10, ok, detail)
    assert ok


def test_criterion_11_reproducible(tmp_path):
    cfg = dict(k=2, n=10, grid=1000, pq_list=[[1, 1], [3, 2], [2, 1]], n_offsets=64, mesh=64)
    a = scan(ScanConfig(**cfg)).to_json()
    b = scan(ScanConfig(**cfg)).to_json()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for name in ("r1", "r2"):
        assert main(["scan", "--config", str(path), "--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name / "report.json").read_bytes())
    ok = a == b and outs[0] == outs[1] and outs[0].decode() == a
    record(11, ok, f"report bytes identical across runs ({len(a)} bytes)")
    assert ok


# scan-level properties that share the two scans above

def test_k2_cone_geodesics_outside_zeta_self_intersect(scan_k2):
    rep, _ = scan_k2
    outside = [r for r in rep.records if r["case"] == "cone" and not r["in_zeta_neighborhood"]]
    simple = [r["index"] for r in outside if r["self_intersections"] < 1]
    print(f"k=2: {len(outside)} cone geodesics outside zeta, {len(simple)} without a self-intersection")
    assert outside and not simple


def test_k3_cone_geodesics_outside_zeta_have_four_crossings(scan_k3):
    rep, _ = scan_k3
    outside = [r for r in rep.records if r["case"] == "cone" and not r["in_zeta_neighborhood"]]
    few = [r["index"] for r in outside if len(r.get("cone_loops") or []) < 4]
    print(f"k=3: {len(outside)} cone geodesics outside zeta, {len(few)} with fewer than 4 cone crossings")
    assert outside and not few

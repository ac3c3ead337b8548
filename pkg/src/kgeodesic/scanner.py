"""End-to-end certificate: build M_k, enumerate its closed geodesics up to
the configured cutoffs and run the 1/k test on every one of them.

The verdict is relative to the census truncation (launch grid, q_max,
length cutoff), which the report lists next to the verdict.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .closed_search import ClosedGeodesic, find_closed, parallel_geodesic
from .cone_development import (DevelopedCone, DevelopmentError, OutOfDomain, develop,
                               first_return_rotation, min_n_for_rotation, required_rotation,
                               rotation_at_depth)
from .geodesic_flow import Tolerances, crosses_great_parallel, detect_self_intersections
from .minimality import MinimalityReport, check_k_geodesic, loop_decomposition
from .profile import ConeParams, build_smoothed_cone, build_torus
from .surface import SurfaceOfRevolution, build_mesh

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


@dataclass
class ScanConfig:
    k: int = 2
    n: int | None = None            # None: twice the smallest admissible n
    belt: float = 0.02              # epsilon
    cap: float = 0.05
    fillet: str = "quintic"
    zeta: float = 0.05
    grid: int = 2000
    q_max: int = 12
    pq_list: list | None = None
    length_cutoff: float | None = None   # None: 40 n
    mesh: int = 128
    neighborhood: int = 2
    n_offsets: int = 256
    margin_frac: float = 0.01
    rtol: float = 1e-10
    atol: float = 1e-12
    closure_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def n_min(self) -> int:
        return min_n_for_rotation(required_rotation(self.k), self.zeta)

    def validate(self) -> None:
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 2:
            raise ConfigError(f"k: must be an integer >= 2, got {self.k!r}")
        if not 0 < self.belt:
            raise ConfigError(f"belt: must be positive, got {self.belt!r}")
        if not self.belt < self.zeta:
            raise ConfigError(f"zeta: must exceed belt (epsilon={self.belt}), got {self.zeta!r}")
        if not self.zeta < 1.0 / self.k:
            raise ConfigError(f"zeta: must be below 1/k = {1.0 / self.k:.4g}, got {self.zeta!r}")
        if self.grid < 1000:
            raise ConfigError(f"grid: at least 1000 launch angles, got {self.grid!r}")
        if self.mesh < 64:
            raise ConfigError(f"mesh: resolution at least 64, got {self.mesh!r}")
        if self.n_offsets < 64:
            raise ConfigError(f"n_offsets: at least 64, got {self.n_offsets!r}")
        if self.n is not None:
            nmin = self.n_min()
            if self.n < nmin:
                raise ConfigError(f"n: must be at least {nmin} for k={self.k}, zeta={self.zeta}, "
                                  f"got {self.n!r}")

    def resolved(self) -> "ScanConfig":
        """Copy with n and length_cutoff filled in."""
        d = asdict(self)
        if d["n"] is None:
            d["n"] = 2 * self.n_min()
        if d["length_cutoff"] is None:
            d["length_cutoff"] = 40.0 * d["n"]
        return ScanConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScanConfig":
        known = {f.name for f in fields(cls)}
        bad = sorted(set(doc) - known)
        if bad:
            raise ConfigError(f"{bad[0]}: unknown configuration key")
        return cls(**doc)

    def tolerances(self) -> Tolerances:
        return Tolerances(rtol=self.rtol, atol=self.atol)


@dataclass
class ScanReport:
    config: dict
    n_min: int
    records: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)
    families: list = field(default_factory=list)
    truncation: dict = field(default_factory=dict)
    lemmas: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    theorem_verdict: bool = False

    def to_dict(self) -> dict:
        return _clean({
            "tool": "kgeodesic", "version": __version__,
            "config": self.config, "n_min": self.n_min,
            "theorem_verdict": self.theorem_verdict,
            "truncation": self.truncation, "lemmas": self.lemmas,
            "diagnostics": self.diagnostics, "unresolved": self.unresolved,
            "families": self.families, "geodesics": self.records,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def summary(self) -> str:
        t = self.truncation
        lines = [f"theorem_verdict: {self.theorem_verdict}",
                 f"k={self.config['k']} n={self.config['n']} (n_min {self.n_min}) "
                 f"epsilon={self.config['belt']} zeta={self.config['zeta']}",
                 f"census truncated at: grid {t.get('alpha_grid')}, q <= {t.get('q_max')}, "
                 f"length <= {t.get('length_cutoff')}",
                 f"closed geodesics: {len(self.records)}, unresolved: {len(self.unresolved)}, "
                 f"failing 1/k: {sum(r['verdict'] == 'not_1k' for r in self.records)}"]
        for name in sorted(self.lemmas):
            lm = self.lemmas[name]
            if lm.get("informational"):
                vals = ", ".join(f"{k} {v:.6g}" for k, v in sorted(lm.items()) if k != "informational")
                lines.append(f"  {name} (informational): {vals}")
                continue
            lines.append(f"  {name}: checked {lm.get('checked')}, violations {lm.get('violations')}")
        lines.extend(f"  ! {d}" for d in self.diagnostics)
        return "\n".join(lines)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def build_surface(cfg: ScanConfig) -> SurfaceOfRevolution:
    return SurfaceOfRevolution.from_profile(
        build_smoothed_cone(ConeParams(n=float(cfg.n), belt=cfg.belt, cap=cfg.cap, fillet=cfg.fillet)))


def route_of(cg: ClosedGeodesic, surface: SurfaceOfRevolution, zeta: float) -> tuple[str, bool]:
    """(expected shortcut route, inside the zeta-neighborhood)."""
    label = cg.case_label
    if label in ("great_parallel", "belt"):
        return "disc_chord", True
    if label in ("cap", "meridian"):
        return "half_parallel", False
    t_b = surface.profile.region_bounds("cone")[0]
    turn = cg.cone_turn()
    if turn is not None and turn[1] - t_b <= surface.zeta_depth(zeta):
        return "disc_chord", True
    return "intersection_jump", False


def scan(config: ScanConfig) -> ScanReport:
    cfg = config.resolved()
    k = cfg.k
    surf = build_surface(cfg)
    tol = cfg.tolerances()
    res = find_closed(surf, cfg.grid, pq_list=cfg.pq_list, closure_tol=cfg.closure_tol, q_max=cfg.q_max,
                      length_cutoff=cfg.length_cutoff, tol=tol)
    report = ScanReport(cfg.to_dict(), cfg.n_min())
    report.unresolved = res.unresolved
    report.families = res.families
    report.truncation = dict(res.truncation)
    report.truncation["note"] = ("verdict covers closed geodesics found with these cutoffs; "
                                 "longer or higher-q geodesics were not enumerated")

    mesh_box: dict = {}

    def lazy_mesh():
        if "m" not in mesh_box:
            mesh_box["m"] = build_mesh(surf, (cfg.mesh, cfg.mesh), cfg.neighborhood)
        return mesh_box["m"]

    lem = {
        "crosses_great_parallel": {"checked": 0, "violations": 0},
        "half_loop_jump": {"checked": 0, "violations": 0},
        "half_rotation_self_intersection": {"checked": 0, "violations": 0},
        "first_return_monotone": {"checked": 0, "violations": 0},
        "cone_loops_jump": {"checked": 0, "violations": 0},
    }
    max_crossings = 0
    t_b = surf.profile.region_bounds("cone")[0]

    for idx, cg in enumerate(res.closed):
        rec = cg.record()
        rec["index"] = idx
        route, in_zeta = route_of(cg, surf, cfg.zeta)
        rec["route"] = route
        rec["in_zeta_neighborhood"] = in_zeta
        turn = cg.cone_turn()
        rec["cone_turn_depth"] = None if turn is None else float(turn[1] - t_b)

        # the great parallel is met by every closed geodesic
        lem["crosses_great_parallel"]["checked"] += 1
        if not (cg.period_trace.kind == "parallel" or crosses_great_parallel(cg.period_trace)):
            lem["crosses_great_parallel"]["violations"] += 1

        crossings = []
        if cg.period_trace.kind == "numeric":
            crossings = detect_self_intersections(cg.trace, closed=True)
        rec["self_intersections"] = len(crossings)
        max_crossings = max(max_crossings, len(crossings))

        # half rotation beyond pi forces a crossing
        if turn is not None and cg.case_label == "cone":
            half = float(cg.period_trace.rotation(turn[0])[0])
            rec["half_rotation"] = half
            if abs(half) > math.pi + 0.01:
                lem["half_rotation_self_intersection"]["checked"] += 1
                if not crossings:
                    lem["half_rotation_self_intersection"]["violations"] += 1

        rep: MinimalityReport = check_k_geodesic(surf, lazy_mesh, cg, k, cfg.n_offsets, cfg.margin_frac,
                                                 general_crossings=(k == 2))
        rec.update(rep.to_dict())
        rec["expected_route_certified"] = bool(any(w.kind == route and w.certifies for w in rep.witnesses))
        jump = next((w for w in rep.witnesses if w.kind == "intersection_jump"), None)

        # any self-intersection leaves a loop of length at most l/2
        if k == 2 and crossings:
            lem["half_loop_jump"]["checked"] += 1
            if jump is None or jump.loop_length > cg.length / 2:
                lem["half_loop_jump"]["violations"] += 1

        if cg.case_label == "cone":
            loops = loop_decomposition(cg)
            rec["cone_loops"] = [lp.length for lp in loops]
            if len(loops) >= k + 1:
                lem["cone_loops_jump"]["checked"] += 1
                first = loops[0].length
                ok = all(first < lp.length for lp in loops[1:])
                ok = ok and first < cg.length / k - rep.margin_tol
                ok = ok and jump is not None and jump.loop_length <= first + 1e-9
                if not ok:
                    lem["cone_loops_jump"]["violations"] += 1

        if rep.verdict != "not_1k":
            report.diagnostics.append(f"geodesic {idx} (alpha={cg.launch_alpha!r}, {cg.case_label}) "
                                      f"not certified: worst margin {rep.worst_margin:.3g}")
        elif not any(w.certifies for w in rep.witnesses):
            report.diagnostics.append(f"geodesic {idx}: not_1k without a witness")
        cg.release()
        report.records.append(rec)

    # monotone first-return rotation on the development
    try:
        dev = develop(surf)
        a_max = math.acos(min(1.0, dev.apex_radius_inner / dev.apex_radius_outer))
        grid = np.linspace(0.0, a_max, 202)[1:-1]
        T = first_return_rotation(dev, grid)
        lem["first_return_monotone"]["checked"] = int(len(grid))
        lem["first_return_monotone"]["violations"] = int(np.sum(np.diff(T) <= 0))
    except (DevelopmentError, OutOfDomain) as exc:
        report.diagnostics.append(f"development unavailable: {exc}")

    # how far the idealized chord model behind n_min is from this surface
    try:
        target = required_rotation(k)
        lem["rotation_at_zeta"] = {
            "informational": True, "required_turns": target / TWO_PI,
            "idealized_turns": rotation_at_depth(DevelopedCone.idealized(cfg.n), cfg.zeta) / TWO_PI,
            "surface_turns": rotation_at_depth(develop(surf), cfg.zeta) / TWO_PI}
    except (DevelopmentError, OutOfDomain) as exc:
        report.diagnostics.append(f"rotation at zeta unavailable: {exc}")

    lem["self_intersection_count_remark"] = {
        "informational": True, "max_self_intersections": max_crossings,
        "reference_count": (cfg.n / 2.0 - 1.0) ** 2}
    report.lemmas = lem

    if report.unresolved:
        report.diagnostics.append(f"{len(report.unresolved)} unresolved candidates")
    if not report.records:
        report.diagnostics.append("no closed geodesics found")
    report.theorem_verdict = theorem_verdict(report.records, report.unresolved)
    return report


def theorem_verdict(records: list, unresolved: list) -> bool:
    """True iff something was checked, nothing is unresolved and every
    closed geodesic fails the 1/k test with a certifying witness."""
    return bool(records and not unresolved
                and all(r["verdict"] == "not_1k" and any(w["certifies"] for w in r["witnesses"])
                        for r in records))


def sphere_control(k: int = 2, resolution: int = 128, grid: int = 1000,
                   n_offsets: int = 256, margin_frac: float = 0.01) -> ScanReport:
    """Scan of the round sphere, whose great circles are all 1/k-geodesics:
    the verdict must come out false."""
    from .profile import build_sphere
    surf = SurfaceOfRevolution.from_profile(build_sphere())
    res = find_closed(surf, grid)
    mesh = build_mesh(surf, (resolution, resolution))
    report = ScanReport({"surface": "sphere", "k": k, "grid": grid, "mesh": resolution}, 0)
    report.unresolved = res.unresolved
    report.families = res.families
    report.truncation = dict(res.truncation)
    for idx, cg in enumerate(res.closed):
        rep = check_k_geodesic(surf, mesh, cg, k, n_offsets, margin_frac)
        rec = cg.record()
        rec["index"] = idx
        rec.update(rep.to_dict())
        report.records.append(rec)
        cg.release()
    report.theorem_verdict = theorem_verdict(report.records, report.unresolved)
    return report


def torus_control(R: float = 3.0, a: float = 0.5, k: int = 2, which: str = "inner",
                  resolution: int = 128, neighborhood: int = 2, n_offsets: int = 256,
                  margin_frac: float = 0.01, mesh_only: bool = False) -> MinimalityReport:
    """1/k test of a torus equator.  The checker must be able to pass a
    geodesic (inner equator) as well as fail one (outer equator)."""
    if not R > 2 * a:
        raise ConfigError("torus control needs R > 2a")
    surf = SurfaceOfRevolution.from_profile(build_torus(R, a))
    if which == "inner":
        t = math.pi * a
    elif which == "outer":
        t = 0.0
    else:
        raise ConfigError(f"which: 'inner' or 'outer', got {which!r}")
    cg = parallel_geodesic(surf, t)
    mesh = build_mesh(surf, (resolution, resolution), neighborhood)
    kinds = ("mesh_path",) if mesh_only else ("intersection_jump", "disc_chord", "half_parallel", "mesh_path")
    return check_k_geodesic(surf, mesh, cg, k, n_offsets, margin_frac, kinds=kinds)

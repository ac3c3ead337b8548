"""Command-line front end.

    kgeodesic build-surface --n 20 --svg --csv
    kgeodesic trace --n 20 --alpha 1.2 --length 100 --csv --svg
    kgeodesic develop --n 20 --svg
    kgeodesic find-closed --n 20 --grid 2000
    kgeodesic check-k --n 20 --k 2 --alpha 0 --turns 1 --periods 1
    kgeodesic scan --config scan.json --expect no-1k
    kgeodesic controls --k 2 --expect has-1k

Exit codes: 0 success (or expectation met), 1 expectation failed, 2 usage
or configuration error, 3 numerical failure.  The output directory
defaults to $KGEODESIC_OUT or the current directory.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .closed_search import SearchError, closed_from_alpha, find_closed
from .cone_development import (DevelopedCone, DevelopmentError, chord_depth_L, develop,
                               min_n_for_rotation, required_rotation)
from .geodesic_flow import GeodesicTrace, IntegrationError, integrate, launch_from_great_parallel
from .minimality import check_k_geodesic, export_witness_csv
from .profile import ConeParams, ProfileCurve, ProfileError, build_smoothed_cone, build_sphere
from .scanner import ConfigError, ScanConfig, build_surface, scan, torus_control
from .surface import SurfaceError, SurfaceOfRevolution, build_mesh

EXIT_OK, EXIT_EXPECT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_FIELD_TYPES = {
    "k": int, "n": int, "belt": float, "cap": float, "fillet": str, "zeta": float, "grid": int,
    "q_max": int, "pq_list": list, "length_cutoff": float, "mesh": int, "neighborhood": int,
    "n_offsets": int, "margin_frac": float, "rtol": float, "atol": float, "closure_tol": float,
    "seed": int,
}


def _check_types(doc: dict) -> dict:
    known = {f.name for f in fields(ScanConfig)}
    out = {}
    for key in sorted(doc):
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration key")
        val = doc[key]
        want = _FIELD_TYPES[key]
        if val is None and key in ("n", "length_cutoff", "pq_list"):
            out[key] = None
            continue
        if want is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{key}: expected an integer, got {val!r}")
        elif want is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{key}: expected a number, got {val!r}")
            val = float(val)
        elif want is str:
            if not isinstance(val, str):
                raise ConfigError(f"{key}: expected a string, got {val!r}")
        elif want is list:
            if not isinstance(val, list) or not all(
                    isinstance(pq, list) and len(pq) == 2 and all(isinstance(v, int) and v > 0 for v in pq)
                    for pq in val):
                raise ConfigError(f"{key}: expected a list of [p, q] positive integer pairs")
        out[key] = val
    return out


def config_from_dict(doc) -> ScanConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    return ScanConfig.from_dict(_check_types(doc))


def parse_config(path) -> ScanConfig:
    """Read, type-check and validate a JSON scan configuration; n is filled
    in from the smallest admissible value when absent."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc).resolved()


def serialize_config(cfg: ScanConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))


def config_digest(cfg: ScanConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_digest: str | None = None
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    started: str = ""
    finished: str = ""
    tool_version: str = __version__

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        doc = {"tool": "kgeodesic", "tool_version": self.tool_version, "command": self.command,
               "config_digest": self.config_digest, "inputs": self.inputs,
               "outputs": sorted(self.outputs), "started": self.started, "finished": self.finished}
        path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


# --------------------------------------------------------------------------
# SVG figures
# --------------------------------------------------------------------------

class _Canvas:
    """Minimal deterministic SVG writer with a data-to-pixel transform."""

    def __init__(self, xlim, ylim, width=640, height=480, pad=48, equal=False, title=""):
        self.w, self.h, self.pad = width, height, pad
        x0, x1 = xlim
        y0, y1 = ylim
        if x1 <= x0:
            x0, x1 = x0 - 1.0, x0 + 1.0
        if y1 <= y0:
            y0, y1 = y0 - 1.0, y0 + 1.0
        sx = (width - 2 * pad) / (x1 - x0)
        sy = (height - 2 * pad) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.x0, self.y0, self.sx, self.sy = x0, y0, sx, sy
        self.items = []
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        if title:
            self.text(width / 2, 20, title, anchor="middle", raw=True)

    def px(self, x, y):
        return (self.pad + (x - self.x0) * self.sx, self.h - self.pad - (y - self.y0) * self.sy)

    def polyline(self, xs, ys, stroke="#1f4e79", width=1.2, dash=None):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if len(xs) < 2:
            return
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in (self.px(x, y) for x, y in zip(xs, ys)))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
                          f'stroke-width="{width}"{extra}/>')

    def text(self, x, y, s, anchor="start", raw=False, size=12):
        if not raw:
            x, y = self.px(x, y)
        self.items.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" font-family="sans-serif" '
                          f'text-anchor="{anchor}">{escape(s)}</text>')

    def axes(self, xlabel="", ylabel=""):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        a = self.px(x0, y0)
        b = self.px(x1, y0)
        c = self.px(x0, y1)
        self.items.append(f'<line x1="{a[0]:.2f}" y1="{a[1]:.2f}" x2="{b[0]:.2f}" y2="{b[1]:.2f}" '
                          f'stroke="black"/>')
        self.items.append(f'<line x1="{a[0]:.2f}" y1="{a[1]:.2f}" x2="{c[0]:.2f}" y2="{c[1]:.2f}" '
                          f'stroke="black"/>')
        for v in np.linspace(x0, x1, 5):
            p = self.px(v, y0)
            self.text(p[0], p[1] + 16, f"{v:.3g}", anchor="middle", raw=True, size=10)
        for v in np.linspace(y0, y1, 5):
            p = self.px(x0, v)
            self.text(p[0] - 6, p[1] + 4, f"{v:.3g}", anchor="end", raw=True, size=10)
        if xlabel:
            self.text(self.w / 2, self.h - 8, xlabel, anchor="middle", raw=True)
        if ylabel:
            self.text(12, self.h / 2, ylabel, anchor="middle", raw=True)

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">')
        bg = f'<rect width="{self.w}" height="{self.h}" fill="white"/>'
        return "\n".join(['<?xml version="1.0" encoding="UTF-8"?>', head, bg, *self.items, "</svg>"]) + "\n"


def _svg_profile(data) -> str:
    prof: ProfileCurve = data
    tab = prof.samples()
    x, r = tab[:, 1], tab[:, 2]
    c = _Canvas((float(x.min()), float(x.max())), (0.0, float(r.max()) * 1.05), equal=True,
                title=f"profile ({prof.kind})")
    c.axes("x (axis)", "r")
    colors = {"disc": "#2b8cbe", "belt": "#d95f02", "cone": "#1b9e77", "cap": "#7570b3"}
    for name, a, b in prof.regions:
        m = (tab[:, 0] >= a) & (tab[:, 0] <= b)
        c.polyline(x[m], r[m], stroke=colors.get(name, "#333333"), width=2.0)
    return c.render()


def _svg_sector(data) -> str:
    dev: DevelopedCone = data["development"]
    chords = data.get("chords", [])
    R, Rin = dev.apex_radius_outer, dev.apex_radius_inner
    span = min(2.0 * math.pi, dev.sector_angle_per_turn)
    c = _Canvas((-R * 1.05, R * 1.05), (-R * 1.05, R * 1.05), width=560, height=560, equal=True,
                title="developed cone (one turn)")
    ang = np.linspace(0.0, span, 400)
    c.polyline(R * np.cos(ang), R * np.sin(ang), stroke="black", width=1.5)
    if Rin > 0:
        c.polyline(Rin * np.cos(ang), Rin * np.sin(ang), stroke="black", width=1.0)
    for a in (0.0, span):
        c.polyline([Rin * math.cos(a), R * math.cos(a)], [Rin * math.sin(a), R * math.sin(a)],
                   stroke="#888888", dash="4,3")
    for at in chords:
        # chord entering the outer circle at angle at, symmetric about its turn
        half = at
        p0 = (R * math.cos(0.0), R * math.sin(0.0))
        p1 = (R * math.cos(2 * half), R * math.sin(2 * half))
        c.polyline([p0[0], p1[0]], [p0[1], p1[1]], stroke="#d95f02", width=1.5)
    return c.render()


def _svg_trace(data) -> str:
    if isinstance(data, GeodesicTrace):
        th, t = data.theta, data.t
        title = "geodesic on the (theta, t) cylinder"
    else:
        arr = np.asarray(data, dtype=float).reshape(-1, 2)
        th, t = arr[:, 0], arr[:, 1]
        title = "trace"
    if len(th) == 0:
        c = _Canvas((0.0, 2 * math.pi), (0.0, 1.0), title=title)
        c.axes("theta mod 2 pi", "t")
        return c.render()
    thm = np.mod(th, 2 * math.pi)
    c = _Canvas((0.0, 2 * math.pi), (float(t.min()), float(t.max())), title=title)
    c.axes("theta mod 2 pi", "t")
    # break the polyline where theta wraps
    cut = np.flatnonzero(np.abs(np.diff(thm)) > math.pi) + 1
    for seg in np.split(np.arange(len(thm)), cut):
        c.polyline(thm[seg], t[seg])
    return c.render()


_SVG_KINDS = {"profile": _svg_profile, "sector": _svg_sector, "trace": _svg_trace}


def emit_svg(figure_kind: str, data, path) -> Path:
    if figure_kind not in _SVG_KINDS:
        raise ValueError(f"unknown figure kind {figure_kind!r}")
    text = _SVG_KINDS[figure_kind](data)
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _config(args) -> ScanConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
    for key in ("k", "n", "grid", "mesh"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    return config_from_dict(doc).resolved()


def _surface_for(args) -> tuple[SurfaceOfRevolution, ScanConfig | None]:
    if getattr(args, "sphere", False):
        return SurfaceOfRevolution.from_profile(build_sphere()), None
    cfg = _config(args)
    return build_surface(cfg), cfg


def _write_json(path: Path, doc, manifest: RunManifest) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    manifest.outputs.append(path.name)


def cmd_build_surface(args, out: Path, man: RunManifest) -> int:
    surf, cfg = _surface_for(args)
    prof = surf.profile
    doc = {"kind": prof.kind, "regions": [[n, a, b] for n, a, b in prof.regions],
           "total_length": surf.total_length, "r_max": surf.r_max,
           "great_parallel_t": surf.great_parallel_t}
    if surf.is_smoothed_cone:
        doc.update(alpha_prime=surf.alpha_prime, alpha_double_prime=surf.alpha_double_prime,
                   n=cfg.n, belt=cfg.belt, cap=cfg.cap)
    _write_json(out / "surface.json", doc, man)
    if args.csv:
        prof.to_csv(out / "profile.csv")
        man.outputs.append("profile.csv")
    if args.svg:
        emit_svg("profile", prof, out / "profile.svg")
        man.outputs.append("profile.svg")
    if args.obj:
        build_mesh(surf, (cfg.mesh if cfg else 128,) * 2).to_obj(out / "mesh.obj")
        man.outputs.append("mesh.obj")
    print(json.dumps(doc, sort_keys=True, indent=1))
    return EXIT_OK


def cmd_trace(args, out: Path, man: RunManifest) -> int:
    surf, _ = _surface_for(args)
    st = launch_from_great_parallel(surf, args.alpha)
    tr = integrate(surf, st, args.length, launch_alpha=args.alpha)
    c = tr.clairaut_values()
    sp = tr.speed_values()
    doc = {"alpha": args.alpha, "length": tr.length, "samples": int(len(tr.s)),
           "turning_points": len(tr.turning_events), "gp_crossings": int(len(tr.gp_crossings)),
           "clairaut_drift": float(np.max(np.abs(c - c[0]))), "speed_drift": float(np.max(np.abs(sp - 1.0)))}
    _write_json(out / "trace.json", doc, man)
    if args.csv:
        tr.to_csv(out / "trace.csv")
        man.outputs.append("trace.csv")
    if args.svg:
        emit_svg("trace", tr, out / "trace.svg")
        man.outputs.append("trace.svg")
    print(json.dumps(doc, sort_keys=True, indent=1))
    return EXIT_OK


def cmd_develop(args, out: Path, man: RunManifest) -> int:
    cfg = _config(args)
    dev = develop(build_surface(cfg))
    doc = {"n": cfg.n, "apex_radius_outer": dev.apex_radius_outer,
           "apex_radius_inner": dev.apex_radius_inner, "sector_angle_per_turn": dev.sector_angle_per_turn,
           "normalization": dev.normalization, "L": chord_depth_L(cfg.n), "zeta": cfg.zeta,
           "n_min": min_n_for_rotation(required_rotation(cfg.k), cfg.zeta),
           "required_rotation": required_rotation(cfg.k)}
    _write_json(out / "development.json", doc, man)
    if args.svg:
        # chord whose first return rotation is exactly one full turn
        at = 0.5 * dev.sector_angle_per_turn
        emit_svg("sector", {"development": dev, "chords": [at]}, out / "sector.svg")
        man.outputs.append("sector.svg")
    print(json.dumps(doc, sort_keys=True, indent=1))
    return EXIT_OK


def cmd_find_closed(args, out: Path, man: RunManifest) -> int:
    surf, cfg = _surface_for(args)
    grid = args.grid or (cfg.grid if cfg else 2000)
    res = find_closed(surf, grid, q_max=cfg.q_max if cfg else 12,
                      length_cutoff=args.length_cutoff or (cfg.length_cutoff if cfg else None))
    doc = {"closed": [c.record() for c in res.closed], "unresolved": res.unresolved,
           "families": res.families, "truncation": res.truncation}
    _write_json(out / "closed.json", doc, man)
    print(f"{len(res.closed)} closed geodesics, {len(res.unresolved)} unresolved")
    return EXIT_OK if not res.unresolved else EXIT_NUMERIC


def cmd_check_k(args, out: Path, man: RunManifest) -> int:
    surf, cfg = _surface_for(args)
    k = args.k or (cfg.k if cfg else 2)
    cg = closed_from_alpha(surf, args.alpha, args.turns, args.periods)
    if cg.closure_residual > 1e-6:
        print(f"launch angle does not close: residual {cg.closure_residual:.3g}", file=sys.stderr)
        return EXIT_NUMERIC
    mesh_res = args.mesh or (cfg.mesh if cfg else 128)
    rep = check_k_geodesic(surf, lambda: build_mesh(surf, (mesh_res, mesh_res)), cg, k)
    doc = {"geodesic": cg.record(), "report": rep.to_dict()}
    _write_json(out / "check_k.json", doc, man)
    if args.csv:
        for i, w in enumerate(rep.witnesses):
            name = f"witness_{i}_{w.kind}.csv"
            export_witness_csv(surf, cg, w, out / name)
            man.outputs.append(name)
    print(rep.table())
    return _expect(args.expect, rep.verdict == "not_1k")


def cmd_scan(args, out: Path, man: RunManifest) -> int:
    cfg = _config(args)
    man.config_digest = config_digest(cfg)
    rep = scan(cfg)
    (out / "report.json").write_text(rep.to_json(), encoding="utf-8")
    man.outputs.append("report.json")
    print(rep.summary())
    return _expect(args.expect, rep.theorem_verdict)


def cmd_controls(args, out: Path, man: RunManifest) -> int:
    k = args.k or 2
    res = args.mesh or 128
    rows = {}
    inner = torus_control(3.0, 0.5, k, "inner", resolution=res)
    outer = torus_control(3.0, 0.5, k, "outer", resolution=res, mesh_only=True)
    sph = SurfaceOfRevolution.from_profile(build_sphere())
    eq = closed_from_alpha(sph, 0.0, 1, 1)
    sphere = check_k_geodesic(sph, build_mesh(sph, (res, res)), eq, k)
    for name, rep in (("torus_inner_equator", inner), ("torus_outer_equator", outer),
                      ("sphere_equator", sphere)):
        rows[name] = rep.to_dict()
        print(f"{name:<22} {rep.verdict:<18} worst margin {rep.worst_margin:.4g}")
    _write_json(out / "controls.json", rows, man)
    # "no-1k" expects every control to fail the test
    return _expect(args.expect, all(r["verdict"] == "not_1k" for r in rows.values()))


def _expect(flag: str | None, no_1k: bool) -> int:
    if flag is None:
        return EXIT_OK
    ok = no_1k if flag == "no-1k" else not no_1k
    if not ok:
        print(f"expectation {flag!r} not met", file=sys.stderr)
    return EXIT_OK if ok else EXIT_EXPECT


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scan configuration")
    common.add_argument("--out", help="output directory (default $KGEODESIC_OUT or .)")
    common.add_argument("--k", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--grid", type=int)
    common.add_argument("--mesh", type=int)
    common.add_argument("--expect", choices=("no-1k", "has-1k"))
    common.add_argument("--svg", action="store_true")
    common.add_argument("--csv", action="store_true")

    p = argparse.ArgumentParser(prog="kgeodesic", description="1/k-geodesics on smoothed cones")
    p.add_argument("--version", action="version", version=f"kgeodesic {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-surface", parents=[common], help="build M_k and write its profile")
    s.add_argument("--sphere", action="store_true", help="unit sphere instead of M_k")
    s.add_argument("--obj", action="store_true", help="also write the distance mesh")
    s.set_defaults(func=cmd_build_surface)

    s = sub.add_parser("trace", parents=[common], help="integrate one geodesic")
    s.add_argument("--sphere", action="store_true")
    s.add_argument("--alpha", type=float, required=True, help="launch angle at the great parallel")
    s.add_argument("--length", type=float, default=50.0)
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("develop", parents=[common], help="planar development of the cone")
    s.set_defaults(func=cmd_develop)

    s = sub.add_parser("find-closed", parents=[common], help="census of closed geodesics")
    s.add_argument("--sphere", action="store_true")
    s.add_argument("--length-cutoff", type=float)
    s.set_defaults(func=cmd_find_closed)

    s = sub.add_parser("check-k", parents=[common], help="1/k test of one closed geodesic")
    s.add_argument("--sphere", action="store_true")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--turns", type=int, default=1)
    s.add_argument("--periods", type=int, default=1)
    s.set_defaults(func=cmd_check_k)

    s = sub.add_parser("scan", parents=[common], help="end-to-end certificate")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("controls", parents=[common], help="torus and sphere controls")
    s.set_defaults(func=cmd_controls)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out or os.environ.get("KGEODESIC_OUT", "."))
    man = RunManifest(command=args.command, started=_now())
    if args.config:
        man.inputs.append(str(args.config))
    try:
        out.mkdir(parents=True, exist_ok=True)
        code = args.func(args, out, man)
    except (ConfigError, ProfileError, SurfaceError, DevelopmentError, SearchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    man.finished = _now()
    man.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: reproducible batch runs with CSV/JSON output.

Every run with --output also writes <output>.manifest.json embedding the
full run configuration, the tool version, and a sha256 of the output bytes,
so results are reproducible bit for bit given the same build.  Work items
in sweeps run on a thread pool capped by QGEOM_THREADS; output rows are
sorted by a total key before writing, so parallelism never changes bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .brackets import (
    PhasePoint,
    constraints_from_surface,
    coordinate_observable,
    dirac_bracket,
    momentum_observable,
)
from .conversion import conversion_residual_strict, conversion_residual_weak
from .curves import PlanarCurve
from .errors import (
    DegenerateGradient,
    FormMismatch,
    NotDistanceNormalized,
    OffSurface,
    ParseError,
    QgeomError,
    SingularConstraintMatrix,
)
from .fieldexpr import parse_field
from .geometry import (
    SurfaceSpec,
    closest_point,
    sample_on_surface,
    shape_spectrum,
)
from .potentials import (
    SchemeId,
    fujii_extra,
    vq_conversion,
    vq_curve,
    vq_dirac_distance,
    vq_dirac_raw,
    vq_flat_bundle,
    vq_paraboloid,
    vq_podolsky,
    vq_thin_layer,
)
from .geometry import orthonormal_frame
from .spectral import (
    AnnulusProblem,
    TubeProblem,
    curve_effective_spectrum,
    delta_sweep,
    sphere_spectrum,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COMPUTE = 2
EXIT_VERDICT = 3

SPECTRAL_COLUMNS = ["problem", "scheme", "delta", "grid_s", "grid_w",
                    "mode", "eigenvalue", "subtracted", "target", "gap"]


def _workers() -> int:
    try:
        n = int(os.environ.get("QGEOM_THREADS", "4"))
    except ValueError:
        n = 4
    return max(1, n)


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "params": self.params}


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (config error) instead of 2 on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(columns, rows, cfg: RunConfig, args) -> None:
    rows = sorted(rows, key=lambda r: tuple(_fmt(r.get(c, "")) for c in columns))
    if args.format == "json":
        payload = json.dumps({"config": cfg.to_dict(), "rows": rows},
                             default=_json_default, indent=2, sort_keys=True) + "\n"
        data = payload.encode()
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])
        data = buf.getvalue().encode()

    if args.output:
        with open(args.output, "wb") as fh:
            fh.write(data)
        _write_manifest(args.output, cfg, data)
        if getattr(args, "gnuplot", False) and args.format == "csv":
            _write_gnuplot(args.output, columns)
    else:
        sys.stdout.write(data.decode())


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_manifest(output_path: str, cfg: RunConfig, data: bytes) -> None:
    manifest = {
        "tool": "qgeom",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),  # excluded from hash
        "config": cfg.to_dict(),
        "output": os.path.basename(output_path),
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    with open(output_path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_gnuplot(output_path: str, columns) -> None:
    script = (
        "set datafile separator ','\n"
        f"set key autotitle columnhead\n"
        f"plot '{os.path.basename(output_path)}' using 0:{len(columns)} with linespoints\n"
    )
    with open(output_path + ".gp", "w") as fh:
        fh.write(script)


# --------------------------------------------------------------------------
# shared argument helpers
# --------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--output", default=None, help="output path (default stdout)")
    p.add_argument("--gnuplot", action="store_true",
                   help="emit a gnuplot script next to the CSV output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None,
                   help="JSON file of parameter defaults; explicit flags win")


def _parse_points(values, ndim):
    pts = []
    for text in values:
        parts = [float(v) for v in text.split(",")]
        if len(parts) != ndim:
            raise ParseError(f"point '{text}' has {len(parts)} components, "
                             f"expected {ndim}", 0)
        pts.append(np.array(parts))
    return pts


def _surface_from_args(args) -> SurfaceSpec:
    if not args.surface or not args.coords:
        raise ParseError("--surface and --coords are required", 0)
    coords = [c.strip() for c in args.coords.split(",")]
    sources = args.surface if isinstance(args.surface, list) else [args.surface]
    return SurfaceSpec.from_sources(sources, coords)


def _curve_from_spec(spec: str) -> PlanarCurve:
    kind, _, rest = spec.partition(":")
    if kind == "circle":
        return PlanarCurve.circle(float(rest))
    if kind == "ellipse":
        a, b = (float(v) for v in rest.split(","))
        return PlanarCurve.ellipse(a, b)
    if kind == "expr":
        x_src, _, y_src = rest.partition(";")
        return PlanarCurve.from_sources(x_src, y_src, name=spec)
    raise ParseError(f"unknown curve spec '{spec}'", 0)


def _apply_config(args) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        table = json.load(fh)
    for key, value in table.items():
        dest = key.replace("-", "_")
        if getattr(args, dest, None) in (None, [], False):
            setattr(args, dest, value)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_potential(args) -> int:
    s = _surface_from_args(args)
    schemes = [SchemeId(v.strip()) for v in args.schemes.split(",")]
    if args.point:
        points = _parse_points(args.point, s.ndim)
    else:
        points = sample_on_surface(s, args.sample, seed=args.seed)
    if args.project:
        points = [closest_point(s, x)[0] for x in points]

    def work(item):
        idx, x, scheme = item
        if scheme == SchemeId.dirac_raw and not args.normalize_distance:
            report = vq_dirac_raw(s, x, hbar=args.hbar)
        elif scheme == SchemeId.fujii:
            report = fujii_extra(s, x, hbar=args.hbar)
        elif scheme in (SchemeId.dirac_raw, SchemeId.dirac_distance):
            report = vq_dirac_distance(shape_spectrum(s, x), hbar=args.hbar)
        elif scheme in (SchemeId.thin_layer, SchemeId.paraboloid_closed_form,
                        SchemeId.curve):
            k = shape_spectrum(s, x).principal_curvatures
            if scheme == SchemeId.thin_layer:
                report = vq_thin_layer(k, hbar=args.hbar)
            elif scheme == SchemeId.paraboloid_closed_form:
                report = vq_paraboloid(k, hbar=args.hbar)
            else:
                report = vq_curve(float(k[0]), hbar=args.hbar)
            report.point = tuple(float(v) for v in x)
        elif scheme == SchemeId.flat_bundle:
            frame = orthonormal_frame(s, x) if s.codim >= 2 else shape_spectrum(s, x)
            report = vq_flat_bundle(frame, hbar=args.hbar)
        elif scheme in (SchemeId.podolsky, SchemeId.conversion):
            report = vq_podolsky(hbar=args.hbar) if scheme == SchemeId.podolsky \
                else vq_conversion(hbar=args.hbar)
            report.point = tuple(float(v) for v in x)
        else:
            raise QgeomError(f"scheme {scheme} not supported by this command")
        return {
            "scheme": scheme.value,
            "point_index": idx,
            "point": ";".join(repr(float(v)) for v in x),
            "value": report.value,
            "diagnostics": json.dumps(
                {k: float(v) for k, v in report.diagnostics.items()}, sort_keys=True),
        }

    items = [(i, x, scheme) for i, x in enumerate(points) for scheme in schemes]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        rows = list(pool.map(work, items))
    cfg = RunConfig("potential", {
        "surface": args.surface, "coords": args.coords,
        "schemes": args.schemes, "points": [r["point"] for r in rows],
        "seed": args.seed, "hbar": args.hbar,
    })
    _write_rows(["scheme", "point_index", "point", "value", "diagnostics"],
                rows, cfg, args)
    return EXIT_OK


def cmd_brackets(args) -> int:
    s = _surface_from_args(args)
    n = s.ndim
    x = _parse_points([args.x], n)[0]
    p = _parse_points([args.p], n)[0]
    if args.project:
        x = closest_point(s, x)[0]
    z = PhasePoint(x, p)
    scale = 1.0 + float(np.linalg.norm(x))
    on_surface = abs(s.value(x)) <= 1e-8 * scale
    caveat = "" if on_surface else "off-surface-weak-sense"
    C = constraints_from_surface(s)
    rows = []
    tables = {
        "xx": (coordinate_observable, coordinate_observable),
        "xp": (coordinate_observable, momentum_observable),
        "pp": (momentum_observable, momentum_observable),
    }
    for name, (mk_a, mk_b) in tables.items():
        for i in range(n):
            for j in range(n):
                value = dirac_bracket(mk_a(i, n), mk_b(j, n), C, z)
                rows.append({"bracket": name, "i": i + 1, "j": j + 1,
                             "value": value, "on_surface": on_surface,
                             "caveat": caveat})
    cfg = RunConfig("brackets", {
        "surface": args.surface, "coords": args.coords,
        "x": args.x, "p": args.p, "project": bool(args.project),
    })
    _write_rows(["bracket", "i", "j", "value", "on_surface", "caveat"],
                rows, cfg, args)
    return EXIT_OK


def _spectral_rows(problem, scheme, spectrum, targets=None, delta="", grid_s="",
                   grid_w=""):
    rows = []
    subtracted = None
    if "transverse_energy" in spectrum.meta:
        subtracted = spectrum.subtracted
    for idx, (lam, label) in enumerate(zip(spectrum.eigenvalues, spectrum.labels)):
        target = "" if targets is None else targets[idx]
        sub = "" if subtracted is None else subtracted[idx]
        gap = "" if targets is None else abs((sub if subtracted is not None else lam)
                                             - target)
        rows.append({
            "problem": problem, "scheme": scheme, "delta": delta,
            "grid_s": grid_s, "grid_w": grid_w, "mode": label,
            "eigenvalue": lam, "subtracted": sub, "target": target, "gap": gap,
        })
    return rows


def cmd_spectrum(args) -> int:
    rows = []
    if args.sphere:
        n = int(args.sphere)
        schemes = [SchemeId(v.strip()) for v in args.schemes.split(",")]
        for scheme in schemes:
            spec = sphere_spectrum(n, args.radius, scheme, args.lmax)
            rows.extend(_spectral_rows(f"sphere:{n},{args.radius}", scheme.value, spec))
    elif args.curve:
        curve = _curve_from_spec(args.curve)
        schemes = [SchemeId(v.strip()) for v in args.schemes.split(",")]
        for scheme in schemes:
            spec = curve_effective_spectrum(curve, scheme, args.grid, args.count)
            rows.extend(_spectral_rows(args.curve, scheme.value, spec,
                                       grid_s=args.grid))
    else:
        raise ParseError("one of --sphere or --curve is required", 0)
    cfg = RunConfig("spectrum", {
        "sphere": args.sphere, "curve": args.curve, "radius": args.radius,
        "schemes": args.schemes, "lmax": args.lmax, "grid": args.grid,
        "count": args.count,
    })
    _write_rows(SPECTRAL_COLUMNS, rows, cfg, args)
    return EXIT_OK


def cmd_thinlayer(args) -> int:
    deltas = [float(v) for v in args.deltas.split(",")]
    rows = []
    if args.annulus:
        R = float(args.annulus)
        modes = tuple(int(v) for v in args.modes.split(","))
        problem = AnnulusProblem(R=R, modes=modes)
        targets = problem.targets(SchemeId(args.scheme))
        sweep = delta_sweep(problem, deltas)
        problem_name = f"annulus:{R}"
        grid_s = ""
        grid_w = ""
    else:
        curve = _curve_from_spec(args.curve)
        problem = TubeProblem(curve=curve, count=args.count,
                              grid_s=args.grid_s, grid_w=args.grid_w)
        targets = problem.targets(SchemeId(args.scheme))
        sweep = delta_sweep(problem, deltas)
        problem_name = args.curve
        grid_s = args.grid_s
        grid_w = args.grid_w

    verdict_pass = True
    for entry, target in zip(sweep.entries, targets):
        for delta, value in zip(entry.deltas, entry.values):
            rows.append({
                "problem": problem_name, "scheme": args.scheme, "delta": delta,
                "grid_s": grid_s, "grid_w": grid_w, "mode": entry.label,
                "eigenvalue": "", "subtracted": value, "target": target,
                "gap": abs(value - target),
            })
        gap = abs(entry.extrapolated - target)
        tol = max(args.tolerance * abs(target), 5e-3)
        verdict_pass &= gap <= tol
        rows.append({
            "problem": problem_name, "scheme": args.scheme, "delta": "extrapolated",
            "grid_s": grid_s, "grid_w": grid_w, "mode": entry.label,
            "eigenvalue": "", "subtracted": entry.extrapolated, "target": target,
            "gap": gap,
        })
    cfg = RunConfig("thinlayer", {
        "curve": args.curve, "annulus": args.annulus, "deltas": args.deltas,
        "modes": args.modes, "scheme": args.scheme, "count": args.count,
        "grid_s": args.grid_s, "grid_w": args.grid_w,
        "tolerance": args.tolerance,
    })
    _write_rows(SPECTRAL_COLUMNS, rows, cfg, args)
    print(f"verdict: {'PASS' if verdict_pass else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if verdict_pass else EXIT_VERDICT


def cmd_convert_check(args) -> int:
    s = _surface_from_args(args)
    coords = list(s.coords)
    if args.point:
        points = _parse_points(args.point, s.ndim)
    else:
        points = sample_on_surface(s, args.sample, seed=args.seed)
    g_sources = []
    if args.g:
        g_sources.append(args.g)
    if args.search_g:
        # convenience scan over a tiny monomial library; not exhaustive
        g_sources.extend(["1", "+".join(f"{c}^2" for c in coords)]
                         + list(coords))
    rows = []
    residual_fn = conversion_residual_weak if args.weak else conversion_residual_strict
    mode = "weak" if args.weak else "strict"
    for g_src in g_sources:
        g = parse_field(g_src, coords)
        for idx, x in enumerate(points):
            M = residual_fn(s, g, x)
            rows.append({
                "g": g_src, "mode": mode, "point_index": idx,
                "point": ";".join(repr(float(v)) for v in x),
                "residual_max": float(np.max(np.abs(M))),
            })
    worst = max(r["residual_max"] for r in rows) if rows else float("nan")
    verdict = "SOLVABLE-AT-POINTS" if worst <= 1e-10 else "OBSTRUCTED"
    cfg = RunConfig("convert-check", {
        "surface": args.surface, "coords": args.coords, "g": args.g,
        "weak": bool(args.weak), "seed": args.seed,
        "points": [r["point"] for r in rows],
    })
    _write_rows(["g", "mode", "point_index", "point", "residual_max"],
                rows, cfg, args)
    print(f"verdict: {verdict} (max residual {worst!r})", file=sys.stderr)
    return EXIT_OK


def cmd_project(args) -> int:
    s = _surface_from_args(args)
    points = _parse_points(args.point, s.ndim)
    rows = []
    for idx, x in enumerate(points):
        y, dist = closest_point(s, x)
        rows.append({
            "point_index": idx,
            "point": ";".join(repr(float(v)) for v in x),
            "projected": ";".join(repr(float(v)) for v in y),
            "distance": dist,
            "residual": s.value(y),
        })
    cfg = RunConfig("project", {
        "surface": args.surface, "coords": args.coords,
        "points": [r["point"] for r in rows],
    })
    _write_rows(["point_index", "point", "projected", "distance", "residual"],
                rows, cfg, args)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser wiring
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="qgeom",
                     description="curved-submanifold quantization workbench")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("potential", parents=[], help="quantum potentials per scheme")
    p.add_argument("--surface", action="append")
    p.add_argument("--coords")
    p.add_argument("--point", action="append", default=[])
    p.add_argument("--sample", type=int, default=8)
    p.add_argument("--schemes", default="dirac_raw")
    p.add_argument("--project", action="store_true")
    p.add_argument("--normalize-distance", action="store_true",
                   help="route dirac schemes through projected curvatures")
    p.add_argument("--hbar", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("brackets", help="Dirac bracket tables at a phase point")
    p.add_argument("--surface", action="append")
    p.add_argument("--coords")
    p.add_argument("--x", required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--project", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_brackets)

    p = sub.add_parser("spectrum", help="analytic sphere ladders / curve operators")
    p.add_argument("--sphere", type=int, default=None)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--curve", default=None)
    p.add_argument("--schemes", default="podolsky")
    p.add_argument("--lmax", type=int, default=4)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--count", type=int, default=8)
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("thinlayer", help="thin-layer sweeps vs effective theory")
    p.add_argument("--curve", default=None)
    p.add_argument("--annulus", default=None)
    p.add_argument("--modes", default="0,1,2,3")
    p.add_argument("--deltas", required=True)
    p.add_argument("--scheme", default="curve")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--grid-s", type=int, default=256)
    p.add_argument("--grid-w", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=0.02)
    _add_common(p)
    p.set_defaults(func=cmd_thinlayer)

    p = sub.add_parser("convert-check", help="constraint-conversion residuals")
    p.add_argument("--surface", action="append")
    p.add_argument("--coords")
    p.add_argument("--g", default=None)
    p.add_argument("--weak", action="store_true")
    p.add_argument("--search-g", action="store_true",
                   help="also scan a small monomial library for g (not exhaustive)")
    p.add_argument("--point", action="append", default=[])
    p.add_argument("--sample", type=int, default=8)
    _add_common(p)
    p.set_defaults(func=cmd_convert_check)

    p = sub.add_parser("project", help="closest-point projection")
    p.add_argument("--surface", action="append")
    p.add_argument("--coords")
    p.add_argument("--point", action="append", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_project)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except (ParseError, FileNotFoundError, ValueError) as exc:
        print(f"qgeom: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormMismatch, SingularConstraintMatrix, OffSurface, DegenerateGradient,
            NotDistanceNormalized, QgeomError) as exc:
        print(f"qgeom: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``juliapprox {nodes,lebesgue,approximate,rates,render}``.

Exit codes: 0 ok, 2 configuration error, 3 precondition failure, 4 certification
failure. Errors are printed to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import geometry as geo
from .dynamics import PreconditionNotMet, approximate, effective_escape_radius, filled_julia_raster, write_pgm
from .lagrange import deltas, diagnostic_row, write_diagnostics_csv
from .metrics import gamma_rate_table, write_rate_csv
from .nodes import (
    AffineMap,
    EdreiViolation,
    NodeArray,
    UnsupportedMap,
    circle_leja,
    conformal_image_nodes,
    discrete_fekete,
    exterior_map_for,
    pseudo_leja,
    separation_rho,
    sigma_table,
    write_nodes_csv,
)
from .poly import ComplexPoly
from .potential import HolderData, capacity, default_green

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_CERTIFICATE = 0, 2, 3, 4
FAMILIES = ("pseudo_leja", "circle_leja", "conformal", "fekete", "equispaced")


class ConfigError(ValueError):
    pass


def _load_json_arg(text):
    if text is None:
        return None
    if isinstance(text, (dict, list)):
        return text
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc


def parse_set(text) -> geo.PlanarSet:
    d = _load_json_arg(text)
    if d is None:
        raise ConfigError("a set descriptor (--set) is required")
    return geo.from_json(d)


def _int_list(text):
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def _positive(name, v):
    if v is not None and not v > 0:
        raise ConfigError(f"{name} must be positive")


def make_nodes(E, green, n, family, C_target=2.0):
    """Node array of ``n + 1`` points for the requested family."""
    if n < 1:
        raise ConfigError("n must be at least 1 (two or more nodes)")
    if family == "pseudo_leja":
        return pseudo_leja(E, green, n, C_target)
    if family == "fekete":
        return discrete_fekete(E, n)
    if family == "circle_leja":
        base = circle_leja(n)
        if isinstance(E, geo.Disk):
            return NodeArray(AffineMap(E.center, E.radius)(base.points), "CircleLeja",
                             base.edrei, None, base.markov, dict(base.flags))
        return conformal_image_nodes(exterior_map_for(E), n)
    if family == "conformal":
        return conformal_image_nodes(exterior_map_for(E), n)
    if family == "equispaced":
        if isinstance(E, geo.Segment):
            t = np.linspace(0.0, 1.0, n + 1)
            pts = E.a + t * (E.b - E.a)
        else:
            pts = E.boundary_sample(n + 1).points[: n + 1]
        return NodeArray(np.asarray(pts, dtype=complex), "Equispaced")
    raise ConfigError(f"unknown node family {family!r}")


# -- subcommands ---------------------------------------------------------------


def cmd_nodes(a):
    E = parse_set(a.set)
    green = default_green(E)
    nodes = make_nodes(E, green, a.n, a.family, a.C_target)
    cap = capacity(green)
    sig = sigma_table(nodes, cap) if nodes.edrei.size else None
    rho_ok = None
    if a.rho and nodes.n >= 1:
        rho_ok = []
        for k in range(1, nodes.n + 1):
            rep = separation_rho(nodes.prefix(k), green, k, E.anchor())
            rho_ok.append(rep.violations == 0)
    out = a.out or "nodes.csv"
    write_nodes_csv(nodes, out, sig, rho_ok)
    summary = {
        "command": "nodes", "out": out, "rows": nodes.n + 1, "family": a.family,
        "max_realized_C": float(np.max(nodes.edrei)) if nodes.edrei.size else None,
        "sigma_violations": None if sig is None else int(sum(not r.ok for r in sig)),
        "rho_violations": None if rho_ok is None else int(sum(not v for v in rho_ok)),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_lebesgue(a):
    E = parse_set(a.set)
    green = default_green(E)
    cap = capacity(green)
    ns = _int_list(a.n_list)
    rows = []
    for n in ns:
        nodes = make_nodes(E, green, n, a.family, a.C_target)
        mesh = E.boundary_sample(max(a.mesh, 64 * (n + 1)))
        rows.append(diagnostic_row(deltas(nodes.points), mesh, cap))
    out = a.out or "lebesgue.csv"
    write_diagnostics_csv(rows, out)
    print(json.dumps({"command": "lebesgue", "out": out, "rows": len(rows)}, sort_keys=True))
    return EXIT_OK


def cmd_approximate(a):
    E = parse_set(a.set)
    _positive("eps", a.eps)
    if a.eps > 1:
        raise ConfigError("eps must lie in (0, 1]")
    ja = approximate(E, a.eps, n=a.n, family=a.family or "auto", cap=a.cap,
                     resolution=a.resolution if a.pgm else None, samples=a.samples,
                     seed=a.seed, C_target=a.C_target)
    doc = ja.to_json()
    doc["window"] = [float(v) for v in ja.window]
    text = json.dumps(doc, indent=2, sort_keys=True)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if a.pgm:
        write_pgm(ja.raster, a.pgm)
    return EXIT_OK if ja.certificate["passed"] else EXIT_CERTIFICATE


def cmd_rates(a):
    E = parse_set(a.set)
    override = None
    if a.holder_A is not None or a.holder_alpha is not None:
        if a.holder_A is None or a.holder_alpha is None:
            raise ConfigError("--holder-A and --holder-alpha go together")
        _positive("holder-A", a.holder_A)
        if not 0 < a.holder_alpha <= 1:
            raise ConfigError("holder-alpha must lie in (0, 1]")
        override = HolderData(a.holder_A, a.holder_alpha, "override")
    rows = gamma_rate_table(E, _int_list(a.n_list), holder_override=override,
                            resolution=a.resolution, cap=a.cap, seed=a.seed)
    out = a.out or "rates.csv"
    write_rate_csv(rows, out)
    print(json.dumps({"command": "rates", "out": out, "rows": len(rows),
                      "all_pass": all(r.passed for r in rows),
                      "errors": [r.error for r in rows if r.error]}, sort_keys=True))
    return EXIT_OK


def cmd_render(a):
    if a.poly is not None:
        P = ComplexPoly.from_json(_load_json_arg(a.poly))
    elif a.set is not None:
        E = parse_set(a.set)
        ja = approximate(E, a.eps, n=a.n, family=a.family or "auto", cap=a.cap,
                         resolution=None, samples=a.samples, seed=a.seed)
        P = ja.P
    else:
        raise ConfigError("render needs --poly or --set")
    if P.degree < 2:
        raise ConfigError("polynomial degree must be at least 2")
    R = effective_escape_radius(P)
    if a.window is None:
        window = (-1.05 * R, 1.05 * R, -1.05 * R, 1.05 * R)
    else:
        window = tuple(float(v) for v in str(a.window).split(","))
        if len(window) != 4 or window[0] >= window[1] or window[2] >= window[3]:
            raise ConfigError("window must be xmin,xmax,ymin,ymax")
        if window[0] > -R or window[1] < R or window[2] > -R or window[3] < R:
            warnings.warn("window expanded to cover the escape disk", RuntimeWarning)
            window = (min(window[0], -R), max(window[1], R), min(window[2], -R), max(window[3], R))
    r = filled_julia_raster(P, window, a.resolution, a.cap, warn_window=False)
    out = a.out or "julia.pgm"
    write_pgm(r, out)
    print(json.dumps({"command": "render", "out": out, "window": list(window),
                      "bounded_area": r.bounded_area()}, sort_keys=True))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="juliapprox", formatter_class=fmt,
                                description="Interpolation nodes and filled Julia set approximation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file whose keys override the flags")
        sp.add_argument("--set", help="set descriptor: JSON text or a path to a JSON file")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--seed", type=int, default=0, help="seed for sample placement")
        sp.add_argument("--cap", type=int, default=1000, help="iteration cap")

    sp = sub.add_parser("nodes", formatter_class=fmt, help="node CSV with separation diagnostics")
    common(sp)
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--family", choices=FAMILIES, default="pseudo_leja")
    sp.add_argument("--C-target", dest="C_target", type=float, default=2.0)
    sp.add_argument("--no-rho", dest="rho", action="store_false", help="skip the level-curve separation check")
    sp.set_defaults(func=cmd_nodes)

    sp = sub.add_parser("lebesgue", formatter_class=fmt, help="Lebesgue / Delta diagnostics CSV")
    common(sp)
    sp.add_argument("--n-list", default="8,16,32,64")
    sp.add_argument("--family", choices=FAMILIES, default="pseudo_leja")
    sp.add_argument("--C-target", dest="C_target", type=float, default=2.0)
    sp.add_argument("--mesh", type=int, default=4096, help="minimum evaluation mesh size")
    sp.set_defaults(func=cmd_lebesgue)

    sp = sub.add_parser("approximate", formatter_class=fmt, help="build and certify P_n")
    common(sp)
    sp.add_argument("--eps", type=float, default=0.5)
    sp.add_argument("--n", type=int, default=None, help="degree parameter (default: smallest valid)")
    sp.add_argument("--family", choices=("auto",) + FAMILIES[:4], default="auto")
    sp.add_argument("--C-target", dest="C_target", type=float, default=2.0)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--resolution", type=int, default=512)
    sp.add_argument("--pgm", help="also write a raster of K(P)")
    sp.set_defaults(func=cmd_approximate)

    sp = sub.add_parser("rates", formatter_class=fmt, help="measured Gamma/chi against the rate bounds")
    common(sp)
    sp.add_argument("--n-list", default="16,32,64,128")
    sp.add_argument("--resolution", type=int, default=512)
    sp.add_argument("--holder-A", dest="holder_A", type=float, default=None)
    sp.add_argument("--holder-alpha", dest="holder_alpha", type=float, default=None)
    sp.set_defaults(func=cmd_rates)

    sp = sub.add_parser("render", formatter_class=fmt, help="P5 raster of a filled Julia set")
    common(sp)
    sp.add_argument("--poly", help="ascending coefficients [[re, im], ...] (JSON or file)")
    sp.add_argument("--eps", type=float, default=0.5, help="with --set: construct P_n first")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--family", choices=("auto",) + FAMILIES[:4], default="auto")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--window", help="xmin,xmax,ymin,ymax (default: escape disk)")
    sp.add_argument("--resolution", type=int, default=512)
    sp.set_defaults(func=cmd_render)
    # the defaults formatter only annotates arguments that carry help text
    for sp in sub.choices.values():
        for act in sp._actions:
            if act.help is None:
                act.help = act.dest.replace("_", " ")
    return p


def _apply_config(args):
    if not args.config:
        return args
    cfg = _load_json_arg(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for k, v in cfg.items():
        key = k.replace("-", "_")
        if key in ("command", "func", "config"):
            continue
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {k!r}")
        setattr(args, key, v)
    return args


def _error(code, exc, **extra):
    doc = {"error": str(exc), "type": type(exc).__name__, "exit_code": code}
    doc.update(extra)
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        for name in ("cap", "samples", "resolution"):
            _positive(name, getattr(args, name, None))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = args.func(args)
        for w in caught:
            print(json.dumps({"warning": str(w.message), "type": w.category.__name__}),
                  file=sys.stderr)
        return code
    except PreconditionNotMet as exc:
        return _error(EXIT_PRECONDITION, exc, failing_conditions=exc.failing)
    except (ConfigError, geo.InvalidSet, geo.OriginNotInterior, UnsupportedMap,
            EdreiViolation, ValueError, OSError) as exc:
        return _error(EXIT_CONFIG, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Polynomial iteration, filled Julia rasters and the Julia-set construction.

The construction builds ``P_n(z) = z exp(-n s/3) Q_n(z)`` where ``Q_n`` is a
fundamental Lagrange polynomial for nodes on the (possibly enlarged and
translated) set, checks the four sufficient conditions

1. ``omega(1/n^2) < s``
2. ``B_n + omega(1/n^2) <= s/3`` with ``B_n = (3/n) log[(n+1) Theta]``
3. ``exp(n s/3) > (R + 1)/r``
4. ``exp(-n s/3) ||Q_n|| <= r/(R + 1)``

and certifies ``E in K(P_n) in E_s`` on samples.
"""
from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .geometry import Disk, PlanarSet
from .lagrange import deltas, norm_Ln
from .nodes import NodeArray, conformal_image_nodes, discrete_fekete, exterior_map_for, pseudo_leja
from .poly import ComplexPoly, effective_escape_radius, escape_radius
from .potential import (
    DiskGreen,
    GreenModel,
    HolderData,
    default_green,
    holder_fit,
    modulus_bound,
    sublevel_boundary,
    sublevel_set,
)

__all__ = [
    "ComplexPoly", "escape_radius", "effective_escape_radius", "bounded_orbit",
    "escape_time", "attracting_traps", "filled_julia_raster", "Raster", "write_pgm",
    "rate_s_general", "rate_s_fekete", "t_n", "B_n", "check_conditions",
    "build_Pn", "build_with_shift", "certify_inclusions", "approximate", "JuliaApprox",
    "PreconditionNotMet", "SetData", "set_data",
]


class PreconditionNotMet(RuntimeError):
    """Raised when some of conditions (1)-(4) fail; ``failing`` lists their numbers."""

    def __init__(self, failing, conditions=None, msg=None):
        self.failing = list(failing)
        self.conditions = conditions or []
        super().__init__(msg or f"n too small: conditions {self.failing} fail")


def thread_count() -> int:
    env = os.environ.get("JULIA_APPROX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


# -- iteration -----------------------------------------------------------------


@dataclass(frozen=True)
class OrbitResult:
    bounded: bool
    k: int | None  # first index with |z_k| > R, None when bounded at the cap
    cap: int


def escape_time(P: ComplexPoly, z, cap: int = 1000, traps=(), R: float | None = None):
    """First ``k`` with ``|P^k(z)| > R`` (escape is then certain), ``-1`` if bounded.

    ``R`` defaults to the effective escape radius. Orbits entering a trap disk
    ``(c, rho)`` with ``P(D(c, rho)) in D(c, rho)`` count as bounded.
    """
    z0 = np.asarray(z, dtype=complex)
    flat = z0.ravel().copy()
    R = effective_escape_radius(P) if R is None else R
    k = np.full(flat.size, -1, dtype=np.int64)
    idx = np.arange(flat.size)
    cur = flat
    for it in range(cap + 1):
        esc = ~(np.abs(cur) <= R)  # nan/inf count as escaped
        k[idx[esc]] = it
        keep = ~esc
        for c, rho in traps:
            keep &= np.abs(cur - c) > rho
        idx, cur = idx[keep], cur[keep]
        if idx.size == 0 or it == cap:
            break
        cur = P.iterate_step(cur)
    return k.reshape(z0.shape)


def bounded_orbit(P: ComplexPoly, z, cap: int = 1000, traps=()) -> OrbitResult:
    k = int(escape_time(P, np.array([z]), cap, traps)[0])
    return OrbitResult(k < 0, None if k < 0 else k, cap)


def attracting_traps(P: ComplexPoly, samples: int | None = None):
    """Disks around attracting fixed points mapped into their half-size concentric disk.

    The image of a disk is bounded by the maximum over its circle; the check
    is sampled at ``max(256, 16 deg P)`` points with a factor-2 margin.
    """
    d = P.degree
    c = P.scaled_coeffs().astype(complex)
    c[1] = c[1] - 1.0
    if d > 1:
        fixed = np.roots(c[::-1])
    else:
        return []
    dP = P.derivative()
    R = effective_escape_radius(P)
    m = samples or max(256, 16 * d)
    circ = np.exp(2j * math.pi * np.arange(m) / m)
    traps = []
    for f in fixed:
        if not np.isfinite(f) or abs(f) > R:
            continue
        # one Newton polish of P(z) - z
        with np.errstate(all="ignore"):
            step = (P(np.array([f]))[0] - f) / (dP(np.array([f]))[0] - 1.0)
        if np.isfinite(step):
            f = f - step
        if not abs(dP(np.array([f]))[0]) < 1:
            continue
        rho = R
        for _ in range(60):
            with np.errstate(all="ignore"):
                img = np.abs(P.iterate_step(f + rho * circ) - f)
            if np.all(img <= 0.5 * rho):
                traps.append((complex(f), float(rho)))
                break
            rho *= 0.5
    return traps


@dataclass
class Raster:
    """Per-pixel orbit classification on a pixel-centre grid.

    ``bounded[iy, ix]`` refers to the point ``x[ix] + 1j * y[iy]``.
    """

    bounded: np.ndarray
    boundary: np.ndarray
    window: tuple
    x: np.ndarray
    y: np.ndarray

    @property
    def pixel(self):
        return (self.x[1] - self.x[0], self.y[1] - self.y[0])

    @property
    def pixel_area(self):
        dx, dy = self.pixel
        return dx * dy

    def bounded_area(self):
        return float(self.bounded.sum()) * self.pixel_area

    def points(self, mask=None):
        mask = self.bounded if mask is None else mask
        iy, ix = np.nonzero(mask)
        return self.x[ix] + 1j * self.y[iy]

    def gray(self):
        g = np.zeros(self.bounded.shape, dtype=np.uint8)
        g[self.bounded] = 255
        g[self.boundary] = 128
        return g


def _boundary_mask(b):
    esc = ~b
    nb = np.zeros_like(b)
    nb[1:, :] |= esc[:-1, :]
    nb[:-1, :] |= esc[1:, :]
    nb[:, 1:] |= esc[:, :-1]
    nb[:, :-1] |= esc[:, 1:]
    return b & nb


def filled_julia_raster(P: ComplexPoly, window, resolution=512, cap: int = 1000,
                        traps=None, threads: int | None = None,
                        warn_window: bool = True) -> Raster:
    """Escape-time raster of ``K(P)`` over ``window = (xmin, xmax, ymin, ymax)``.

    A window that misses part of the escape disk is allowed (the part of
    ``K(P)`` outside it is simply not drawn) but triggers a warning.
    """
    if P.degree < 2:
        raise ValueError("filled Julia sets need degree >= 2")
    xmin, xmax, ymin, ymax = map(float, window)
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    R = effective_escape_radius(P)
    if warn_window and (xmin > -R or xmax < R or ymin > -R or ymax < R):
        warnings.warn("raster window does not cover the escape disk", RuntimeWarning,
                      stacklevel=2)
    x = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    y = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    if traps is None:
        traps = attracting_traps(P)
    threads = threads or thread_count()
    rows = max(1, ny // (4 * threads))
    chunks = [(a, min(ny, a + rows)) for a in range(0, ny, rows)]

    def work(ab):
        a, b = ab
        zz = x[None, :] + 1j * y[a:b, None]
        return escape_time(P, zz, cap, traps, R) < 0

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    bounded = np.vstack(parts)
    return Raster(bounded, _boundary_mask(bounded), (xmin, xmax, ymin, ymax), x, y)


def write_pgm(raster: Raster, path):
    """Binary PGM (P5): 0 escaped, 255 bounded, 128 boundary; top row is max y."""
    g = raster.gray()[::-1]
    h, w = g.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(g.tobytes())


# -- rates and conditions ------------------------------------------------------


def t_n(holder: HolderData, diam: float, n: int) -> float:
    """``3A/n^(2 alpha) + (9/n) log(n+1) + (3/n) log(diam + 2)``."""
    return (3 * holder.A / n ** (2 * holder.alpha) + 9.0 / n * math.log(n + 1)
            + 3.0 / n * math.log(diam + 2))


def rate_s_general(holder: HolderData, diam: float, n: int, normQ: float,
                   R: float, r: float) -> float:
    """``s_n = max(t_n, (6/n) log ||Q_n||, (6/n) log((R + 1)/r))``."""
    if not r > 0:
        raise geo.OriginNotInterior("0 must be an interior point")
    return max(t_n(holder, diam, n), 6.0 / n * math.log(normQ), 6.0 / n * math.log((R + 1) / r))


def rate_s_fekete(holder: HolderData, diam: float, n: int):
    """``(s_n, tau_n)`` for Fekete nodes:

    ``s_n = 3A/n^(2 alpha) + (9/n) log(n+1) + (3/n) log(diam + 3)`` and
    ``tau_n = (3/n)(log(n+1) - log(diam + 3))``.
    """
    s = (3 * holder.A / n ** (2 * holder.alpha) + 9.0 / n * math.log(n + 1)
         + 3.0 / n * math.log(diam + 3))
    tau = 3.0 / n * (math.log(n + 1) - math.log(diam + 3))
    return s, tau


def B_n(n: int, theta: float) -> float:
    """``(3/n) log[(n+1) Theta]``, the upper bracket of the Lagrange/Green comparison."""
    return 3.0 / n * math.log((n + 1) * theta)


@dataclass(frozen=True)
class Condition:
    index: int
    lhs: float
    rhs: float
    ok: bool


def check_conditions(n: int, s: float, holder: HolderData, theta: float, R: float,
                     r: float, normQ: float):
    """Evaluate conditions (1)-(4); logs are compared to avoid overflow."""
    om = float(modulus_bound(holder, 1.0 / n**2))
    bn = B_n(n, theta)
    out = [
        Condition(1, om, s, om < s),
        Condition(2, bn + om, s / 3, bn + om <= s / 3),
        Condition(3, n * s / 3, math.log((R + 1) / r), n * s / 3 > math.log((R + 1) / r)),
        Condition(4, -n * s / 3 + math.log(normQ), math.log(r / (R + 1)),
                  -n * s / 3 + math.log(normQ) <= math.log(r / (R + 1))),
    ]
    return out


# -- construction --------------------------------------------------------------


@dataclass
class SetData:
    """A set with its Green model, Hoelder data and a boundary mesh."""

    E: PlanarSet
    green: GreenModel
    holder: HolderData
    mesh: geo.BoundaryMesh


def set_data(E: PlanarSet, green=None, holder=None, m: int = 4096) -> SetData:
    green = default_green(E) if green is None else green
    mesh = E.boundary_sample(m)
    if holder is None:
        holder = holder_fit(green, mesh, E)
    return SetData(E, green, holder, mesh)


@dataclass
class JuliaApprox:
    """A constructed polynomial with the data it was built from.

    Coordinates are those of the translated set when ``shift != 0``: the
    approximated set is ``E - shift`` (``shift`` is the point ``w`` of the
    original set moved to the origin).
    """

    P: ComplexPoly
    s: float
    n: int
    eps: float | None
    nodes: NodeArray
    j: int
    normQ: float
    W: PlanarSet
    conditions: list
    step: str = "I"
    shift: complex = 0j
    s_total: float | None = None
    s_offset: float = 0.0
    window: tuple | None = None
    raster: Raster | None = None
    certificate: dict | None = None
    notes: list = field(default_factory=list)
    target: SetData | None = None

    @property
    def degree(self):
        return self.P.degree

    def to_json(self):
        return {
            "n": self.n,
            "degree": self.P.degree,
            "s": self.s,
            "s_total": self.s_total,
            "eps": self.eps,
            "step": self.step,
            "translation": [self.shift.real, self.shift.imag],
            "j": self.j,
            "norm_Q": self.normQ,
            "polynomial": self.P.to_json(),
            "roots": [[float(r.real), float(r.imag)] for r in self.P.get_roots()],
            "conditions": [
                {"index": c.index, "lhs": c.lhs, "rhs": c.rhs, "ok": bool(c.ok)}
                for c in self.conditions
            ],
            "notes": list(self.notes),
            "certificate": self.certificate,
        }


def _q_norm(sys, j, W: PlanarSet, n: int):
    mesh = W.boundary_sample(max(4096, 16 * (n + 1)))
    return norm_Ln(sys, mesh, j)[0]


def build_Pn(W: PlanarSet, nodes: NodeArray, s: float, holder: HolderData,
             fekete: bool = False, check: bool = True) -> JuliaApprox:
    """``P_n(z) = z exp(-n s/3) L^(j)(z)`` for nodes on ``W`` (``0`` interior to ``W``).

    ``j = 0`` for Fekete nodes (ordered so slot 0 has the smallest
    ``|Delta|``), otherwise the ``j_n`` of the node system. The scale factor
    lives in the polynomial's log scale, so nothing underflows.
    """
    n = nodes.n
    sys = deltas(nodes.points)
    j = 0 if fekete else sys.j_n
    r = W.inner_radius()
    R = W.outer_radius()
    normQ = _q_norm(sys, j, W, n)
    conds = check_conditions(n, s, holder, geo.theta(W), R, r, normQ)
    failing = [c.index for c in conds if not c.ok]
    if check and failing:
        raise PreconditionNotMet(failing, conds)
    roots = np.concatenate([[0j], np.delete(sys.nodes, j)])
    lead_phase = np.conj(sys.phase_delta[j])
    P = ComplexPoly.from_roots(roots, lead=lead_phase,
                               log_scale=-n * s / 3.0 - float(sys.log_delta[j]))
    ja = JuliaApprox(P, s, n, None, nodes, j, normQ, W, conds)
    ja.s_total = s
    return ja


def _sample_set(E: PlanarSet, m: int, rng):
    half = m // 2
    b = E.boundary_sample(max(8, m - half)).points
    inner = E.interior_sample(half, rng)
    return np.concatenate([b[: m - half], inner])


def certify_inclusions(ja: JuliaApprox, E: PlanarSet, green: GreenModel, samples: int = 1000,
                       seed: int = 0, cap: int = 1000, margin: float = 0.01,
                       s_level: float | None = None) -> dict:
    """Sample checks of ``E in K(P)`` and ``K(P) in E_s``.

    (a) samples of ``E`` have bounded orbits; (b) one step maps them into
    ``D(0, r(W))``; (c) samples of ``{g_E = s (1 + margin)}`` escape.
    """
    rng = np.random.default_rng(seed)
    P = ja.P
    s = ja.s_total if s_level is None else s_level
    traps = attracting_traps(P)
    zE = _sample_set(E, samples, rng)
    ka = escape_time(P, zE, cap, traps)
    fail_a = np.flatnonzero(ka >= 0)
    r = ja.W.inner_radius()
    img = np.abs(P(zE))
    fail_b = np.flatnonzero(~(img < r))
    level = s * (1 + margin)
    anchor = E.anchor() if not isinstance(green, DiskGreen) else green.center
    zc = sublevel_boundary(green, level, samples, anchor=anchor).points
    kc = escape_time(P, zc, cap, traps)
    fail_c = np.flatnonzero(kc < 0)

    def pts(z, ii):
        return [[float(z[i].real), float(z[i].imag)] for i in ii[:20]]

    checks = [
        {"name": "E_bounded", "passed": bool(fail_a.size == 0), "samples": int(zE.size),
         "failures": pts(zE, fail_a), "n_failures": int(fail_a.size)},
        {"name": "one_step_into_inner_disk", "passed": bool(fail_b.size == 0),
         "samples": int(zE.size), "radius": float(r), "failures": pts(zE, fail_b),
         "n_failures": int(fail_b.size)},
        {"name": "level_curve_escapes", "passed": bool(fail_c.size == 0),
         "samples": int(zc.size), "level": float(level), "failures": pts(zc, fail_c),
         "n_failures": int(fail_c.size)},
    ]
    return {
        "checks": checks,
        "samples": int(samples),
        "cap": int(cap),
        "margin": margin,
        "failures": [c["name"] for c in checks if not c["passed"]],
        "passed": all(c["passed"] for c in checks),
    }


def sublevel_radius_for_eps(E: PlanarSet, green: GreenModel, eps: float,
                            safety: float = 0.99, m: int = 2048) -> float:
    """Largest ``s`` with ``max dist(boundary of E_s, E) <= safety * eps``.

    Bisection on a coarse trace of the level curve, then a check on ``m``
    points that backs off by 1% steps if the fine trace overshoots.
    """
    if isinstance(green, DiskGreen) and isinstance(E, Disk):
        return math.log1p(safety * eps / green.radius)
    anchor = E.anchor()

    def excess(s, k):
        pts = sublevel_boundary(green, s, k, anchor=anchor).points
        return float(np.max(E.dist(pts)))

    lo, hi = 0.0, 1.0
    while excess(hi, 256) <= safety * eps:
        lo, hi = hi, 2 * hi
    while hi - lo > 1e-4 * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid, 256) <= safety * eps:
            lo = mid
        else:
            hi = mid
    while lo > 0 and excess(lo, m) > safety * eps:
        lo *= 0.99
    return lo


def _window_for(green: GreenModel, s: float, anchor, pad: float = 0.1):
    pts = sublevel_boundary(green, s, 1024, anchor=anchor).points
    x0, x1 = pts.real.min(), pts.real.max()
    y0, y1 = pts.imag.min(), pts.imag.max()
    w = max(x1 - x0, y1 - y0)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    h = 0.5 * w * (1 + 2 * pad)
    return (cx - h, cx + h, cy - h, cy + h)


def make_nodes(W: PlanarSet, green: GreenModel, n: int, family: str, C_target: float = 2.0):
    if family == "fekete":
        return discrete_fekete(W, n), True
    if family == "pseudo_leja":
        return pseudo_leja(W, green, n, C_target), False
    if family == "conformal":
        return conformal_image_nodes(exterior_map_for(W), n), False
    raise ValueError(f"unknown node family {family!r}")


def build_with_shift(E: PlanarSet, s: float, n: int | None = None, family: str = "auto",
                     green: GreenModel | None = None, holder: HolderData | None = None,
                     C_target: float = 2.0, n_max: int = 2048) -> tuple[JuliaApprox, SetData]:
    """Run the construction so that ``E in K(P) in E_s``.

    Step III: translate when ``0`` is not in ``E``. Step II: when ``0`` is
    not interior, build on ``W = E_{s/2}`` with rate ``s/2`` (the Hoelder
    constants of ``W`` are those of ``E``). Step I: build on ``E`` itself.
    Without ``n`` the smallest value satisfying conditions (1)-(4) is
    searched by doubling and then bisection; a given ``n`` must satisfy
    them. Returns the construction and the (translated) target set data.
    """
    green = default_green(E) if green is None else green
    notes = []
    shift = 0j
    if not bool(E.contains(0j)):
        a = E.anchor()
        shift = a if bool(E.contains(a)) else complex(E.boundary_sample(8).points[0])
        E = E.translate(-shift)
        green = green.translate(-shift)
        notes.append(f"translated by ({-shift.real:.17g}, {-shift.imag:.17g}) so that 0 lies in the set")
    sd = set_data(E, green, holder)
    try:
        r0 = E.inner_radius()
    except geo.OriginNotInterior:
        r0 = 0.0
    if r0 > 0:
        W, W_green, s_W, offset, step = E, green, s, 0.0, "I"
    else:
        offset = s_W = s / 2
        W = sublevel_set(E, green, offset)
        W_green = default_green(W)
        step = "II"
        notes.append("nodes on E_{s/2} level curve")
    if shift != 0:
        step = "III"
    if family == "auto":
        family = "fekete" if isinstance(W, Disk) else "pseudo_leja"
    fekete = family == "fekete"
    theta = geo.theta(W)
    rW, RW = W.inner_radius(), W.outer_radius()
    cache = {}

    def nodes_for(k):
        if family == "pseudo_leja":
            big = cache.get("seq")
            if big is None or big.n < k:
                size = max(k, 256) if big is None else max(k, 2 * big.n)
                cache["seq"] = pseudo_leja(W, W_green, size, C_target)
            return cache["seq"].prefix(k)
        if k not in cache:
            cache[k] = make_nodes(W, W_green, k, family, C_target)[0]
        return cache[k]

    def conditions(k):
        nd = nodes_for(k)
        sys = deltas(nd.points)
        j = 0 if fekete else sys.j_n
        nq = _q_norm(sys, j, W, k)
        return check_conditions(k, s_W, sd.holder, theta, RW, rW, nq)

    def ok(k):
        return all(c.ok for c in conditions(k))

    if n is None:
        k = 4
        while not ok(k):
            if k >= n_max:
                conds = conditions(k)
                raise PreconditionNotMet([c.index for c in conds if not c.ok], conds,
                                         f"no n <= {n_max} satisfies conditions (1)-(4)")
            k *= 2
        lo, hi = k // 2, k
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        n = hi
    ja = build_Pn(W, nodes_for(n), s_W, sd.holder, fekete=fekete)
    ja.step = step
    ja.shift = shift
    ja.s_offset = offset
    ja.s_total = offset + s_W
    ja.notes = notes + [f"node family: {family}"]
    return ja, sd


def approximate(E: PlanarSet, eps: float, n: int | None = None, family: str = "auto",
                green: GreenModel | None = None, holder: HolderData | None = None,
                C_target: float = 2.0, cap: int = 1000, resolution: int | None = 512,
                samples: int = 1000, seed: int = 0, n_max: int = 2048) -> JuliaApprox:
    """Build ``P`` with ``E in K(P) in E_s in E^eps``, certify it and rasterize ``K(P)``.

    ``s`` is the largest sublevel whose boundary stays within ``0.99 eps``
    of ``E``. All outputs are in translated coordinates when a shift was
    needed (``ja.shift``).
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    green = default_green(E) if green is None else green
    s = sublevel_radius_for_eps(E, green, eps)
    ja, sd = build_with_shift(E, s, n, family, green, holder, C_target, n_max)
    ja.eps = eps
    ja.target = sd
    ja.certificate = certify_inclusions(ja, sd.E, sd.green, samples, seed, cap)
    ja.window = _window_for(sd.green, ja.s_total * 1.05, sd.E.anchor())
    if resolution:
        ja.raster = filled_julia_raster(ja.P, ja.window, resolution, cap, warn_window=False)
    return ja


def conjugate_back(P: ComplexPoly, shift: complex) -> ComplexPoly:
    """``z -> P(z - shift) + shift``: the polynomial in original coordinates."""
    return P.conjugate_by_translation(shift)


def certificate_json(ja: JuliaApprox) -> str:
    return json.dumps(ja.to_json(), indent=2, sort_keys=True)

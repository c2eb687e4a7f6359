"""Hausdorff and Klimek distances, the Lojasiewicz-Siciak bridge and rate tables."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .dynamics import (
    JuliaApprox,
    attracting_traps,
    build_Pn,
    filled_julia_raster,
    rate_s_fekete,
    rate_s_general,
    _window_for,
    _q_norm,
)
from .geometry import Disk, PlanarSet
from .lagrange import deltas
from .nodes import discrete_fekete, pseudo_leja
from .potential import (
    DynamicalGreen,
    HolderData,
    LSData,
    default_green,
    holder_fit,
    ls_bound_data,
    modulus_bound,
    sublevel_set,
)


class NestingViolated(ValueError):
    pass


def _pts(m):
    return np.asarray(getattr(m, "points", m), dtype=complex).ravel()


def directed_hausdorff(A, B) -> float:
    """``max_{a in A} min_{b in B} |a - b|`` over point clouds."""
    a, b = _pts(A), _pts(B)
    tree = cKDTree(np.column_stack([b.real, b.imag]))
    d, _ = tree.query(np.column_stack([a.real, a.imag]))
    return float(np.max(d))


def hausdorff(A, B, with_error: bool = False):
    """Symmetric Hausdorff distance between two meshes.

    With ``with_error`` also returns the discretization error bound, the sum
    of the mesh spacings (0 for bare point arrays).
    """
    if _pts(A).size == 0 or _pts(B).size == 0:
        raise ValueError("meshes must be nonempty")
    h = max(directed_hausdorff(A, B), directed_hausdorff(B, A))
    if with_error:
        return h, float(getattr(A, "spacing", 0.0)) + float(getattr(B, "spacing", 0.0))
    return h


def klimek(greenA, greenB, meshA, meshB) -> float:
    """``max(||g_A||_B, ||g_B||_A)`` with the sup norms taken on the meshes."""
    gA = float(np.max(greenA(_pts(meshB))))
    gB = float(np.max(greenB(_pts(meshA))))
    return max(gA, gB, 0.0)


def ls_chi_bound(ls: LSData, gamma: float, inner=None, outer: PlanarSet | None = None) -> float:
    """``(gamma / B) ** (1 / beta)``; checks ``inner in outer`` on samples when given."""
    if inner is not None and outer is not None:
        pts = _pts(inner)
        bad = ~np.asarray(outer.contains(pts))
        if np.any(bad):
            raise NestingViolated(f"{int(bad.sum())} samples of the inner set lie outside")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return (gamma / ls.B) ** (1.0 / ls.beta)


def gamma_bound(holder: HolderData, n: int) -> float:
    """``(3A+12) log(n+1)/n`` for ``alpha >= 1/2``, ``(3A+12) n^(-2 alpha)`` below."""
    c = 3 * holder.A + 12
    if holder.alpha >= 0.5:
        return c * math.log(n + 1) / n
    return c * n ** (-2 * holder.alpha)


def chi_bound(holder: HolderData, ls: LSData, n: int) -> float:
    """``((1/B) * gamma_bound) ** (1/beta)``; the constant is composed, not sharp."""
    return (gamma_bound(holder, n) / ls.B) ** (1.0 / ls.beta)


@dataclass
class MetricReport:
    n: int
    s_n: float
    gamma: float
    gamma_bound: float
    chi: float
    chi_bound: float | None
    ls_chi_bound: float | None
    slack: float
    gamma_pass: bool
    chi_pass: bool
    passed: bool
    route: str = ""
    error: str | None = None

    @property
    def rate_bound(self):
        return self.gamma_bound

    @property
    def pass_(self):
        return self.passed


def measure(ja: JuliaApprox, E: PlanarSet, green, resolution: int = 512, cap: int = 1000,
            samples: int = 1000, seed: int = 0, window=None):
    """Measured ``(Gamma(E, K(P)), chi(E, K(P)), pixel_diagonal, raster)``.

    ``||g_E||_K`` is taken over raster pixels of ``J(P)`` (the maximum of
    ``g_E`` on ``K`` sits on its boundary), ``||g_K||_E`` over samples of
    ``E`` with the dynamical Green function; likewise for ``chi``.
    """
    window = window or ja.window or _window_for(green, ja.s_total * 1.05, E.anchor())
    raster = ja.raster
    if raster is None or raster.window != tuple(window):
        raster = filled_julia_raster(ja.P, window, resolution, cap, warn_window=False)
    J = raster.points(raster.boundary)
    K = raster.points()
    rng = np.random.default_rng(seed)
    zE = np.concatenate([E.boundary_sample(samples // 2).points,
                         E.interior_sample(samples - samples // 2, rng)])
    dyn = DynamicalGreen(ja.P, max_iter=cap, traps=attracting_traps(ja.P))
    g_out = float(np.max(green(J))) if J.size else 0.0
    g_in = float(np.max(dyn(zE)))
    gamma = max(g_out, g_in, 0.0)
    chi_out = float(np.max(E.dist(J))) if J.size else 0.0
    chi_in = directed_hausdorff(zE, K) if K.size else float("inf")
    dx, dy = raster.pixel
    diag = math.hypot(dx, dy)
    return gamma, max(chi_out, chi_in if chi_in > diag else 0.0), diag, raster


def construct_for_rate(E: PlanarSet, n: int, green=None, holder: HolderData | None = None,
                       family: str | None = None):
    """``P_n`` with the rate ``s_n`` of the node family.

    Fekete nodes use ``s_n`` and ``tau_n`` (nodes on ``E`` when ``0`` is
    interior, on ``E_tau`` otherwise); other families use the general rate
    with nodes on ``E`` (needs ``0`` interior).
    """
    green = default_green(E) if green is None else green
    if holder is None:
        holder = holder_fit(green, E.boundary_sample(4096), E)
    try:
        r0 = E.inner_radius()
    except geo.OriginNotInterior:
        r0 = 0.0
    if family is None:
        family = "fekete" if (isinstance(E, Disk) or r0 == 0) else "pseudo_leja"
    diam = E.diameter()
    if family == "fekete":
        s, tau = rate_s_fekete(holder, diam, n)
        if r0 > 0:
            W, offset = E, 0.0
        else:
            if tau <= 0:
                raise geo.OriginNotInterior(f"tau_{n} <= 0 and 0 is not interior")
            W, offset = sublevel_set(E, green, tau), tau
        nodes = discrete_fekete(W, n)
        ja = build_Pn(W, nodes, s, holder, fekete=True, check=True)
        ja.s_offset = offset
        ja.s_total = s + offset
        return ja, "fekete"
    if r0 == 0:
        raise geo.OriginNotInterior("the general rate needs 0 in the interior")
    nodes = pseudo_leja(E, green, n)
    sys = deltas(nodes.points)
    nq = _q_norm(sys, sys.j_n, E, n)
    s = rate_s_general(holder, diam, n, nq, E.outer_radius(), r0)
    ja = build_Pn(E, nodes, s, holder, check=True)
    ja.s_total = s
    return ja, "general"


def gamma_rate_table(E: PlanarSet, ns, green=None, holder: HolderData | None = None,
                     holder_override: HolderData | None = None, ls: LSData | None = None,
                     family: str | None = None, resolution: int = 512, cap: int = 1000,
                     slack: float = 0.05, seed: int = 0):
    """One :class:`MetricReport` per ``n``; failing rows carry ``error``."""
    green = default_green(E) if green is None else green
    if holder is None:
        holder = holder_fit(green, E.boundary_sample(4096), E)
    bound_holder = holder_override or holder
    if ls is None:
        try:
            ls = ls_bound_data(E, green)
        except Exception:  # noqa: BLE001 - the chi column is optional
            ls = None
    rows = []
    for n in ns:
        gb = gamma_bound(bound_holder, n)
        cb = chi_bound(bound_holder, ls, n) if ls is not None else None
        try:
            ja, route = construct_for_rate(E, n, green, holder, family)
            gamma, chi, diag, _ = measure(ja, E, green, resolution, cap, seed=seed)
        except Exception as exc:  # noqa: BLE001 - per-row failures are reported
            rows.append(MetricReport(n, float("nan"), float("nan"), gb, float("nan"), cb, None,
                                     0.0, False, False, False, error=f"{type(exc).__name__}: {exc}"))
            continue
        sl = float(modulus_bound(holder, 2 * diag))
        gp = gamma <= gb * (1 + slack)
        lsb = ls_chi_bound(ls, gamma) if ls is not None else None
        cp = True if cb is None else chi <= cb * (1 + slack)
        rows.append(MetricReport(n, ja.s_total, gamma, gb, chi, cb, lsb, sl, bool(gp), bool(cp),
                                 bool(gp and cp), route))
    return rows


def write_rate_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "s_n", "gamma_measured", "gamma_bound", "chi_measured", "chi_bound", "pass"])
        for r in rows:
            w.writerow([r.n, "%.17g" % r.s_n, "%.17g" % r.gamma, "%.17g" % r.gamma_bound,
                        "%.17g" % r.chi, "" if r.chi_bound is None else "%.17g" % r.chi_bound,
                        "true" if r.passed else "false"])

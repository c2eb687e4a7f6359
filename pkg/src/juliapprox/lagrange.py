"""Log-domain Lagrange interpolation quantities.

Magnitudes are carried as sums of ``log|.|`` and phases as products of unit
complex numbers, so products over a few hundred factors neither overflow
nor underflow. ``n`` always denotes the number of nodes minus one.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class DegenerateNodes(ValueError):
    pass


class OutsideDn(ValueError):
    pass


def _c(z):
    return np.asarray(z, dtype=complex)


def _nodes(nodes):
    pts = getattr(nodes, "points", nodes)
    return _c(pts).ravel()


@dataclass(frozen=True)
class LogMagnitude:
    """``value = exp(log_abs) * phase``; ``log_abs = -inf`` encodes zero."""

    log_abs: np.ndarray
    phase: np.ndarray

    def value(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_abs) * self.phase

    def __mul__(self, other):
        return LogMagnitude(self.log_abs + other.log_abs, self.phase * other.phase)

    def __truediv__(self, other):
        return LogMagnitude(self.log_abs - other.log_abs, self.phase * np.conj(other.phase))


def _log_factors(z, nodes):
    """``log|z_i - nodes_k|`` and unit phases, shapes (len(z), len(nodes))."""
    d = z[:, None] - nodes[None, :]
    a = np.abs(d)
    with np.errstate(divide="ignore"):
        la = np.log(a)
    ph = np.where(a > 0, d / np.where(a > 0, a, 1.0), 1.0)
    return la, ph


def nodal_eval(nodes, z) -> LogMagnitude:
    """``w(z) = prod_k (z - nodes_k)`` in log form."""
    z0 = _c(z)
    zz = z0.ravel()
    la, ph = _log_factors(zz, _nodes(nodes))
    return LogMagnitude(la.sum(axis=1).reshape(z0.shape), np.prod(ph, axis=1).reshape(z0.shape))


@dataclass(frozen=True, eq=False)
class LagrangeSystem:
    nodes: np.ndarray
    log_delta: np.ndarray
    phase_delta: np.ndarray
    j_n: int

    @property
    def n(self):
        return self.nodes.size - 1

    def delta(self, k) -> LogMagnitude:
        return LogMagnitude(self.log_delta[k], self.phase_delta[k])


def _argmin_lowest(x, tol=0.0):
    m = np.min(x)
    return int(np.flatnonzero(x <= m + tol)[0])


def deltas(nodes) -> LagrangeSystem:
    """``Delta^(k) = prod_{j != k} (zeta_k - zeta_j)`` for every node.

    ``j_n`` is the index of the smallest ``|Delta|`` (lowest index on ties).
    """
    z = _nodes(nodes)
    if z.size < 2:
        raise DegenerateNodes("need at least two nodes")
    diff = z[:, None] - z[None, :]
    a = np.abs(diff)
    np.fill_diagonal(a, np.inf)
    diam = float(np.max(np.where(np.isfinite(a), a, 0.0)))
    if np.min(a) < 1e-14 * max(diam, 1e-300):
        i, j = np.unravel_index(np.argmin(a), a.shape)
        raise DegenerateNodes(f"nodes {i} and {j} coincide")
    np.fill_diagonal(a, 1.0)
    np.fill_diagonal(diff, 1.0)
    la = np.log(a)
    ph = diff / a
    log_delta = la.sum(axis=1)
    phase = np.prod(ph, axis=1)
    phase = phase / np.abs(phase)
    return LagrangeSystem(z, log_delta, phase, _argmin_lowest(log_delta))


def vandermonde_log(nodes) -> float:
    """``log V = sum_{j<k} log|zeta_j - zeta_k|``, cross-checked with ``sum log|Delta|/2``."""
    z = _nodes(nodes)
    iu = np.triu_indices(z.size, 1)
    direct = float(np.sum(np.log(np.abs(z[iu[0]] - z[iu[1]]))))
    half = 0.5 * float(np.sum(deltas(z).log_delta))
    if abs(direct - half) > 1e-9 * max(1.0, abs(direct)):
        raise ArithmeticError("Vandermonde and Delta products disagree")
    return direct


def lagrange_log(sys: LagrangeSystem, z, js=None):
    """``(log|L^(j)(z)|, phase)`` arrays of shape (len(z), len(js)).

    Points that coincide with a node get the exact cardinal values.
    """
    zz = _c(z).ravel()
    js = np.arange(sys.nodes.size) if js is None else np.atleast_1d(js)
    la, ph = _log_factors(zz, sys.nodes)
    hit = ~np.isfinite(la)
    at_node = hit.any(axis=1)
    la_safe = np.where(hit, 0.0, la)
    total = la_safe.sum(axis=1)
    ptot = np.prod(ph, axis=1)
    logL = total[:, None] - la_safe[:, js] - sys.log_delta[js][None, :]
    phase = ptot[:, None] * np.conj(ph[:, js]) * np.conj(sys.phase_delta[js])[None, :]
    if np.any(at_node):
        rows = np.flatnonzero(at_node)
        k = np.argmax(hit[rows], axis=1)
        card = np.where(js[None, :] == k[:, None], 0.0, -np.inf)
        logL[rows] = card
        phase[rows] = 1.0
    return logL, phase


def lagrange_eval(sys: LagrangeSystem, j: int, z):
    """``L^(j)(z)`` as a complex value together with its ``LogMagnitude``."""
    z0 = _c(z)
    logL, ph = lagrange_log(sys, z0, [j])
    lm = LogMagnitude(logL[:, 0].reshape(z0.shape), ph[:, 0].reshape(z0.shape))
    return lm.value(), lm


def lagrange_sum(sys: LagrangeSystem, z, chunk=2048):
    """``sum_j L^(j)(z)`` and ``Lambda_n(z) = sum_j |L^(j)(z)|``."""
    zz = _c(z).ravel()
    s = np.empty(zz.size, dtype=complex)
    lam = np.empty(zz.size)
    for a in range(0, zz.size, chunk):
        logL, ph = lagrange_log(sys, zz[a : a + chunk])
        with np.errstate(over="ignore"):
            mag = np.exp(logL)
        s[a : a + chunk] = (mag * ph).sum(axis=1)
        lam[a : a + chunk] = mag.sum(axis=1)
    return s, lam


def lebesgue_function(sys: LagrangeSystem, z):
    z0 = _c(z)
    return lagrange_sum(sys, z0)[1].reshape(z0.shape)


@dataclass(frozen=True)
class LebesgueReport:
    value: float
    refined: float | None = None


def lebesgue_constant(sys: LagrangeSystem, mesh, refined_mesh=None) -> LebesgueReport:
    """Mesh maximum of the Lebesgue function over boundary points.

    The maximum over ``E`` sits on the outer boundary (maximum principle),
    so boundary meshes suffice. A second, finer mesh gives a refinement check.
    """
    pts = getattr(mesh, "points", mesh)
    val = float(np.max(lebesgue_function(sys, pts)))
    ref = None
    if refined_mesh is not None:
        rp = getattr(refined_mesh, "points", refined_mesh)
        ref = float(np.max(lebesgue_function(sys, rp)))
    return LebesgueReport(val, ref)


def lebesgue_delta_roots(sys: LagrangeSystem, mesh, cap: float):
    """``(Lambda_n(E)**(1/n), min|Delta|**(1/n) / cap)``; both tend to 1 together."""
    n = sys.n
    lam = lebesgue_constant(sys, mesh).value
    return lam ** (1.0 / n), math.exp(np.min(sys.log_delta) / n) / cap


def max_delta_diagnostic(sys: LagrangeSystem, cap: float) -> float:
    return math.exp(np.max(sys.log_delta) / sys.n) / cap


def norm_Ln(sys: LagrangeSystem, mesh, j=None):
    """Mesh sup of ``|L^(j_n)|`` and its ``n``-th root."""
    pts = _c(getattr(mesh, "points", mesh)).ravel()
    j = sys.j_n if j is None else j
    logL, _ = lagrange_log(sys, pts, [j])
    lg = float(np.max(logL))
    return math.exp(lg), math.exp(lg / sys.n)


@dataclass(frozen=True)
class BoundsReport:
    diff: np.ndarray
    lower: float
    upper: float
    violations: int


def bounds_upper(n: int, theta: float, holder) -> float:
    """``(3/n) log[(n+1) Theta] + omega(1/n**2)``."""
    return 3.0 / n * math.log((n + 1) * theta) + holder.A * (1.0 / n**2) ** holder.alpha


def bounds_check(sys: LagrangeSystem, green, holder, z, E, theta: float,
                 mesh=None, fekete: bool = False, j=None, tol: float = 1e-8) -> BoundsReport:
    """Bracket ``g_E(z) - (1/n) log|L_n(z)|`` for ``z`` in ``D_n``.

    Upper bound ``(3/n) log[(n+1) Theta] + omega(1/n^2)``; lower bound
    ``(1/n) log(1/||L_n||_E)`` or 0 for Fekete nodes (with ``j = 0``).
    """
    n = sys.n
    z = _c(z).ravel()
    if np.any(E.dist(z) < 1.0 / n**2):
        raise OutsideDn("probe points must satisfy dist(z, E) >= 1/n^2")
    j = (0 if fekete else sys.j_n) if j is None else j
    logL, _ = lagrange_log(sys, z, [j])
    diff = green(z) - logL[:, 0] / n
    upper = bounds_upper(n, theta, holder)
    if fekete:
        lower = 0.0
    else:
        if mesh is None:
            raise ValueError("the lower bound needs a boundary mesh for ||L_n||")
        lower = -math.log(norm_Ln(sys, mesh, j)[0]) / n
    bad = (diff < lower - tol) | (diff > upper + 1e-12)
    return BoundsReport(diff, lower, upper, int(bad.sum()))


def write_diagnostics_csv(rows, path):
    """Rows of ``(n, lebesgue_const, lebesgue_root, min_delta_root_over_cap,
    max_delta_root_over_cap, norm_Ln_root)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "lebesgue_const", "lebesgue_root", "min_delta_root_over_cap",
                    "max_delta_root_over_cap", "norm_Ln_root"])
        for r in rows:
            w.writerow([int(r[0])] + ["%.17g" % v for v in r[1:]])


def diagnostic_row(sys: LagrangeSystem, mesh, cap: float):
    n = sys.n
    lam = lebesgue_constant(sys, mesh).value
    lam_root, min_root = lebesgue_delta_roots(sys, mesh, cap)
    return (n, lam, lam_root, min_root, max_delta_diagnostic(sys, cap), norm_Ln(sys, mesh)[1])

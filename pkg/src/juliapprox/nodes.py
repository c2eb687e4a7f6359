"""Interpolation node families and separation diagnostics.

Greedy selections are done on boundary meshes in the log domain; every
argmax breaks ties at the smallest mesh index (values within 1e-12 in log
count as ties), so reruns are deterministic.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BoundaryMesh, Disk, PlanarSet, Segment
from .lagrange import deltas
from .potential import (
    DiskGreen,
    GreenModel,
    Sublevel,
    SegmentGreen,
    markov_bound,
    markov_continuum,
    sublevel_boundary,
)

LOG_TIE = 1e-12
EDREI_SLACK = 0.10


class EdreiViolation(RuntimeError):
    pass


class UnsupportedMap(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NodeArray:
    """Ordered nodes with provenance and the realized Edrei constants.

    ``edrei[k-1]`` is ``C_k`` for ``k = 1..n`` and ``markov[k-1]`` the Markov
    constant used at step ``k`` (pseudo Leja only).
    """

    points: np.ndarray
    provenance: str
    edrei: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mesh: BoundaryMesh | None = field(default=None, repr=False)
    markov: np.ndarray | None = field(default=None, repr=False)
    flags: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.points.size - 1

    def __len__(self):
        return self.points.size

    def prefix(self, n):
        """The first ``n + 1`` nodes (sequences only)."""
        return NodeArray(
            self.points[: n + 1],
            self.provenance,
            self.edrei[:n],
            self.mesh,
            None if self.markov is None else self.markov[:n],
            dict(self.flags),
        )

    def min_gap(self):
        p = self.points
        d = np.abs(p[:, None] - p[None, :])
        np.fill_diagonal(d, np.inf)
        return float(d.min())


def _first_argmax(v):
    m = np.max(v)
    return int(np.flatnonzero(v >= m - LOG_TIE)[0])


def _greedy(mesh_pts, start_index, n, logw=None):
    """Plain mesh-Leja from ``start_index``; returns indices and realized C_k."""
    pts = mesh_pts
    idx = [start_index]
    if logw is None:
        logw = np.zeros(pts.size)
    with np.errstate(divide="ignore"):
        logw = logw + np.log(np.abs(pts - pts[start_index]))
    C = []
    for _ in range(n):
        k = _first_argmax(logw)
        C.append(math.exp(float(np.max(logw) - logw[k])))
        idx.append(k)
        with np.errstate(divide="ignore"):
            logw = logw + np.log(np.abs(pts - pts[k]))
    return np.array(idx), np.array(C)


def circle_leja(n: int, start: complex = 1.0, factor: int = 4096) -> NodeArray:
    """Leja points of the unit circle on a mesh of ``factor * (n + 1)`` points.

    The mesh starts at ``start`` and runs counter-clockwise, so ties go to the
    smallest argument measured from ``start``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    start = complex(start)
    if abs(abs(start) - 1) > 1e-12:
        raise ValueError("start must lie on the unit circle")
    N = factor * (n + 1)
    k = np.arange(N)
    mesh = start * np.exp(2j * math.pi * k / N)
    # exact values at the quarter points keep dyadic symmetry bit-exact
    q = N // 4
    mesh[0], mesh[q], mesh[2 * q], mesh[3 * q] = start, 1j * start, -start, -1j * start
    idx, C = _greedy(mesh, 0, n)
    h = 2 * math.pi / N
    bm = BoundaryMesh(mesh, h, np.full(N, h), True)
    return NodeArray(mesh[idx], "CircleLeja", C, bm)


def pseudo_leja(E: PlanarSet, green: GreenModel, n: int, C_target: float = 2.0,
                mesh: BoundaryMesh | None = None) -> NodeArray:
    """Pseudo Leja sequence on the outer boundary mesh of ``E``.

    At step ``k`` the mesh is split into consecutive runs of arclength at most
    ``r_k = log(2 - 1/C_target) / M_k``; each run is represented by its first
    point, and the best representative for ``|w_k|`` becomes ``a_k``. The
    realized ``C_k = max_mesh |w_k| / |w_k(a_k)|`` is recorded.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if C_target < 1:
        raise ValueError("C_target must be >= 1")
    if mesh is None:
        mesh = E.boundary_sample(max(4096, 64 * (n + 1)))
    pts = mesh.points
    gaps = np.abs(np.diff(pts))
    arc = np.concatenate([[0.0], np.cumsum(gaps)])
    with np.errstate(divide="ignore"):
        logw = np.log(np.abs(pts - pts[0]))
    idx, C, M = [0], [], []
    log_ratio = math.log(2.0 - 1.0 / C_target)
    for k in range(1, n + 1):
        Mk = markov_bound(E, green, k)
        rk = log_ratio / Mk
        if rk > 0:
            bins = np.floor(arc / rk).astype(np.int64)
            _, reps = np.unique(bins, return_index=True)
        else:
            reps = np.arange(pts.size)
        best = reps[_first_argmax(logw[reps])]
        top = float(np.max(logw))
        Ck = math.exp(top - float(logw[best]))
        if Ck > C_target * (1 + EDREI_SLACK):
            raise EdreiViolation(f"step {k}: realized C = {Ck:.4g} > {C_target}")
        idx.append(int(best))
        C.append(Ck)
        M.append(Mk)
        with np.errstate(divide="ignore"):
            logw = logw + np.log(np.abs(pts - pts[best]))
    return NodeArray(pts[idx], "PseudoLeja", np.array(C), mesh, np.array(M),
                     {"C_target": C_target, "mesh_size": pts.size})


@dataclass(frozen=True)
class AffineMap:
    """``z -> c + R z``: exterior map of the disk ``D(c, R)``."""

    c: complex
    R: float

    def __call__(self, z):
        return self.c + self.R * np.asarray(z, dtype=complex)


@dataclass(frozen=True)
class JoukowskiMap:
    """``z -> c + s (rho z + 1/(rho z))``; ellipse for ``rho > 1``, segment for ``rho = 1``."""

    c: complex
    rho: float
    s: complex

    def __call__(self, z):
        w = self.rho * np.asarray(z, dtype=complex)
        return self.c + self.s * (w + 1.0 / w)


def exterior_map_for(E: PlanarSet):
    """Closed-form exterior conformal map of ``E`` (disks, segments, their ellipses)."""
    if isinstance(E, Disk):
        return AffineMap(E.center, E.radius)
    if isinstance(E, Segment):
        return JoukowskiMap(0.5 * (E.a + E.b), 1.0, (E.b - E.a) / 4.0)
    if isinstance(E, Sublevel) and isinstance(E.base, Segment) and isinstance(E.green, SegmentGreen):
        b = E.base
        return JoukowskiMap(0.5 * (b.a + b.b), math.exp(E.eps), (b.b - b.a) / 4.0)
    raise UnsupportedMap(f"no closed-form exterior map for {E.kind}")


def conformal_image_nodes(phi, n: int, start: complex = 1.0) -> NodeArray:
    """Images ``phi(e_k)`` of circle Leja points.

    When ``phi`` folds the circle (a Joukowski map onto a segment) repeated
    images are skipped and the circle sequence is continued.
    """
    m = n
    while True:
        e = circle_leja(2 * m + 1, start).points
        img = phi(e)
        scale = float(np.max(np.abs(img - img[0]))) or 1.0
        keep = []
        for k, w in enumerate(img):
            if all(abs(w - img[j]) > 1e-12 * scale for j in keep):
                keep.append(k)
            if len(keep) == n + 1:
                return NodeArray(img[keep], "ConformalImage",
                                 flags={"circle_indices": keep})
        m *= 2


def discrete_fekete(E: PlanarSet, n: int, mesh: BoundaryMesh | None = None,
                    rounds: int = 5, exact_disk: bool = True) -> NodeArray:
    """Greedy Vandermonde selection plus single-point exchange rounds.

    The result is reordered so slot 0 holds the smallest ``|Delta|``. For a
    disk the exact Fekete points (rotated roots of unity) are returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if exact_disk and isinstance(E, Disk):
        pts = E.center + E.radius * np.exp(2j * math.pi * np.arange(n + 1) / (n + 1))
        return NodeArray(pts, "DiscreteFekete", flags={"exact": True})
    if mesh is None:
        mesh = E.boundary_sample(max(4096, 64 * (n + 1)))
    P = mesh.points
    if n + 1 > P.size // 4:
        raise ValueError("mesh too small for the requested number of nodes")
    idx, _ = _greedy(P, 0, n)
    idx = list(idx)

    def logcol(q):
        with np.errstate(divide="ignore"):
            c = np.log(np.abs(P - q))
        # a node's distance to itself is dropped from its own row
        return np.where(np.isfinite(c), c, 0.0)

    D = np.stack([logcol(P[k]) for k in idx], axis=1)
    S = D.sum(axis=1)
    for _ in range(rounds):
        changed = False
        for i in range(n + 1):
            without = S - D[:, i]
            cur = without[idx[i]]
            without[idx] = -np.inf
            without[idx[i]] = cur
            best = _first_argmax(without)
            if without[best] > cur + LOG_TIE:
                col = logcol(P[best])
                S = S - D[:, i] + col
                D[:, i] = col
                idx[i] = best
                changed = True
        if not changed:
            break
    pts = P[idx]
    j0 = deltas(pts).j_n
    order = [j0] + [k for k in range(n + 1) if k != j0]
    return NodeArray(pts[order], "DiscreteFekete", mesh=mesh, flags={"exact": False})


@dataclass(frozen=True)
class SigmaReport:
    k: int
    sigma: float
    bound: float
    weak_bound: float
    ok: bool


def sigma_bound(C: float, M: float):
    """``(log(1 + 1/C)/M, 1/(2 C M))``."""
    return math.log1p(1.0 / C) / M, 1.0 / (2.0 * C * M)


def separation_sigma(nodes: NodeArray, k: int, M: float | None = None) -> SigmaReport:
    """``sigma_k = min_{j<k} |a_k - a_j|`` against ``log(1 + 1/C_k)/M_k``."""
    a = nodes.points
    if not 1 <= k <= nodes.n:
        raise ValueError("k out of range")
    sigma = float(np.min(np.abs(a[k] - a[:k])))
    C = float(nodes.edrei[k - 1]) if nodes.edrei.size >= k else 1.0
    if M is None:
        M = float(nodes.markov[k - 1])
    b, wb = sigma_bound(C, M)
    return SigmaReport(k, sigma, b, wb, sigma >= b * (1 - 1e-12))


def sigma_table(nodes: NodeArray, cap: float, continuum: bool = True):
    """Sigma reports for every step; ``continuum`` uses ``2^(1/k-1) k^2/cap``."""
    out = []
    for k in range(1, nodes.n + 1):
        M = markov_continuum(k, cap) if continuum else None
        out.append(separation_sigma(nodes, k, M))
    return out


@dataclass(frozen=True)
class RhoReport:
    n: int
    rho: np.ndarray
    gaps: np.ndarray
    bounds: np.ndarray
    violations: int


def level_distance(green: GreenModel, level: float, z, anchor=0j, m: int = 4096):
    """``dist(z, {g = level})``; analytic for disk models, mesh-based otherwise."""
    z = np.asarray(z, dtype=complex)
    if isinstance(green, DiskGreen):
        R = green.radius * math.exp(level)
        return np.abs(R - np.abs(z - green.center))
    mesh = sublevel_boundary(green, level, m, anchor=anchor)
    tree = cKDTree(np.c_[mesh.points.real, mesh.points.imag])
    d, _ = tree.query(np.c_[z.ravel().real, z.ravel().imag])
    return d.reshape(z.shape)


def separation_rho(nodes: NodeArray, green: GreenModel, n: int, anchor=0j) -> RhoReport:
    """Check ``|a_j - a_n| >= max(rho_n(a_j), rho_n(a_n)) / (2 e C_n)`` for ``j < n``.

    ``rho_n`` is the distance to the level curve ``{g = log(1 + 1/n)}``.
    """
    a = nodes.points[: n + 1]
    rho = level_distance(green, math.log1p(1.0 / n), a, anchor)
    C = float(nodes.edrei[n - 1]) if nodes.edrei.size >= n else 1.0
    gaps = np.abs(a[n] - a[:n])
    bounds = np.maximum(rho[:n], rho[n]) / (2 * math.e * C)
    return RhoReport(n, rho, gaps, bounds, int(np.sum(gaps < bounds * (1 - 1e-12))))


def write_nodes_csv(nodes: NodeArray, path, sigmas=None, rho_ok=None):
    """Columns ``index, re, im, realized_C, sigma, rho_bound_ok``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im", "realized_C", "sigma", "rho_bound_ok"])
        for k, p in enumerate(nodes.points):
            C = nodes.edrei[k - 1] if 1 <= k <= nodes.edrei.size else float("nan")
            sg = sigmas[k - 1].sigma if sigmas is not None and k >= 1 else float("nan")
            ok = "" if rho_ok is None or k == 0 else str(bool(rho_ok[k - 1])).lower()
            w.writerow([k, "%.17g" % p.real, "%.17g" % p.imag, "%.17g" % C, "%.17g" % sg, ok])

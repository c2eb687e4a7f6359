"""Green functions with pole at infinity and the constants derived from them.

Every model is a callable ``g(z)`` (vectorized, ``g >= 0``) with a
``capacity`` attribute. Analytic sources are exact; :class:`DynamicalGreen`
uses the escape rate; :class:`ChargeGreen` solves a charge simulation on a
boundary mesh for sets without a closed form (polygons, unions of disks).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .geometry import BoundaryMesh, Disk, PlanarSet, PolyPreimage, Segment, UnionOfDisks
from .poly import ComplexPoly, effective_escape_radius


class TracingFailure(RuntimeError):
    pass


class FitFailure(RuntimeError):
    pass


class ValidationFailure(RuntimeError):
    pass


class NotContinuum(UserWarning):
    pass


class IterationCapReached(UserWarning):
    pass


def _c(z):
    return np.asarray(z, dtype=complex)


class GreenModel:
    """Base class: ``__call__`` evaluates ``g``; ``capacity`` is ``cap E``."""

    kind = "abstract"
    exact = True
    capacity: float

    def __call__(self, z):
        raise NotImplementedError

    def translate(self, w) -> "GreenModel":
        return ShiftedGreen(self, complex(w))


@dataclass(frozen=True)
class DiskGreen(GreenModel):
    center: complex
    radius: float
    kind = "analytic_disk"

    def __call__(self, z):
        with np.errstate(divide="ignore"):
            return np.maximum(0.0, np.log(np.abs(_c(z) - self.center) / self.radius))

    @property
    def capacity(self):
        return self.radius

    def translate(self, w):
        return DiskGreen(self.center + complex(w), self.radius)


@dataclass(frozen=True)
class SegmentGreen(GreenModel):
    a: complex
    b: complex
    kind = "analytic_segment"

    def __call__(self, z):
        u = (2 * _c(z) - self.a - self.b) / (self.b - self.a)
        # principal branches keep |u + sqrt(u-1) sqrt(u+1)| >= 1 off the cut
        w = u + np.sqrt(u - 1) * np.sqrt(u + 1)
        return np.maximum(0.0, np.log(np.abs(w)))

    @property
    def capacity(self):
        return abs(self.b - self.a) / 4.0

    def translate(self, w):
        return SegmentGreen(self.a + complex(w), self.b + complex(w))


@dataclass(frozen=True)
class PreimageGreen(GreenModel):
    """``g = (1/deg p) max(0, log|p|)`` for ``E = p^{-1}(closed unit disk)``."""

    poly: ComplexPoly
    kind = "analytic_preimage"

    def __call__(self, z):
        return np.maximum(0.0, self.poly.log_abs(_c(z)) / self.poly.degree)

    @property
    def capacity(self):
        return math.exp(-self.poly.log_abs_lead / self.poly.degree)

    def translate(self, w):
        return PreimageGreen(PolyPreimage(self.poly).translate(w).poly)


@dataclass(frozen=True)
class ShiftedGreen(GreenModel):
    """Green function of ``E + w`` from that of ``E``."""

    base: GreenModel
    shift: complex
    kind = "shifted"

    def __call__(self, z):
        return self.base(_c(z) - self.shift)

    @property
    def capacity(self):
        return self.base.capacity

    @property
    def exact(self):
        return self.base.exact


@dataclass(frozen=True)
class SublevelGreen(GreenModel):
    """``g_{E_eps} = max(0, g_E - eps)``; capacity grows by ``exp(eps)``."""

    base: GreenModel
    eps: float
    kind = "sublevel"

    def __call__(self, z):
        return np.maximum(0.0, self.base(z) - self.eps)

    @property
    def capacity(self):
        return self.base.capacity * math.exp(self.eps)

    @property
    def exact(self):
        return self.base.exact

    def translate(self, w):
        return SublevelGreen(self.base.translate(w), self.eps)


class DynamicalGreen(GreenModel):
    """Escape-rate Green function of the filled Julia set ``K(P)``.

    ``g(z) = lim d^-k log|P^k(z)|``. Iteration stops once ``log|z_k|``
    exceeds ``log(max(rho, R)) + 25`` where ``rho`` bounds the roots and ``R``
    is the escape radius; the remaining tail is below ``d^-k * 2 rho/|z_k|``.
    Orbits that stay bounded for ``max_iter`` steps, or enter one of the
    optional trap disks, get ``g = 0`` (at the stated resolution).
    """

    kind = "dynamical"
    exact = False

    def __init__(self, P: ComplexPoly, max_iter: int = 1000, traps=()):
        if P.degree < 2:
            raise ValueError("dynamical Green function needs degree >= 2")
        self.P = P
        self.max_iter = int(max_iter)
        self.traps = tuple(traps)
        self.R = effective_escape_radius(P)
        rho = float(np.max(np.abs(P.get_roots())))
        self.log_stop = math.log(max(rho, self.R)) + 25.0
        self.capped = 0

    @property
    def capacity(self):
        d = self.P.degree
        return math.exp(-self.P.log_abs_lead / (d - 1))

    def _trapped(self, z):
        out = np.zeros(z.shape, dtype=bool)
        for c, r in self.traps:
            out |= np.abs(z - c) <= r
        return out

    def __call__(self, z):
        z0 = _c(z)
        shape = z0.shape
        z = z0.ravel().copy()
        d = self.P.degree
        c_lead = self.P.log_abs_lead / (d - 1)
        g = np.zeros(z.size)
        idx = np.arange(z.size)
        scale = 1.0
        for _ in range(self.max_iter + 1):
            if idx.size == 0:
                break
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                lz = np.log(np.abs(z))
            done = lz > self.log_stop
            if np.any(done):
                g[idx[done]] = scale * (lz[done] + c_lead)
            keep = ~done & ~self._trapped(z)
            idx, z = idx[keep], z[keep]
            if idx.size == 0:
                break
            znew = self.P.iterate_step(z)
            bad = ~np.isfinite(znew)
            if np.any(bad):
                # overflow in one step: finish those in the log domain
                g[idx[bad]] = scale / d * (self.P.log_abs(z[bad]) + c_lead)
                idx, znew = idx[~bad], znew[~bad]
            z = znew
            scale /= d
        self.capped = int(idx.size)
        return np.maximum(0.0, g).reshape(shape)


class ChargeGreen(GreenModel):
    """Charge-simulation Green function of the polynomially convex hull of a set.

    Point charges ``h_j sigma_j`` sit at the boundary mesh points; the system
    ``sum_j h_j sigma_j log|z_i - z_j| = V`` with ``sum h_j sigma_j = 1`` gives
    ``g(z) = sum_j h_j sigma_j log|z - z_j| - V`` and ``cap = exp(V)``.
    The diagonal uses the exact mean of ``log|t|`` over a panel of length
    ``h_i``. Values are reliable at distances above a few mesh spacings.
    """

    kind = "charge"
    exact = False

    def __init__(self, E: PlanarSet, m: int = 1024):
        mesh = E.boundary_sample(m)
        z, h = mesh.points, mesh.weights
        n = z.size
        with np.errstate(divide="ignore"):
            A = h[None, :] * np.log(np.abs(z[:, None] - z[None, :]))
        A[np.arange(n), np.arange(n)] = h * (np.log(h / 2) - 1)
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = A
        M[:n, n] = -1.0
        M[n, :n] = h
        rhs = np.zeros(n + 1)
        rhs[n] = 1.0
        sol = np.linalg.solve(M, rhs)
        self.set = E
        self.mesh = mesh
        self.q = h * sol[:n]
        self.V = float(sol[n])
        self.resolution = 4.0 * mesh.spacing

    @property
    def capacity(self):
        return math.exp(self.V)

    def __call__(self, z, chunk=4096):
        z0 = _c(z)
        flat = z0.ravel()
        out = np.empty(flat.size)
        for s in range(0, flat.size, chunk):
            zz = flat[s : s + chunk]
            with np.errstate(divide="ignore"):
                u = np.log(np.abs(zz[:, None] - self.mesh.points[None, :])) @ self.q
            out[s : s + chunk] = u - self.V
        out = np.where(self.set.contains(flat), 0.0, np.maximum(out, 0.0))
        return out.reshape(z0.shape)


class LagrangeGreen(GreenModel):
    """Lower estimate of ``g_E`` from the nodal polynomial of ``n + 1`` nodes.

    ``g_n(z) = max(0, log(|w(z)| / ||w||_mesh) / (n + 1))`` satisfies
    ``g_n <= g_E`` by the Bernstein-Walsh inequality (up to mesh error), and
    ``bracket = log(C) / (n+1)`` bounds the gap for Edrei constant ``C``
    growth of the sup norm.
    """

    kind = "lagrange"
    exact = False

    def __init__(self, nodes, mesh_points):
        self.nodes = _c(nodes)
        self.n = self.nodes.size - 1
        mp = _c(mesh_points)
        self.log_norm = float(np.max(self._logw(mp)))
        self.capacity = math.exp(self.log_norm / (self.n + 1))

    def _logw(self, z):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(z[..., None] - self.nodes)).sum(axis=-1)

    def __call__(self, z):
        return np.maximum(0.0, (self._logw(_c(z)) - self.log_norm) / (self.n + 1))


# -- sublevel sets -----------------------------------------------------------


def sublevel_contains(model: GreenModel, eps: float, z):
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return model(z) <= eps + 1e-12


def _trace_rays(model, eps, anchor, theta, r_max=None):
    """Radii where the rays ``anchor + r exp(i theta)`` cross ``{g = eps}`` (bisection)."""
    dirs = np.exp(1j * theta)
    m = theta.size
    lo = np.zeros(m)
    hi = np.full(m, 1.0 if r_max is None else float(r_max))
    for _ in range(200):
        over = model(anchor + hi * dirs) > eps
        if over.all():
            break
        hi = np.where(over, hi, 2.0 * hi)
    else:
        bad = int(np.flatnonzero(~over)[0])
        raise TracingFailure(f"ray {bad} never crosses the level curve")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        inside = model(anchor + mid * dirs) <= eps
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * hi):
            break
    pts = anchor + 0.5 * (lo + hi) * dirs
    err = np.abs(model(pts) - eps)
    if np.any(err > 1e-9):
        # bisection brackets the crossing; flat regions can still leave a gap
        k = int(np.argmax(err))
        raise TracingFailure(f"ray {k}: level mismatch {err[k]:.3g}")
    return pts


def sublevel_boundary(model: GreenModel, eps: float, m: int, anchor=0j, r_max=None,
                      passes: int = 6):
    """Trace ``{g = eps}`` along ``m`` rays from ``anchor``.

    The rays start equiangular; when consecutive samples are very unevenly
    spaced (thin level curves) the angles are redistributed towards equal
    arclength for up to ``passes`` rounds, keeping the ray at angle 0.
    Returns a closed mesh in positive orientation with ``|g - eps| <= 1e-9``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    anchor = complex(anchor)
    if float(model(np.array([anchor]))[0]) > eps:
        raise TracingFailure("anchor lies outside the sublevel set")
    theta = 2 * math.pi * np.arange(m) / m
    pts = _trace_rays(model, eps, anchor, theta, r_max)
    for _ in range(passes):
        gaps = np.abs(np.roll(pts, -1) - pts)
        if m < 3 or gaps.max() <= 2.0 * gaps.mean():
            break
        s_cum = np.concatenate([[0.0], np.cumsum(gaps)])
        th_ext = np.concatenate([theta, [2 * math.pi]])
        target = s_cum[-1] * np.arange(m) / m
        new = np.interp(target, s_cum, th_ext)
        # keep the angles strictly increasing
        if np.any(np.diff(new) <= 0):
            break
        theta = new
        pts = _trace_rays(model, eps, anchor, theta, r_max)
    return geo._polyline_mesh([pts], closed=True)


@dataclass(frozen=True, eq=False)
class Sublevel(PlanarSet):
    """``E_eps = {g_E <= eps}`` with boundary traced from ``base.anchor()``."""

    base: PlanarSet
    green: GreenModel
    eps: float
    kind = "sublevel"

    def __post_init__(self):
        if not self.eps > 0:
            raise geo.InvalidSet("sublevel needs eps > 0")

    def _fine(self):
        if "_mesh" not in self.__dict__:
            mesh = self.boundary_sample(4096)
            self.__dict__["_mesh"] = mesh
            self.__dict__["_tree"] = cKDTree(np.c_[mesh.points.real, mesh.points.imag])
        return self.__dict__["_mesh"]

    @property
    def level_green(self):
        return SublevelGreen(self.green, self.eps)

    def contains(self, z):
        return sublevel_contains(self.green, self.eps, z)

    def dist(self, z):
        z = _c(z)
        mesh = self._fine()
        flat = z.ravel()
        d, i = self.__dict__["_tree"].query(np.c_[flat.real, flat.imag])
        near = d < 8 * mesh.spacing
        if np.any(near):
            d[near] = geo.refine_level_distance(
                lambda w: self.green(w) - self.eps, flat[near], mesh.points[i[near]],
                self.diameter(),
            )
        return np.where(self.contains(z), 0.0, d.reshape(z.shape))

    def boundary_sample(self, m):
        return sublevel_boundary(self.green, self.eps, m, anchor=self.base.anchor())

    def diameter(self):
        if "_diam" not in self.__dict__:
            p = self.boundary_sample(1024).points
            self.__dict__["_diam"] = float(np.max(np.abs(p[:, None] - p[None, :])))
        return self.__dict__["_diam"]

    def outer_radius(self):
        return float(np.max(np.abs(self._fine().points)))

    def interior_point_margin(self, z):
        z = complex(z)
        if not float(self.green(np.array([z]))[0]) < self.eps:
            return 0.0
        return float(np.min(np.abs(self._fine().points - z)))

    def anchor(self):
        return self.base.anchor()

    def translate(self, w):
        return Sublevel(self.base.translate(w), self.green.translate(w), self.eps)

    def to_json(self):
        return {"type": "sublevel", "base": self.base.to_json(), "eps": self.eps}


def default_green(E: PlanarSet) -> GreenModel:
    """The most accurate available Green model for ``E``."""
    if isinstance(E, Disk):
        return DiskGreen(E.center, E.radius)
    if isinstance(E, Segment):
        return SegmentGreen(E.a, E.b)
    if isinstance(E, PolyPreimage):
        return PreimageGreen(E.poly)
    if isinstance(E, Sublevel):
        return E.level_green
    if isinstance(E, UnionOfDisks) and len(E.disks) == 1:
        d = E.disks[0]
        return DiskGreen(d.center, d.radius)
    return ChargeGreen(E)


def sublevel_set(E: PlanarSet, green: GreenModel, eps: float) -> PlanarSet:
    """``E_eps`` as a set descriptor; exact descriptors where they exist."""
    if eps == 0:
        return E
    if isinstance(green, DiskGreen):
        return Disk(green.center, green.radius * math.exp(eps))
    if isinstance(green, PreimageGreen):
        p = green.poly
        return PolyPreimage(ComplexPoly(p.coeffs, p.log_scale - p.degree * eps))
    if isinstance(E, Sublevel):
        return Sublevel(E.base, E.green, E.eps + eps)
    return Sublevel(E, green, eps)


def capacity(model: GreenModel) -> float:
    return float(model.capacity)


def capacity_numeric(model: GreenModel, center=0j, radius=1e3, k=16) -> float:
    """``exp(-lim (g(z) - log|z - center|))`` sampled on a large circle."""
    z = center + radius * np.exp(2j * math.pi * np.arange(k) / k)
    gamma = float(np.mean(model(z) - np.log(np.abs(z - center))))
    return math.exp(-gamma)


# -- moduli of continuity ----------------------------------------------------


@dataclass(frozen=True)
class HolderData:
    A: float
    alpha: float
    source: str = "fitted"


@dataclass(frozen=True)
class LSData:
    B: float
    beta: float
    window: float = 1.0
    source: str = "fitted"


def modulus_bound(h: HolderData, delta):
    """``omega(delta) = A delta**alpha``."""
    return h.A * np.asarray(delta, dtype=float) ** h.alpha


_T_GRID = np.logspace(-6, -1, 26)


def _offset_cloud(mesh: BoundaryMesh, t, E=None, n_base=256):
    """Points ``z_j + t * nu_j`` on outward normals (both sides for open arcs)."""
    step = max(1, mesh.points.size // n_base)
    base = mesh.points[::step]
    nrm = mesh.outward_normals()[::step]
    if not mesh.closed:
        nrm = np.concatenate([nrm, -nrm])
        base = np.concatenate([base, base])
        # arc endpoints also get the tangential continuation
        p = mesh.points
        for end, nb in ((p[0], p[1]), (p[-1], p[-2])):
            u = (end - nb) / abs(end - nb)
            base = np.append(base, end)
            nrm = np.append(nrm, u)
    keep = np.abs(nrm) > 0
    base, nrm = base[keep], nrm[keep]
    z = base[:, None] + t[None, :] * nrm[:, None]
    tt = np.broadcast_to(t[None, :], z.shape)
    return z.ravel(), tt.ravel()


def _stable_ratio(t, ratio, mode, factor):
    """Check that the finest populated decade does not drift past the rest.

    ``mode="max"``: the largest ratio at the finest scale must stay within
    ``factor`` of the largest ratio at coarser scales (upper bounds);
    ``mode="min"`` is the mirror image for lower bounds.
    """
    dec = np.floor(np.log10(t) + 1e-9)
    levels, counts = np.unique(dec, return_counts=True)
    levels = levels[counts >= 5]
    if levels.size < 2:
        return True
    fine = dec == levels[0]
    coarse = dec > levels[0]
    if mode == "max":
        return ratio[fine].max() <= factor * ratio[coarse].max()
    return ratio[fine].min() >= ratio[coarse].min() / factor


def _green_base(model):
    while isinstance(model, (ShiftedGreen, SublevelGreen)):
        model = model.base
    return model


def holder_fit(model: GreenModel, setmesh: BoundaryMesh, E: PlanarSet | None = None,
               margin: float = 1.05) -> HolderData:
    """Fit ``g(z_j + t nu_j) <= A t**alpha`` for ``alpha`` in ``(1, 1/2)``.

    Analytic overrides: a disk of radius ``r`` has ``(1/r, 1)``. Sublevel
    models inherit the constants of their base set. For charge models only
    offsets above the model resolution are used, and polygons take
    ``alpha = 1/2`` (convex corners have exponent below 1).
    """
    if isinstance(model, SublevelGreen):
        # sublevel sets keep the constant and exponent of the base set
        if isinstance(E, Sublevel):
            return holder_fit(model.base, E.base.boundary_sample(setmesh.points.size),
                              E.base, margin)
        raise FitFailure("a sublevel model needs its Sublevel set descriptor")
    if isinstance(model, ShiftedGreen):
        w = model.shift
        mesh = BoundaryMesh(setmesh.points - w, setmesh.spacing, setmesh.weights,
                            setmesh.closed, setmesh.normals)
        return holder_fit(model.base, mesh, None if E is None else E.translate(-w), margin)
    if isinstance(model, DiskGreen):
        return HolderData(1.0 / model.radius, 1.0, "analytic")
    t = _T_GRID
    if isinstance(model, ChargeGreen):
        t = t[t >= model.resolution]
        if t.size < 3:
            t = np.logspace(math.log10(model.resolution), -0.5, 8)
    z, tt = _offset_cloud(setmesh, t, E)
    g = model(z)
    candidates = (1.0, 0.5)
    if isinstance(model, ChargeGreen) and isinstance(model.set, geo.Polygon):
        candidates = (0.5,)
    for alpha in candidates:
        ratio = g / tt**alpha
        if isinstance(model, ChargeGreen) or _stable_ratio(tt, ratio, "max", 1.25):
            A = margin * float(ratio.max())
            if isinstance(model, SegmentGreen):
                # along the axis beyond an endpoint the ratio peaks as t -> 0
                A = max(A, margin * float(np.max(model(model.b + t * (model.b - model.a)
                                                         / abs(model.b - model.a)) / np.sqrt(t))))
            return HolderData(A, alpha, "fitted")
    raise FitFailure("no Hoelder exponent in {1, 1/2} validates on the sampled offsets")


def markov_bound(E: PlanarSet, model: GreenModel, n: int):
    """Working Markov constant ``M_n``.

    Exact ``n/r`` for a disk, otherwise the continuum bound
    ``2**(1/n - 1) n**2 / cap``. Disconnected unions of disks fall back to
    the largest component bound, with a :class:`NotContinuum` warning.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(E, Disk):
        return n / E.radius
    if isinstance(E, UnionOfDisks) and len(E.disks) == 1:
        return n / E.disks[0].radius
    if isinstance(E, UnionOfDisks) and not E.is_connected():
        warnings.warn("set is not a continuum; using the component-wise maximum",
                      NotContinuum, stacklevel=2)
        best = 0.0
        for grp in E.components():
            part = UnionOfDisks(tuple(E.disks[i] for i in grp))
            best = max(best, markov_bound(part, default_green(part), n))
        return best
    return markov_continuum(n, model.capacity)


def markov_continuum(n: int, cap: float) -> float:
    return 2.0 ** (1.0 / n - 1.0) * n * n / cap


def ls_bound_data(E: PlanarSet, model: GreenModel, window: float = 1.0,
                  margin: float = 0.95) -> LSData:
    """Fit ``g_E(z) >= B dist(z, E)**beta`` on ``0 < dist <= window``.

    A disk of radius ``r`` with window 1 gives ``B = log(1 + 1/r)``, ``beta = 1``.
    Otherwise the smallest stable ``beta`` in ``(1/2, 1, 2)`` is chosen and
    ``B`` is ``margin`` times the smallest sampled ratio.
    """
    if isinstance(model, DiskGreen) and isinstance(E, Disk):
        B = math.log1p(window / model.radius) / window
        return LSData(B, 1.0, window, "analytic")
    mesh = E.boundary_sample(1024)
    t = np.logspace(-6, 0, 31) * window
    if isinstance(model, ChargeGreen):
        t = t[t >= model.resolution]
    z, _ = _offset_cloud(mesh, t, E)
    # random directions as well, to reach points not on a normal
    rng = np.random.default_rng(12345)
    extra = mesh.points[rng.integers(0, mesh.points.size, 4000)] + \
        window * rng.uniform(0, 1, 4000) ** 2 * np.exp(2j * math.pi * rng.uniform(0, 1, 4000))
    z = np.concatenate([z, extra])
    d = E.dist(z)
    ok = (d >= 1e-6 * window) & (d <= window)
    if isinstance(model, ChargeGreen):
        ok &= d >= model.resolution
    z, d = z[ok], d[ok]
    g = model(z)
    for beta in (0.5, 1.0, 2.0):
        ratio = g / d**beta
        if _stable_ratio(d, ratio, "min", 1.25):
            B = margin * float(ratio.min())
            if B > 0:
                return LSData(B, beta, window, "fitted")
    raise ValidationFailure("no LS exponent in {1/2, 1, 2} validates")


def validate_ls(E, model, ls: LSData, z) -> bool:
    d = E.dist(z)
    ok = (d > 0) & (d <= ls.window)
    return bool(np.all(model(_c(z)[ok]) >= ls.B * d[ok] ** ls.beta * (1 - 1e-12)))


def write_probes_csv(model: GreenModel, z, path):
    """Write probe values with columns ``z_re, z_im, g``."""
    z = _c(z).ravel()
    g = model(z)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z_re", "z_im", "g"])
        for zz, gg in zip(z, g):
            w.writerow(["%.17g" % zz.real, "%.17g" % zz.imag, "%.17g" % gg])

"""Compact planar sets with membership, distance and boundary meshes.

All descriptors are immutable. Points are complex numbers; every predicate
accepts scalars or numpy arrays. Geometric tolerances are absolute values of
``REL_TOL * diameter``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.polynomial as npoly
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .poly import ComplexPoly

REL_TOL = 1e-12
TWO_PI = 2.0 * math.pi


class InvalidSet(ValueError):
    pass


class OriginNotInterior(ValueError):
    pass


class MeshFailure(RuntimeError):
    pass


def _c(z):
    return np.asarray(z, dtype=complex)


def _check_finite(*zs):
    for z in zs:
        if not np.all(np.isfinite(_c(z))):
            raise InvalidSet("coordinates must be finite")


def _point(p) -> complex:
    if isinstance(p, (list, tuple)):
        if len(p) != 2:
            raise InvalidSet(f"expected [x, y], got {p!r}")
        return complex(float(p[0]), float(p[1]))
    return complex(p)


def _pair(z: complex):
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Ordered samples of an outer boundary.

    ``weights`` are arclength quadrature weights (they sum to the boundary
    length); ``spacing`` bounds the gap between consecutive samples.
    """

    points: np.ndarray
    spacing: float
    weights: np.ndarray
    closed: bool = True
    normals: np.ndarray | None = None

    def __len__(self):
        return self.points.size

    def outward_normals(self):
        """Unit outward normals; central differences when not stored."""
        if self.normals is not None:
            return self.normals
        p = self.points
        if self.closed:
            tan = np.roll(p, -1) - np.roll(p, 1)
        else:
            tan = np.gradient(p)
        with np.errstate(invalid="ignore", divide="ignore"):
            nrm = -1j * tan / np.abs(tan)
        return np.where(np.isfinite(nrm), nrm, 0.0)


def _polyline_mesh(curves, closed):
    """Mesh from ordered point runs; weights and spacing from chord gaps."""
    pts, wts, spacing = [], [], 0.0
    for run in curves:
        run = _c(run)
        if run.size == 1:
            pts.append(run)
            wts.append(np.zeros(1))
            continue
        if closed:
            gaps = np.abs(np.roll(run, -1) - run)
            w = 0.5 * (gaps + np.roll(gaps, 1))
        else:
            gaps = np.abs(np.diff(run))
            w = np.zeros(run.size)
            w[:-1] += 0.5 * gaps
            w[1:] += 0.5 * gaps
        spacing = max(spacing, float(gaps.max()))
        pts.append(run)
        wts.append(w)
    return BoundaryMesh(np.concatenate(pts), spacing, np.concatenate(wts), closed)


def _segment_distance(z, a, b):
    ab = b - a
    t = ((z - a) * np.conj(ab)).real / abs(ab) ** 2
    t = np.clip(t, 0.0, 1.0)
    return np.abs(z - (a + t * ab))


def _orient(p, q, r):
    return ((q - p).conjugate() * (r - p)).imag


def _segments_touch(p1, p2, q1, q2, tol):
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True
    # collinear / endpoint contact
    for p, a, b in ((p1, q1, q2), (p2, q1, q2), (q1, p1, p2), (q2, p1, p2)):
        if _segment_distance(p, a, b) <= tol:
            return True
    return False


class PlanarSet:
    """Common interface of the compact set descriptors."""

    kind = "abstract"

    def contains(self, z):
        raise NotImplementedError

    def dist(self, z):
        raise NotImplementedError

    def boundary_sample(self, m: int) -> BoundaryMesh:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def outer_radius(self) -> float:
        raise NotImplementedError

    def translate(self, w) -> "PlanarSet":
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    @property
    def tol(self) -> float:
        return REL_TOL * self.diameter()

    def anchor(self) -> complex:
        """A point of the set used as the origin of rays when tracing curves."""
        return complex(np.mean(self.boundary_sample(256).points))

    def interior_point_margin(self, z) -> float:
        """Distance from ``z`` to the boundary when ``z`` is an interior point, else 0."""
        raise NotImplementedError

    def inner_radius(self) -> float:
        """``dist(0, boundary)``; requires the origin to be an interior point."""
        r = self.interior_point_margin(0j)
        if not r > 10 * self.tol:
            raise OriginNotInterior(f"0 is not an interior point of {self.kind}")
        return float(r)

    def has_interior(self) -> bool:
        return True

    def interior_sample(self, m: int, rng) -> np.ndarray:
        """``m`` points of the set drawn by rejection from its bounding box."""
        b = self.boundary_sample(512).points
        x0, x1 = b.real.min(), b.real.max()
        y0, y1 = b.imag.min(), b.imag.max()
        out = np.zeros(0, dtype=complex)
        for _ in range(200):
            z = rng.uniform(x0, x1, 4 * m) + 1j * rng.uniform(y0, y1, 4 * m)
            out = np.concatenate([out, z[self.contains(z)]])
            if out.size >= m:
                return out[:m]
        raise MeshFailure("rejection sampling of the interior failed")


@dataclass(frozen=True, eq=False)
class Disk(PlanarSet):
    center: complex
    radius: float
    kind = "disk"

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        _check_finite(self.center, self.radius)
        if not self.radius > 0:
            raise InvalidSet("disk radius must be positive")

    def contains(self, z):
        return np.abs(_c(z) - self.center) <= self.radius + self.tol

    def dist(self, z):
        return np.maximum(0.0, np.abs(_c(z) - self.center) - self.radius)

    def boundary_sample(self, m):
        if m < 1:
            raise MeshFailure("need at least one sample")
        t = TWO_PI * np.arange(m) / m
        pts = self.center + self.radius * np.exp(1j * t)
        h = TWO_PI * self.radius / m
        return BoundaryMesh(pts, h, np.full(m, h), True, np.exp(1j * t))

    def diameter(self):
        return 2.0 * self.radius

    def outer_radius(self):
        return abs(self.center) + self.radius

    def interior_point_margin(self, z):
        return max(0.0, self.radius - abs(complex(z) - self.center))

    def anchor(self):
        return self.center

    def translate(self, w):
        return Disk(self.center + complex(w), self.radius)

    def interior_sample(self, m, rng):
        r = self.radius * np.sqrt(rng.uniform(0, 1, m))
        return self.center + r * np.exp(1j * rng.uniform(0, TWO_PI, m))

    def to_json(self):
        return {"type": "disk", "center": _pair(self.center), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Segment(PlanarSet):
    a: complex
    b: complex
    kind = "segment"

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        _check_finite(self.a, self.b)
        if self.a == self.b:
            raise InvalidSet("segment endpoints must be distinct")

    def contains(self, z):
        return self.dist(z) <= self.tol

    def dist(self, z):
        return _segment_distance(_c(z), self.a, self.b)

    def boundary_sample(self, m):
        """Chebyshev-Lobatto distributed points from ``a`` to ``b``."""
        if m < 2:
            raise MeshFailure("a segment mesh needs both endpoints")
        u = 0.5 * (1.0 - np.cos(math.pi * np.arange(m) / (m - 1)))
        pts = self.a + (self.b - self.a) * u
        pts[-1] = self.b
        return _polyline_mesh([pts], closed=False)

    def diameter(self):
        return abs(self.b - self.a)

    def outer_radius(self):
        return max(abs(self.a), abs(self.b))

    def interior_point_margin(self, z):
        return 0.0

    def has_interior(self):
        return False

    def anchor(self):
        return 0.5 * (self.a + self.b)

    def translate(self, w):
        return Segment(self.a + complex(w), self.b + complex(w))

    def interior_sample(self, m, rng):
        return self.a + (self.b - self.a) * rng.uniform(0, 1, m)

    def to_json(self):
        return {"type": "segment", "a": _pair(self.a), "b": _pair(self.b)}


@dataclass(frozen=True, eq=False)
class Polygon(PlanarSet):
    """Simple polygon; vertices are stored counter-clockwise."""

    vertices: np.ndarray
    kind = "polygon"

    def __post_init__(self):
        v = np.array([_point(p) for p in self.vertices], dtype=complex)
        _check_finite(v)
        if v.size >= 2 and v[0] == v[-1]:
            v = v[:-1]
        if v.size < 3:
            raise InvalidSet("polygon needs at least 3 vertices")
        area2 = float(np.sum((np.conj(v) * np.roll(v, -1)).imag))
        if area2 < 0:
            v = v[::-1].copy()
        diam = float(np.max(np.abs(v[:, None] - v[None, :])))
        if abs(area2) <= REL_TOL * diam**2:
            raise InvalidSet("polygon not simple")
        tol = REL_TOL * diam
        n = v.size
        if np.any(np.abs(np.roll(v, -1) - v) <= tol):
            raise InvalidSet("polygon not simple")
        for i in range(n):
            p1, p2 = v[i], v[(i + 1) % n]
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    # adjacent edges may only share their common vertex
                    q_far = v[(j + 1) % n] if j == i + 1 else v[j]
                    e = (p1, p2) if j == i + 1 else (p2, p1)
                    if abs(_orient(e[0], e[1], q_far)) <= tol and (
                        ((q_far - e[1]) * np.conj(e[0] - e[1])).real > 0
                    ):
                        raise InvalidSet("polygon not simple")
                    continue
                if _segments_touch(p1, p2, v[j], v[(j + 1) % n], tol):
                    raise InvalidSet("polygon not simple")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "_diam", diam)

    def diameter(self):
        return self._diam

    def _edges(self):
        v = self.vertices
        return zip(v, np.roll(v, -1))

    def _boundary_dist(self, z):
        d = np.full(z.shape, np.inf)
        for a, b in self._edges():
            d = np.minimum(d, _segment_distance(z, a, b))
        return d

    def _inside_strict(self, z):
        inside = np.zeros(z.shape, dtype=bool)
        x, y = z.real, z.imag
        for a, b in self._edges():
            cond = (a.imag > y) != (b.imag > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            inside ^= cond & (x < xc)
        return inside

    def contains(self, z):
        z = _c(z)
        return self._inside_strict(z) | (self._boundary_dist(z) <= self.tol)

    def dist(self, z):
        z = _c(z)
        d = self._boundary_dist(z)
        return np.where(self._inside_strict(z), 0.0, d)

    def boundary_sample(self, m):
        v = self.vertices
        n = v.size
        if m < n:
            raise MeshFailure("need at least one sample per polygon edge")
        lengths = np.abs(np.roll(v, -1) - v)
        counts = _allocate(lengths, m)
        runs = []
        for k in range(n):
            t = np.arange(counts[k]) / counts[k]
            runs.append(v[k] + (v[(k + 1) % n] - v[k]) * t)
        return _polyline_mesh([np.concatenate(runs)], closed=True)

    def outer_radius(self):
        return float(np.max(np.abs(self.vertices)))

    def interior_point_margin(self, z):
        z = _c(z)
        if not bool(self._inside_strict(z)):
            return 0.0
        return float(self._boundary_dist(z))

    def translate(self, w):
        return Polygon(self.vertices + complex(w))

    def to_json(self):
        return {"type": "polygon", "vertices": [_pair(p) for p in self.vertices]}


def _allocate(lengths, m):
    """Split ``m`` samples proportionally to ``lengths`` (each part >= 1)."""
    lengths = np.asarray(lengths, dtype=float)
    k = lengths.size
    if m < k:
        raise MeshFailure("too few samples for the number of boundary pieces")
    raw = (m - k) * lengths / lengths.sum()
    counts = 1 + np.floor(raw).astype(int)
    rest = m - counts.sum()
    order = np.argsort(-(raw - np.floor(raw)), kind="stable")
    counts[order[:rest]] += 1
    return counts


def _merge_intervals(iv):
    iv = sorted(iv)
    out = []
    for s, e in iv:
        if out and s <= out[-1][1]:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return out


@dataclass(frozen=True, eq=False)
class UnionOfDisks(PlanarSet):
    disks: tuple
    kind = "union_disks"

    def __post_init__(self):
        ds = []
        for d in self.disks:
            d = d if isinstance(d, Disk) else disk_from_json(d)
            if not any(d.center == e.center and d.radius == e.radius for e in ds):
                ds.append(d)
        if not ds:
            raise InvalidSet("union of disks needs at least one disk")
        object.__setattr__(self, "disks", tuple(ds))

    @property
    def centers(self):
        return np.array([d.center for d in self.disks])

    @property
    def radii(self):
        return np.array([d.radius for d in self.disks])

    def contains(self, z):
        z = _c(z)
        return np.any(
            np.abs(z[..., None] - self.centers) <= self.radii + self.tol, axis=-1
        )

    def dist(self, z):
        z = _c(z)
        d = np.abs(z[..., None] - self.centers) - self.radii
        return np.maximum(0.0, d.min(axis=-1))

    def exposed_arcs(self):
        """Arcs ``(disk index, start angle, end angle)`` not inside another disk."""
        c, r = self.centers, self.radii
        arcs = []
        for i in range(len(self.disks)):
            covered = []
            full = False
            for j in range(len(self.disks)):
                if i == j:
                    continue
                d = abs(c[j] - c[i])
                if d + r[i] <= r[j]:
                    full = True
                    break
                if d >= r[i] + r[j] or d + r[j] <= r[i]:
                    continue
                h = math.acos(np.clip((r[i] ** 2 + d**2 - r[j] ** 2) / (2 * r[i] * d), -1, 1))
                phi = math.atan2((c[j] - c[i]).imag, (c[j] - c[i]).real) % TWO_PI
                s, e = phi - h, phi + h
                if s < 0:
                    covered += [[s + TWO_PI, TWO_PI], [0.0, e]]
                elif e > TWO_PI:
                    covered += [[s, TWO_PI], [0.0, e - TWO_PI]]
                else:
                    covered.append([s, e])
            if full:
                continue
            cov = _merge_intervals(covered)
            gaps, pos = [], 0.0
            for s, e in cov:
                if s > pos:
                    gaps.append([pos, s])
                pos = max(pos, e)
            if pos < TWO_PI:
                gaps.append([pos, TWO_PI])
            # join the piece ending at 2pi with the one starting at 0
            if len(gaps) > 1 and gaps[0][0] == 0.0 and gaps[-1][1] == TWO_PI:
                last = gaps.pop()
                gaps[0] = [last[0] - TWO_PI, gaps[0][1]]
            for s, e in gaps:
                if e - s > 1e-14:
                    arcs.append((i, s, e))
        return arcs

    def boundary_sample(self, m):
        if m < 8:
            raise MeshFailure("need at least 8 samples")
        arcs = self.exposed_arcs()
        if not arcs:
            raise MeshFailure("no exposed boundary arcs found")
        lengths = np.array([self.radii[i] * (e - s) for i, s, e in arcs])
        counts = _allocate(lengths, m)
        pts, wts, nrm = [], [], []
        spacing = 0.0
        for (i, s, e), cnt, L in zip(arcs, counts, lengths):
            t = s + (e - s) * (np.arange(cnt) + 0.5) / cnt
            pts.append(self.centers[i] + self.radii[i] * np.exp(1j * t))
            nrm.append(np.exp(1j * t))
            wts.append(np.full(cnt, L / cnt))
            spacing = max(spacing, L / cnt)
        return BoundaryMesh(
            np.concatenate(pts), spacing, np.concatenate(wts), True, np.concatenate(nrm)
        )

    def components(self):
        """Index groups of disks forming connected pieces."""
        n = len(self.disks)
        c, r = self.centers, self.radii
        seen, groups = set(), []
        for i in range(n):
            if i in seen:
                continue
            stack, grp = [i], []
            seen.add(i)
            while stack:
                k = stack.pop()
                grp.append(k)
                for j in range(n):
                    if j not in seen and abs(c[j] - c[k]) <= r[j] + r[k]:
                        seen.add(j)
                        stack.append(j)
            groups.append(sorted(grp))
        return groups

    def is_connected(self):
        return len(self.components()) == 1

    def diameter(self):
        c, r = self.centers, self.radii
        return float(np.max(np.abs(c[:, None] - c[None, :]) + r[:, None] + r[None, :]))

    def outer_radius(self):
        return float(np.max(np.abs(self.centers) + self.radii))

    def interior_point_margin(self, z):
        z = complex(z)
        if not np.any(np.abs(z - self.centers) < self.radii):
            return 0.0
        best = np.inf
        for i, s, e in self.arcs_cached():
            ci, ri = self.centers[i], self.radii[i]
            phi = math.atan2((z - ci).imag, (z - ci).real)
            # nearest point of the full circle is at angle phi; check if on arc
            on_arc = any(s <= a <= e for a in (phi, phi + TWO_PI, phi - TWO_PI))
            if on_arc:
                best = min(best, abs(ri - abs(z - ci)))
            else:
                for a in (s, e):
                    best = min(best, abs(z - (ci + ri * np.exp(1j * a))))
        return float(best)

    def arcs_cached(self):
        if not hasattr(self, "_arcs"):
            object.__setattr__(self, "_arcs", self.exposed_arcs())
        return self._arcs

    def translate(self, w):
        return UnionOfDisks(tuple(d.translate(w) for d in self.disks))

    def anchor(self):
        return complex(np.sum(self.centers * self.radii**2) / np.sum(self.radii**2))

    def to_json(self):
        return {"type": "union_disks", "disks": [d.to_json() for d in self.disks]}


@dataclass(frozen=True, eq=False)
class PolyPreimage(PlanarSet):
    """``{z : |p(z)| <= 1}`` for a non-constant polynomial ``p``."""

    poly: ComplexPoly
    kind = "poly_preimage"

    def __post_init__(self):
        p = self.poly if isinstance(self.poly, ComplexPoly) else ComplexPoly(self.poly)
        if p.degree < 1:
            raise InvalidSet("preimage polynomial must be non-constant")
        object.__setattr__(self, "poly", p)

    def contains(self, z):
        return self.poly.log_abs(_c(z)) <= 1e-12

    def _level_points(self, k):
        """Solve ``p(z) = exp(i theta)`` on ``k`` equally spaced angles.

        Returns an array of shape (k, d) whose columns are continuous branches.
        """
        p = self.poly
        c = p.scaled_coeffs()
        dp = p.derivative()
        d = p.degree
        # solve about the root centroid so the roots do not depend on the position
        z0 = -c[d - 1] / (d * c[d]) if d > 1 else 0j
        c = npoly.Polynomial(c)(npoly.Polynomial([z0, 1])).coef
        out = np.empty((k, d), dtype=complex)
        prev = None
        for idx in range(k):
            w = np.exp(1j * TWO_PI * idx / k)
            cc = c.copy()
            cc[0] -= w
            z = z0 + (np.roots(cc[::-1]) if d > 1 else np.array([-cc[0] / cc[1]]))
            for _ in range(2):
                with np.errstate(all="ignore"):
                    step = (p(z) - w) / dp(z)
                z = np.where(np.isfinite(step), z - step, z)
            # translation-invariant order, so exact ties (a double point) break the same way
            u = z - z.mean()
            scale = max(float(np.max(np.abs(u))), 1e-300)
            z = z[np.lexsort((np.round(u.imag / scale, 9), np.round(u.real / scale, 9)))]
            if prev is not None:
                cost = np.round(np.abs(prev[:, None] - z[None, :]) / scale, 9)
                _, col = linear_sum_assignment(cost)
                z = z[col]
            out[idx] = z
            prev = z
        return out

    def _mesh(self, m):
        cache = self.__dict__.setdefault("_mesh_cache", {})
        if m in cache:
            return cache[m]
        d = self.poly.degree
        k = max(8, -(-m // d))
        pts = self._level_points(k)
        # follow branch permutations across theta = 2pi to get closed curves
        last, first = pts[-1], pts[0]
        # branch b at angle 2pi - h continues into the nearest branch at angle 0
        _, nxt = linear_sum_assignment(np.abs(last[:, None] - first[None, :]))
        curves, used = [], set()
        for b0 in range(d):
            if b0 in used:
                continue
            run, b = [], b0
            while b not in used:
                used.add(b)
                run.append(pts[:, b])
                b = nxt[b]
            curves.append(np.concatenate(run))
        mesh = _polyline_mesh(curves, closed=True)
        # drop coincident samples (critical points on the level curve)
        diam = float(np.max(np.abs(mesh.points - mesh.points.mean()))) * 2
        keep = _dedupe(mesh.points, REL_TOL * 1e3 * diam)
        q = mesh.points[keep]
        # outward normal = direction of grad log|p| = conj(p'/p); 0 at critical points
        grad = np.conj(self.poly.derivative()(q) / self.poly(q))
        a = np.abs(grad)
        nrm = np.where(a > 0, grad / np.where(a > 0, a, 1.0), 0.0)
        mesh = BoundaryMesh(q, mesh.spacing, mesh.weights[keep], True, nrm)
        cache[m] = mesh
        return mesh

    def boundary_sample(self, m):
        """Samples of ``{|p| = 1}``; ``ceil(m / deg p) * deg p`` points (minus coincident ones)."""
        if m < 8:
            raise MeshFailure("need at least 8 samples")
        try:
            return self._mesh(m)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy failure
            raise MeshFailure(f"level curve tracing failed: {exc}") from exc

    def _fine(self):
        mesh = self._mesh(max(2048, 256 * self.poly.degree))
        if "_tree" not in self.__dict__:
            pts = mesh.points
            self.__dict__["_tree"] = cKDTree(np.c_[pts.real, pts.imag])
        return mesh

    def dist(self, z):
        z = _c(z)
        mesh = self._fine()
        flat = z.ravel()
        d, i = self.__dict__["_tree"].query(np.c_[flat.real, flat.imag])
        near = d < 8 * mesh.spacing
        if np.any(near):
            d[near] = refine_level_distance(
                self.poly.log_abs, flat[near], mesh.points[i[near]], self.diameter()
            )
        return np.where(self.contains(z), 0.0, d.reshape(z.shape))

    def diameter(self):
        if "_diam" not in self.__dict__:
            pts = self._mesh(1024).points
            self.__dict__["_diam"] = float(np.max(np.abs(pts[:, None] - pts[None, :])))
        return self.__dict__["_diam"]

    def outer_radius(self):
        return float(np.max(np.abs(self._fine().points)))

    def interior_point_margin(self, z):
        z = complex(z)
        if not self.poly.log_abs(np.array([z]))[0] < 0:
            return 0.0
        return float(np.min(np.abs(self._fine().points - z)))

    def anchor(self):
        return complex(np.mean(self.poly.get_roots()))

    def translate(self, w):
        # p(z - w) has roots shifted by w
        c = self.poly.conjugate_by_translation(w).scaled_coeffs()
        c = c.copy()
        c[0] -= w
        return PolyPreimage(ComplexPoly(c))

    def to_json(self):
        return {"type": "poly_preimage", "coeffs": [_pair(c) for c in self.poly.scaled_coeffs()]}


def refine_level_distance(F, z, foot, scale, iters=12):
    """Distance from ``z`` to the curve ``{F = 0}`` starting at mesh feet.

    Alternates a Newton step onto the curve with a tangential step towards
    the orthogonal projection of ``z``. Points whose iteration stalls (near
    critical points of ``F``) keep the mesh distance.
    """
    z = _c(z)
    b = _c(foot).copy()
    h = 1e-7 * scale
    for _ in range(iters):
        f = F(b)
        gx = (F(b + h) - F(b - h)) / (2 * h)
        gy = (F(b + 1j * h) - F(b - 1j * h)) / (2 * h)
        grad = gx + 1j * gy
        ng = np.abs(grad)
        ok = ng > 1e-8
        safe = np.where(ok, ng, 1.0)
        b = np.where(ok, b - f * grad / safe**2, b)
        tan = 1j * grad / safe
        b = np.where(ok, b + tan * ((z - b) * np.conj(tan)).real, b)
    d_ref = np.abs(z - b)
    d_mesh = np.abs(z - foot)
    good = np.isfinite(d_ref) & (np.abs(F(b)) <= 1e-10) & (d_ref <= d_mesh)
    return np.where(good, d_ref, d_mesh)


def _dedupe(pts, tol):
    keep = []
    tree = cKDTree(np.c_[pts.real, pts.imag])
    dropped = set()
    for i in range(pts.size):
        if i in dropped:
            continue
        keep.append(i)
        for j in tree.query_ball_point([pts[i].real, pts[i].imag], tol):
            if j > i:
                dropped.add(j)
    return np.array(keep, dtype=int)


def theta(s: PlanarSet) -> float:
    """``(2 + diam E) ** (1/3)``."""
    return (2.0 + s.diameter()) ** (1.0 / 3.0)


def disk_from_json(d):
    return Disk(_point(d["center"]), float(d["radius"]))


def from_json(d: dict) -> PlanarSet:
    """Parse a JSON set descriptor."""
    if not isinstance(d, dict) or "type" not in d:
        raise InvalidSet("set descriptor must be an object with a 'type'")
    t = d["type"]
    try:
        if t == "disk":
            return disk_from_json(d)
        if t == "segment":
            return Segment(_point(d["a"]), _point(d["b"]))
        if t == "polygon":
            return Polygon(d["vertices"])
        if t == "union_disks":
            return UnionOfDisks(tuple(disk_from_json(x) for x in d["disks"]))
        if t == "poly_preimage":
            return PolyPreimage(ComplexPoly.from_json(d["coeffs"]))
    except KeyError as exc:
        raise InvalidSet(f"missing field {exc} in {t} descriptor") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSet):
            raise
        raise InvalidSet(str(exc)) from exc
    raise InvalidSet(f"unknown set type {t!r}")

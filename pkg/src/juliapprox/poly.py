"""Complex polynomials carried as mantissa coefficients plus a shared log scale.

The value of a :class:`ComplexPoly` is ``exp(log_scale) * sum(coeffs[k] z**k)``.
Polynomials built from their roots keep the roots and are evaluated in
factored form, which is what keeps degree ~100 Lagrange products usable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq


def _as_complex_array(z):
    return np.asarray(z, dtype=complex)


@dataclass(frozen=True, eq=False)
class ComplexPoly:
    coeffs: np.ndarray
    log_scale: float = 0.0
    roots: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        c = np.atleast_1d(_as_complex_array(self.coeffs)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)) or not np.isfinite(self.log_scale):
            raise ValueError("polynomial coefficients must be finite")
        # strip exact trailing zeros so the leading coefficient is nonzero
        nz = np.flatnonzero(c)
        if nz.size == 0:
            raise ValueError("the zero polynomial is not allowed")
        c = c[: nz[-1] + 1]
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "log_scale", float(self.log_scale))
        if self.roots is not None:
            r = np.atleast_1d(_as_complex_array(self.roots)).copy()
            if r.size != c.size - 1:
                raise ValueError("number of roots does not match the degree")
            r.setflags(write=False)
            object.__setattr__(self, "roots", r)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_roots(cls, roots, lead=1.0, log_scale=0.0):
        """Polynomial ``exp(log_scale) * lead * prod(z - r)``."""
        r = np.atleast_1d(_as_complex_array(roots))
        monic = np.poly(r)[::-1] if r.size else np.array([1.0 + 0j])
        # np.poly output can be badly scaled for large degree; keep the
        # magnitude in log_scale and a unit-size mantissa
        peak = np.max(np.abs(monic))
        mant = monic / peak * complex(lead)
        return cls(mant, log_scale + np.log(peak), roots=r)

    @classmethod
    def from_json(cls, coeffs):
        """Build from ``[[re, im], ...]`` ascending coefficients."""
        arr = np.asarray(coeffs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("coeffs must be a list of [re, im] pairs")
        return cls(arr[:, 0] + 1j * arr[:, 1])

    def to_json(self):
        return {
            "log_scale": self.log_scale,
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    # -- basic data -------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def log_abs_lead(self) -> float:
        return self.log_scale + float(np.log(abs(self.coeffs[-1])))

    @property
    def lead(self) -> complex:
        return complex(np.exp(self.log_scale) * self.coeffs[-1])

    def scaled_coeffs(self):
        """Plain coefficients (may under/overflow for extreme log scales)."""
        return self.coeffs * np.exp(self.log_scale)

    def get_roots(self):
        if self.roots is not None:
            return self.roots
        if self.degree == 0:
            return np.zeros(0, dtype=complex)
        r = np.roots(self.coeffs[::-1])
        object.__setattr__(self, "roots", r)
        return r

    # -- evaluation -------------------------------------------------------
    def _horner(self, z):
        acc = np.full(z.shape, self.coeffs[-1], dtype=complex)
        for c in self.coeffs[-2::-1]:
            acc = acc * z + c
        return acc

    def log_eval(self, z):
        """Return ``(log|p(z)|, p(z)/|p(z)|)`` without overflow.

        Exact zeros give ``-inf`` with phase 1.
        """
        z = _as_complex_array(z)
        if self.roots is None and self.degree <= 16:
            with np.errstate(all="ignore"):
                v = self._horner(z)
                ok = np.isfinite(v) & (v != 0)
            if np.all(ok):
                return np.log(np.abs(v)) + self.log_scale, v / np.abs(v)
        roots = self.get_roots()
        lead = self.coeffs[-1]
        la = np.full(z.shape, np.log(abs(lead)) + self.log_scale)
        ph = np.full(z.shape, lead / abs(lead), dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            for r in roots:
                d = z - r
                ad = np.abs(d)
                la = la + np.log(ad)
                ph = ph * np.where(ad > 0, d / np.where(ad > 0, ad, 1.0), 1.0)
        return la, ph

    def log_abs(self, z):
        return self.log_eval(z)[0]

    def __call__(self, z):
        z = _as_complex_array(z)
        if self.roots is None and self.degree <= 16:
            with np.errstate(all="ignore"):
                v = self._horner(z)
            return v * np.exp(self.log_scale)
        la, ph = self.log_eval(z)
        with np.errstate(over="ignore"):
            return np.exp(la) * ph

    def iterate_step(self, z):
        """One application of the polynomial, tuned for orbit iteration."""
        if self.roots is None:
            with np.errstate(all="ignore"):
                return self._horner(z) * np.exp(self.log_scale)
        acc = np.full(z.shape, self.lead, dtype=complex)
        with np.errstate(all="ignore"):
            for r in self.roots:
                acc *= z - r
        return acc

    def derivative(self):
        if self.degree == 0:
            raise ValueError("derivative of a constant is the zero polynomial")
        k = np.arange(1, self.coeffs.size)
        return ComplexPoly(self.coeffs[1:] * k, self.log_scale)

    def conjugate_by_translation(self, w):
        """Coefficients of ``z -> P(z - w) + w`` (conjugation by a shift).

        Uses the monomial expansion, so only well conditioned for small degree.
        """
        npp = np.polynomial.polynomial
        base = np.array([-w, 1.0], dtype=complex)
        out = np.zeros(1, dtype=complex)
        power = np.ones(1, dtype=complex)
        for coef in self.scaled_coeffs():
            out = npp.polyadd(out, coef * power)
            power = npp.polymul(power, base)
        out = npp.polyadd(out, np.array([w], dtype=complex))
        return ComplexPoly(out)


def escape_radius(P: ComplexPoly) -> float:
    """``max(1, (1 + sum_{k<d} |c_k|) / |c_d|)`` from the coefficients."""
    c = np.abs(P.scaled_coeffs())
    return float(max(1.0, (1.0 + c[:-1].sum()) / c[-1]))


def effective_escape_radius(P: ComplexPoly) -> float:
    """Radius beyond which ``|P(z)| >= 2|z|`` is guaranteed.

    Smallest of two sufficient bounds: the coefficient bound
    ``max(1, (2 + sum_{k<d}|c_k|)/|c_d|)`` and, when roots are known, the
    root bound ``|a_d| (R - rho)^d >= 2R`` with ``rho = max |root|``.
    """
    if P.degree < 2:
        raise ValueError("escape radius needs degree >= 2")
    d = P.degree
    with np.errstate(over="ignore"):
        c = np.abs(P.scaled_coeffs())
    coef_bound = np.inf
    if np.all(np.isfinite(c)) and c[-1] > 0:
        coef_bound = max(1.0, (2.0 + c[:-1].sum()) / c[-1])
    rho = float(np.max(np.abs(P.get_roots())))
    la = P.log_abs_lead

    def f(R):
        return la + d * np.log(R - rho) - np.log(2.0 * R)

    lo = rho + 1e-12 * max(1.0, rho) + 1e-300
    hi = max(2.0 * rho, 1.0) + 1.0
    while f(hi) < 0:
        hi *= 2.0
    root_bound = brentq(f, lo, hi, xtol=1e-12) if f(lo) < 0 else lo
    # guard against brentq landing a hair below the true root
    root_bound *= 1.0 + 1e-9
    return float(min(coef_bound, root_bound))

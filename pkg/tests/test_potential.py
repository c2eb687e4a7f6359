import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from juliapprox import potential as pot
from juliapprox.geometry import Disk, Polygon, PolyPreimage, Segment, UnionOfDisks
from juliapprox.poly import ComplexPoly
from juliapprox.potential import (
    ChargeGreen,
    DiskGreen,
    DynamicalGreen,
    HolderData,
    PreimageGreen,
    SegmentGreen,
)

# Capacity of the unit square: Gamma(1/4)^2 / (4 pi^(3/2)).
SQUARE_CAP = math.gamma(0.25) ** 2 / (4 * math.pi**1.5)


def test_green_examples():
    assert DiskGreen(0, 1)(2.0) == pytest.approx(math.log(2), abs=1e-15)
    assert PreimageGreen(ComplexPoly([0, 0, 1]))(2.0) == pytest.approx(math.log(2), abs=1e-15)
    assert DynamicalGreen(ComplexPoly([0, 0, 1]))(np.array([3.0]))[0] == pytest.approx(math.log(3), abs=1e-12)


def test_capacity_examples():
    assert pot.capacity(DiskGreen(0, 1)) == 1
    assert pot.capacity(SegmentGreen(-1, 1)) == 0.5
    g = PreimageGreen(ComplexPoly([0, 0, 2]))
    assert pot.capacity(g) == pytest.approx(2**-0.5, rel=1e-12)
    assert pot.capacity_numeric(g, radius=1e4) == pytest.approx(2**-0.5, rel=1e-6)


def test_capacity_translation_invariant():
    E = Disk(2, 1)
    assert pot.capacity(pot.default_green(E)) == pot.capacity(pot.default_green(E.translate(-2))) == 1


def test_sublevel_contains_examples():
    g = DiskGreen(0, 1)
    assert pot.sublevel_contains(g, math.log(2), 2.0)
    assert not pot.sublevel_contains(g, 0.1, 3.0)
    for model, z in [(g, 0.5), (SegmentGreen(-1, 1), 0.3), (PreimageGreen(ComplexPoly([0, 0, 1])), 0.2j)]:
        assert pot.sublevel_contains(model, 0.0, z)


def test_sublevel_boundary_examples():
    m = pot.sublevel_boundary(DiskGreen(0, 1), math.log(2), 4)
    np.testing.assert_allclose(m.points, [2, 2j, -2, -2j], atol=1e-9)
    m = pot.sublevel_boundary(PreimageGreen(ComplexPoly([0, 0, 1])), math.log(2), 64)
    np.testing.assert_allclose(np.abs(m.points), 2.0, atol=1e-9)


def test_sublevel_boundary_converges_to_set():
    from juliapprox.metrics import hausdorff

    for E in [Disk(0, 1), Segment(-1, 1)]:
        g = pot.default_green(E)
        m = pot.sublevel_boundary(g, 1e-4, 512, anchor=E.anchor())
        assert hausdorff(m, E.boundary_sample(512)) < 1e-2


def test_modulus_bound_examples():
    assert pot.modulus_bound(HolderData(1, 1), 0.01) == pytest.approx(0.01)
    assert pot.modulus_bound(HolderData(2, 0.5), 0.25) == pytest.approx(1.0)
    assert pot.modulus_bound(HolderData(2, 0.5), 0.0) == 0


def test_holder_fit_disks():
    for r in (1.0, 2.0):
        E = Disk(0, r)
        h = pot.holder_fit(DiskGreen(0, r), E.boundary_sample(256), E)
        assert (h.A, h.alpha) == pytest.approx((1 / r, 1))
        # log(1 + t/r) <= t/r
        t = np.logspace(-6, 1, 50)
        assert np.all(np.log1p(t / r) <= h.A * t)


def test_holder_fit_segment_matches_oracle():
    E = Segment(-1, 1)
    h = pot.holder_fit(SegmentGreen(-1, 1), E.boundary_sample(1024), E)
    assert h.alpha == 0.5
    # oracle: sup_t g(1 + t)/sqrt(t) = sqrt(2), the limit as t -> 0
    t = np.logspace(-10, 0, 2000)
    oracle = float(np.max(np.log(1 + t + np.sqrt(t * t + 2 * t)) / np.sqrt(t)))
    assert oracle == pytest.approx(math.sqrt(2), rel=1e-4)
    assert oracle <= h.A <= 1.1 * oracle


def test_holder_persists_on_sublevels():
    # the (A, alpha) fitted for E validates on samples around E_eps
    E = Segment(-1, 1)
    g = SegmentGreen(-1, 1)
    h = pot.holder_fit(g, E.boundary_sample(1024), E)
    eps = 0.3
    W = pot.sublevel_set(E, g, eps)
    gW = pot.default_green(W)
    rng = np.random.default_rng(1)
    base = W.boundary_sample(512).points
    d = np.logspace(-5, -1, 20)
    ang = np.exp(2j * np.pi * rng.uniform(size=(base.size, d.size)))
    z = base[:, None] + d[None, :] * ang
    dist = W.dist(z.ravel()).reshape(z.shape)
    vals = gW(z.ravel()).reshape(z.shape)
    ok = dist > 0
    assert np.all(vals[ok] <= h.A * dist[ok] ** h.alpha * (1 + 1e-9))


def test_markov_examples():
    assert pot.markov_continuum(4, 1.0) == pytest.approx(2**-0.75 * 16, rel=1e-12)
    assert pot.markov_continuum(4, 1.0) == pytest.approx(9.5137, abs=1e-4)
    assert pot.markov_bound(Disk(0, 1), DiskGreen(0, 1), 5) == 5
    assert pot.markov_continuum(5, 1.0) == pytest.approx(14.36, abs=1e-2)
    assert pot.markov_continuum(1, 0.5) == pytest.approx(2.0)


def test_markov_disconnected_flagged():
    E = UnionOfDisks((Disk(-2, 0.5), Disk(2, 0.5)))
    with pytest.warns(pot.NotContinuum):
        pot.markov_bound(E, pot.default_green(E), 4)


def test_ls_disk_analytic():
    ls = pot.ls_bound_data(Disk(0, 1), DiskGreen(0, 1))
    assert ls.beta == 1
    assert ls.B == pytest.approx(math.log(2), abs=1e-12)
    d = np.linspace(1e-6, 1, 1000)
    assert np.all(np.log1p(d) >= ls.B * d - 1e-15)


def test_ls_segment_and_preimage():
    for E in [Segment(-1, 1), PolyPreimage(ComplexPoly([0, 0, 1]))]:
        g = pot.default_green(E)
        ls = pot.ls_bound_data(E, g)
        assert ls.beta == 1
        rng = np.random.default_rng(3)
        z = E.boundary_sample(256).points[rng.integers(0, 256, 2000)] + \
            rng.uniform(0, 1, 2000) * np.exp(2j * np.pi * rng.uniform(size=2000))
        assert pot.validate_ls(E, g, ls, z)


def test_dynamical_green_matches_log_plus():
    g = DynamicalGreen(ComplexPoly([0, 0, 1]))
    x = np.linspace(-3, 3, 121)
    z = (x[:, None] + 1j * x[None, :]).ravel()
    z = z[(np.abs(np.abs(z) - 1) > 1e-3) & (z != 0)]
    expected = np.maximum(0, np.log(np.abs(z)))
    np.testing.assert_allclose(g(z), expected, atol=1e-9)


def test_dynamical_capacity_from_lead():
    g = DynamicalGreen(ComplexPoly([0, 0, 4]))
    assert pot.capacity(g) == pytest.approx(0.25)


@pytest.mark.parametrize("E,cap", [
    (Disk(0, 1), 1.0),
    (Segment(-1, 1), 0.5),
    (Polygon([(0, 0), (1, 0), (1, 1), (0, 1)]), SQUARE_CAP),
], ids=["disk", "segment", "square"])
def test_charge_model_capacity(E, cap):
    g = ChargeGreen(E)
    assert pot.capacity(g) == pytest.approx(cap, rel=2e-3)
    inside = E.boundary_sample(64).points
    assert np.max(np.abs(g(inside))) < 1e-9


def test_charge_model_union_hull():
    # two tangent unit disks: the charge model must be zero on both and positive outside
    E = UnionOfDisks((Disk(-1, 1), Disk(1, 1)))
    g = pot.default_green(E)
    assert g(np.array([0.0, -1.0, 1.5]))[0] == 0
    assert g(np.array([3.0]))[0] > 0


@pytest.mark.parametrize("model,scale", [
    (DiskGreen(0.5, 2.0), 2.5),
    (SegmentGreen(-1, 1j), 2.0),
    (PreimageGreen(ComplexPoly([-1, 0, 1])), 1.5),
], ids=["disk", "segment", "preimage"])
def test_harmonic_growth(model, scale):
    errs = []
    for R in (1e2, 1e3, 1e4):
        z = R * scale * np.exp(2j * np.pi * np.arange(16) / 16)
        errs.append(float(np.max(np.abs(model(z) - np.log(np.abs(z)) + math.log(pot.capacity(model))))))
    assert errs[0] >= errs[1] >= errs[2]
    assert errs[2] < 1e-3


@pytest.mark.parametrize("E", [Disk(0, 1), Segment(-1, 1), PolyPreimage(ComplexPoly([-1, 0, 1]))],
                         ids=["disk", "segment", "lemniscate"])
def test_sublevel_formula(E):
    # max(0, g_E - eps) is the Green function of E_eps: compare with a charge model of E_eps
    g = pot.default_green(E)
    eps = 0.25
    W = pot.sublevel_set(E, g, eps)
    gW = ChargeGreen(W, m=1024)
    x = np.linspace(-3, 3, 25)
    z = (x[:, None] + 1j * x[None, :]).ravel()
    far = W.dist(z) > gW.resolution
    np.testing.assert_allclose(gW(z[far]), np.maximum(0, g(z[far]) - eps), atol=1e-3)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-4, 4), y=st.floats(-4, 4))
def test_green_nonnegative_and_zero_on_set(x, y):
    z = np.array([complex(x, y)])
    for E in [Disk(0, 1), Segment(-1, 1), PolyPreimage(ComplexPoly([-1, 0, 1]))]:
        g = pot.default_green(E)
        v = float(g(z)[0])
        assert v >= 0
        if E.contains(z)[0]:
            assert v <= 1e-9


def test_probe_csv(tmp_path):
    path = tmp_path / "probes.csv"
    pot.write_probes_csv(DiskGreen(0, 1), np.array([2.0, 3j]), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "z_re,z_im,g"
    assert float(lines[1].split(",")[2]) == pytest.approx(math.log(2))

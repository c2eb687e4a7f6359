import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from juliapprox import dynamics as dyn
from juliapprox.geometry import Disk, Segment
from juliapprox.lagrange import deltas, lagrange_log
from juliapprox.nodes import discrete_fekete
from juliapprox.poly import ComplexPoly
from juliapprox.potential import HolderData

Z2 = ComplexPoly([0, 0, 1])
DISK_H = HolderData(1.0, 1.0, "analytic")


def test_escape_radius_examples():
    assert dyn.escape_radius(Z2) == 1
    assert dyn.effective_escape_radius(Z2) == pytest.approx(2)
    assert dyn.escape_radius(ComplexPoly([-1, 0, 1])) == pytest.approx(2)
    assert dyn.escape_radius(ComplexPoly([0, 0, 0, 0.5])) == pytest.approx(2)


coef = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(cs=st.lists(coef, min_size=2, max_size=6), lead=coef.filter(lambda c: abs(c) > 0.1))
def test_escape_doubling(cs, lead):
    P = ComplexPoly(np.array(cs + [lead]))
    R = dyn.effective_escape_radius(P)
    rng = np.random.default_rng(0)
    r = R * (1 + rng.exponential(2.0, 10000)) + 1e-9
    z = r * np.exp(2j * np.pi * rng.uniform(size=r.size))
    assert np.all(np.abs(P(z)) >= 2 * np.abs(z) * (1 - 1e-12))


def test_orbit_examples():
    assert dyn.bounded_orbit(Z2, 0.5).bounded
    o = dyn.bounded_orbit(Z2, 1.5)
    assert not o.bounded and o.k <= 3
    assert dyn.bounded_orbit(ComplexPoly([-1, 0, 1]), 0.0).bounded


def test_escape_time_vectorized_and_traps():
    z = np.array([0.5, 1.5, 3.0, 0.99j])
    k = dyn.escape_time(Z2, z, cap=200)
    assert k[0] == -1 and k[3] == -1
    assert k[1] >= 1 and k[2] == 0  # already outside the escape disk
    traps = dyn.attracting_traps(Z2)
    assert traps and traps[0][0] == 0
    np.testing.assert_array_equal(dyn.escape_time(Z2, z, 200, traps), k)


def test_raster_unit_disk():
    r = dyn.filled_julia_raster(Z2, (-2, 2, -2, 2), 256, 1000)
    assert abs(r.bounded_area() - math.pi) / math.pi < 0.02
    # boundary pixels lie within two pixel widths of the unit circle
    b = r.points(r.boundary)
    assert np.max(np.abs(np.abs(b) - 1)) <= 2 * r.pixel[0]


def test_raster_cap_sensitivity():
    a = dyn.filled_julia_raster(Z2, (-2, 2, -2, 2), 256, 100)
    b = dyn.filled_julia_raster(Z2, (-2, 2, -2, 2), 256, 1000)
    assert np.mean(a.bounded != b.bounded) < 0.005


def test_raster_window_warning():
    with pytest.warns(RuntimeWarning):
        dyn.filled_julia_raster(Z2, (-1, 1, -1, 1), 16)


def test_raster_threads_env(monkeypatch):
    monkeypatch.setenv("JULIA_APPROX_THREADS", "1")
    assert dyn.thread_count() == 1
    a = dyn.filled_julia_raster(ComplexPoly([-1, 0, 1]), (-3, 3, -3, 3), 64)
    monkeypatch.setenv("JULIA_APPROX_THREADS", "4")
    b = dyn.filled_julia_raster(ComplexPoly([-1, 0, 1]), (-3, 3, -3, 3), 64)
    assert np.array_equal(a.bounded, b.bounded)


def test_pgm(tmp_path):
    r = dyn.filled_julia_raster(Z2, (-2, 2, -2, 2), 32)
    path = tmp_path / "k.pgm"
    dyn.write_pgm(r, path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n32 32\n255\n")
    body = np.frombuffer(data[len(b"P5\n32 32\n255\n"):], dtype=np.uint8)
    assert set(np.unique(body)) <= {0, 128, 255}
    assert body.size == 32 * 32


def test_rate_general_example():
    h = HolderData(1.0, 1.0)
    t = dyn.t_n(h, 2.0, 10)
    assert t == pytest.approx(0.03 + 0.9 * math.log(11) + 0.3 * math.log(4), rel=1e-12)
    assert t == pytest.approx(2.6040, abs=1e-4)
    s = dyn.rate_s_general(h, 2.0, 10, 1.0, 1.5, 0.5)
    assert s == pytest.approx(t)
    assert 0.6 * math.log(5) == pytest.approx(0.9657, abs=1e-4)
    with pytest.raises(Exception):
        dyn.rate_s_general(h, 2.0, 10, 1.0, 1.5, 0.0)


def test_rate_general_asymptotics():
    h = HolderData(1.0, 1.0)
    n = 1000
    s = dyn.rate_s_general(h, 2.0, n, 1.0, 1.0, 1.0)
    assert s <= (3 * h.A + 12) * math.log(n + 1) / n


def test_rate_fekete_example():
    s, tau = dyn.rate_s_fekete(HolderData(1.0, 1.0), 2.0, 10)
    assert s == pytest.approx(0.03 + 0.9 * math.log(11) + 0.3 * math.log(5), rel=1e-12)
    assert s == pytest.approx(2.6709, abs=1e-4)
    assert tau == pytest.approx(0.3 * math.log(2.2), rel=1e-12)
    assert dyn.rate_s_fekete(HolderData(1.0, 1.0), 2.0, 2)[1] < 0


def test_conditions_disk_arithmetic():
    n = 32
    s, _ = dyn.rate_s_fekete(DISK_H, 2.0, n)
    theta = 4 ** (1 / 3)
    conds = dyn.check_conditions(n, s, DISK_H, theta, 1.0, 1.0, 1.0)
    om = 1 / n**2
    bn = 3 / n * math.log((n + 1) * theta)
    assert [c.ok for c in conds] == [om < s, bn + om <= s / 3, math.exp(n * s / 3) > 2,
                                     math.exp(-n * s / 3) <= 0.5]
    assert all(c.ok for c in conds)


def test_build_Pn_disk():
    n = 32
    E = Disk(0, 1)
    s, _ = dyn.rate_s_fekete(DISK_H, 2.0, n)
    nodes = discrete_fekete(E, n)
    ja = dyn.build_Pn(E, nodes, s, DISK_H, fekete=True)
    assert ja.P.degree == n + 1
    assert ja.j == 0
    z = np.array([0.3 + 0.1j, 1.7, -2j])
    sys = deltas(nodes.points)
    logL, _ = lagrange_log(sys, z, [0])
    expected = np.log(np.abs(z)) - n * s / 3 + logL[:, 0]
    np.testing.assert_allclose(ja.P.log_abs(z), expected, atol=1e-9)
    cert = dyn.certify_inclusions(ja, E, dyn.default_green(E), samples=1000)
    assert cert["passed"], cert["failures"]


def test_build_Pn_undersized():
    n = 4
    E = Disk(0, 1)
    with pytest.raises(dyn.PreconditionNotMet) as info:
        dyn.build_Pn(E, discrete_fekete(E, n), 0.3, DISK_H, fekete=True)
    assert 2 in info.value.failing


def test_user_n_too_small():
    with pytest.raises(dyn.PreconditionNotMet):
        dyn.build_with_shift(Disk(0, 1), 0.4, n=8)


def test_step_paths():
    ja, _ = dyn.build_with_shift(Disk(0, 1), 0.5)
    assert ja.step == "I" and ja.shift == 0
    ja, sd = dyn.build_with_shift(Segment(-1, 1), 0.6)
    assert ja.step == "II"
    assert "nodes on E_{s/2} level curve" in ja.notes
    # nodes sit on the level curve g = s/2 (a Bernstein ellipse)
    g = sd.green(ja.nodes.points)
    np.testing.assert_allclose(g, 0.3, atol=1e-6)
    ja, sd = dyn.build_with_shift(Disk(2, 1), 0.5)
    assert ja.step == "III" and ja.shift == 2
    assert sd.E.contains(0j)


def test_certificate_monotone_in_margin():
    E = Disk(0, 1)
    ja = dyn.approximate(E, 0.5, resolution=None, samples=300)
    assert ja.certificate["passed"]
    for margin in (0.05, 0.2):
        c = dyn.certify_inclusions(ja, E, dyn.default_green(E), samples=300, margin=margin)
        assert c["passed"]


def test_approximate_disk_offset_and_conjugation():
    ja = dyn.approximate(Disk(2, 1), 0.5, resolution=None, samples=200)
    assert ja.shift == 2 and ja.certificate["passed"]
    Q = dyn.conjugate_back(ComplexPoly([0, 0, 1]), 2.0)
    z = np.array([0.3, 2 + 1j])
    np.testing.assert_allclose(Q(z), (z - 2) ** 2 + 2)


def test_raster_bounded_within_escape_disk():
    ja = dyn.approximate(Disk(0, 1), 0.5, resolution=128, samples=200)
    R = dyn.effective_escape_radius(ja.P)
    pts = ja.raster.points()
    assert np.all(np.abs(pts) <= R)
    doc = ja.to_json()
    assert doc["degree"] == ja.n + 1
    assert len(doc["conditions"]) == 4

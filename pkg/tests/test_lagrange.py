import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from juliapprox import lagrange as lg
from juliapprox.geometry import Disk, Segment
from juliapprox.nodes import circle_leja, pseudo_leja
from juliapprox.potential import DiskGreen, HolderData, default_green

ROOTS4 = np.array([1, 1j, -1, -1j])
TRIPLE = np.array([-1.0, 0.0, 1.0])


def roots_of_unity(n):
    return np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))


def test_nodal_eval_examples():
    assert lg.nodal_eval(np.array([1, -1]), 1j).log_abs == pytest.approx(math.log(2))
    assert lg.nodal_eval(np.array([1, -1]), 1.0).log_abs == -np.inf
    assert lg.nodal_eval(ROOTS4, 2.0).log_abs == pytest.approx(math.log(15))


def test_deltas_examples():
    s = lg.deltas(ROOTS4)
    np.testing.assert_allclose(np.exp(s.log_delta), 4, rtol=1e-14)
    assert s.j_n == 0
    s = lg.deltas(TRIPLE)
    np.testing.assert_allclose(np.exp(s.log_delta), [2, 1, 2], rtol=1e-14)
    assert s.j_n == 1
    s = lg.deltas(np.array([0.3, 2 - 1j]))
    np.testing.assert_allclose(np.exp(s.log_delta), abs(0.3 - (2 - 1j)))


def test_degenerate_nodes():
    with pytest.raises(lg.DegenerateNodes):
        lg.deltas(np.array([1.0, 1.0, 2.0]))
    with pytest.raises(lg.DegenerateNodes):
        lg.deltas(np.array([1.0]))


def test_vandermonde_examples():
    assert lg.vandermonde_log(ROOTS4) == pytest.approx(math.log(16))
    assert lg.vandermonde_log(TRIPLE) == pytest.approx(math.log(2))
    assert lg.vandermonde_log(np.array([0, 3j])) == pytest.approx(math.log(3))


def test_lagrange_eval_examples():
    s = lg.deltas(TRIPLE)
    v, lm = lg.lagrange_eval(s, 1, np.array([0.5]))
    assert v[0] == pytest.approx(0.75)
    assert lm.log_abs[0] == pytest.approx(math.log(0.75))
    for j in range(3):
        vals, _ = lg.lagrange_eval(s, j, TRIPLE)
        np.testing.assert_array_equal(vals, np.eye(3)[j])


def test_lebesgue_examples():
    s = lg.deltas(np.array([-1.0, 1.0]))
    x = np.linspace(-1, 1, 101)
    np.testing.assert_allclose(lg.lebesgue_function(s, x), 1.0, atol=1e-15)
    s = lg.deltas(TRIPLE)
    np.testing.assert_allclose(lg.lebesgue_function(s, TRIPLE), 1.0)
    x = np.linspace(-1, 1, 200001)
    assert lg.lebesgue_constant(s, x).value == pytest.approx(1.25, abs=1e-9)
    s = lg.deltas(ROOTS4)
    rep = lg.lebesgue_constant(s, Disk(0, 1).boundary_sample(4096), Disk(0, 1).boundary_sample(8192))
    assert rep.value >= 1
    assert abs(rep.value - rep.refined) < 1e-3


def test_lebesgue_delta_roots_examples():
    mesh = Disk(0, 1).boundary_sample(4096)
    lam, mn = lg.lebesgue_delta_roots(lg.deltas(ROOTS4), mesh, 1.0)
    assert mn == pytest.approx(4 ** (1 / 3))
    for n in (4, 8, 16, 32):
        s = lg.deltas(roots_of_unity(n))
        assert lg.lebesgue_delta_roots(s, mesh, 1.0)[1] == pytest.approx((n + 1) ** (1 / n), rel=1e-12)
        assert lg.max_delta_diagnostic(s, 1.0) == pytest.approx((n + 1) ** (1 / n), rel=1e-12)
    assert lg.max_delta_diagnostic(lg.deltas(TRIPLE), 0.5) == pytest.approx(math.sqrt(2) / 0.5)


def test_lebesgue_delta_roots_trend_disk():
    E = Disk(0, 1)
    a = pseudo_leja(E, default_green(E), 64)
    mesh = E.boundary_sample(8192)
    rows = [lg.lebesgue_delta_roots(lg.deltas(a.prefix(n).points), mesh, 1.0) for n in (8, 16, 32, 64)]
    for i in range(3):
        for c in range(2):
            assert rows[i + 1][c] <= rows[i][c] * 1.1


def test_norm_Ln_examples():
    s = lg.deltas(TRIPLE)
    norm, root = lg.norm_Ln(s, np.linspace(-1, 1, 2001))
    assert s.j_n == 1
    assert norm == pytest.approx(1.0)
    roots = []
    for n in (8, 16, 32, 64):
        sys = lg.deltas(roots_of_unity(n))
        mesh = np.concatenate([Disk(0, 1).boundary_sample(8192).points, sys.nodes])
        nrm, rt = lg.norm_Ln(sys, mesh)
        assert nrm >= 1 - 1e-12  # attained at the node j_n
        roots.append(rt)
    assert all(roots[i + 1] <= roots[i] + 1e-12 for i in range(3))


def test_bounds_examples():
    E = Disk(0, 1)
    theta = 4 ** (1 / 3)
    h = HolderData(1.0, 1.0)
    s = lg.deltas(ROOTS4)
    rep = lg.bounds_check(s, DiskGreen(0, 1), h, np.array([2.0]), E, theta, fekete=True)
    diff = math.log(2) - math.log(abs(lg.lagrange_eval(s, 0, np.array([2.0]))[0][0])) / 3
    assert rep.diff[0] == pytest.approx(diff)
    assert 0 <= diff <= math.log(4 * theta) + 1 / 9
    assert rep.violations == 0
    assert lg.bounds_upper(10, 1.5874, h) == pytest.approx(0.8679, abs=1e-4)
    with pytest.raises(lg.OutsideDn):
        lg.bounds_check(s, DiskGreen(0, 1), h, np.array([1.01]), E, theta, fekete=True)


def test_bounds_limit_at_infinity():
    # g(z) - (1/n) log|L(z)| -> log(|Delta_j|^(1/n) / cap) as z -> infinity
    E = Segment(-1, 1)
    a = pseudo_leja(E, default_green(E), 16)
    s = lg.deltas(a.points)
    z = np.array([1e6, 1e6j])
    logL, _ = lg.lagrange_log(s, z, [s.j_n])
    diff = default_green(E)(z) - logL[:, 0] / s.n
    np.testing.assert_allclose(diff, s.log_delta[s.j_n] / s.n - math.log(0.5), atol=1e-5)


def test_diagnostics_csv(tmp_path):
    E = Disk(0, 1)
    mesh = E.boundary_sample(1024)
    rows = [lg.diagnostic_row(lg.deltas(roots_of_unity(n)), mesh, 1.0) for n in (4, 8)]
    path = tmp_path / "d.csv"
    lg.write_diagnostics_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("n,lebesgue_const")
    assert len(lines) == 3


FAMILIES = {
    "circle": lambda n: circle_leja(n).points,
    "roots": roots_of_unity,
    "segment_leja": lambda n: pseudo_leja(Segment(-1, 1), default_green(Segment(-1, 1)), n).points,
    "chebyshev": lambda n: np.cos(np.pi * np.arange(n + 1) / n),
}


@settings(max_examples=30, deadline=None)
@given(fam=st.sampled_from(sorted(FAMILIES)), n=st.integers(2, 64),
       x=st.floats(-4, 4), y=st.floats(-4, 4))
def test_partition_of_unity(fam, n, x, y):
    s = lg.deltas(FAMILIES[fam](n))
    tot, lam = lg.lagrange_sum(s, np.array([complex(x, y)]))
    assert abs(tot[0] - 1) <= 1e-9 * max(1.0, lam[0])


@settings(max_examples=30, deadline=None)
@given(fam=st.sampled_from(sorted(FAMILIES)), n=st.integers(2, 32))
def test_delta_product_equals_vandermonde_squared(fam, n):
    pts = FAMILIES[fam](n)
    s = lg.deltas(pts)
    iu = np.triu_indices(pts.size, 1)
    logv = np.sum(np.log(np.abs(pts[iu[0]] - pts[iu[1]])))
    assert abs(np.sum(s.log_delta) - 2 * logv) <= 1e-9 * max(1, abs(logv))


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 16), m=st.integers(0, 16))
def test_interpolation_exactness(n, m):
    m = min(m, n)
    s = lg.deltas(np.cos(np.pi * np.arange(n + 1) / n))
    z = np.array([0.3 + 0.2j, -0.7, 0.9j])
    logL, ph = lg.lagrange_log(s, z)
    L = np.exp(logL) * ph
    interp = L @ (s.nodes**m)
    np.testing.assert_allclose(interp, z**m, atol=1e-8 * max(1.0, float(np.max(np.abs(s.nodes) ** m))))

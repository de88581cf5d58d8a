import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nhrmt.errors import ParameterError
from nhrmt.nlsm import (
    QuadratureResult,
    arcsine_vandermonde_integral,
    laguerre_vandermonde_quad,
    selberg_laguerre,
    write_quadrature_csv,
    z1_integral_aidag,
    z1_integral_aiidag,
    z1_integral_aiidag_grid,
    z1_normalized,
    z2_integral_aidag,
    z2_integral_aiidag,
    z2_normalized,
)


def test_aidag_one_point_examples():
    assert z1_integral_aidag(1, 1, 2.0, 0.0).value == pytest.approx(2.0, rel=1e-13)
    ratio = z1_integral_aidag(1, 1, 2.0, 1.0).value / z1_integral_aidag(1, 1, 2.0, 0.0).value
    assert ratio == pytest.approx(1.5, rel=1e-13)
    assert z1_integral_aidag(0, 5, 1.0, 3.0).value == 1.0


@pytest.mark.parametrize("zsq", [0.0, 0.3, 2.0, 7.5])
def test_aidag_n1_n1_linear_ratio(zsq):
    ratio = z1_integral_aidag(1, 1, 2.0, zsq).value / z1_integral_aidag(1, 1, 2.0, 0.0).value
    assert ratio == pytest.approx((zsq + 2) / 2, rel=1e-13)


@pytest.mark.parametrize("n,N", [(1, 2), (2, 5), (3, 10), (4, 7)])
def test_aidag_exact_under_extra_nodes(n, N):
    for zsq in (0.0, 1.0, 9.0):
        r = z1_integral_aidag(n, N, 1.3, zsq)
        assert abs(r.rel_error_est) < 1e-12
        assert r.method == "tensor_gauss" and r.abs_error_est >= 0
        assert np.isfinite(r.value)


def test_parameter_errors():
    with pytest.raises(ParameterError):
        z1_integral_aidag(5, 2, 1.0, 0.0)
    with pytest.raises(ParameterError):
        z1_integral_aiidag(3, 2, 0.0)
    with pytest.raises(ParameterError):
        z2_integral_aidag(4, 1.0)
    with pytest.raises(ParameterError):
        z2_integral_aiidag(3, 1.0)
    with pytest.raises(ParameterError):
        selberg_laguerre(2, 1.0, 0.5, 1)
    with pytest.raises(ParameterError):
        selberg_laguerre(2, 1.0, 1.0, 2)
    with pytest.raises(ParameterError):
        z1_normalized("A", 1, 2, 1.0, [0.0])


def test_selberg_examples():
    assert selberg_laguerre(1, 1.0, -0.5, 1) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert selberg_laguerre(1, 1.0, 1.0, 4) == pytest.approx(1.0, rel=1e-14)


def test_selberg_m2_closed_form_vs_quadrature():
    q = laguerre_vandermonde_quad(2, 1.0, -0.5, 1)
    assert q.value == pytest.approx(selberg_laguerre(2, 1.0, -0.5, 1), rel=1e-6)


def test_selberg_closed_form_half_alpha_formula():
    # t^{-m^2/2} Gamma(3/2)^{-m} prod_k Gamma(k/2) Gamma(1 + k/2)
    for m in (1, 2, 3):
        for t in (0.5, 1.0, 2.0):
            prod = math.prod(math.gamma(k / 2) * math.gamma(1 + k / 2) for k in range(1, m + 1))
            expected = t ** (-m * m / 2) * prod / math.gamma(1.5) ** m
            assert selberg_laguerre(m, t, -0.5, 1) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
@pytest.mark.parametrize("beta", [1, 4])
def test_selberg_cross_checks(alpha, beta):
    for m in (1, 2, 3):
        for t in (0.5, 1.0, 2.0):
            q = laguerre_vandermonde_quad(m, t, alpha, beta)
            assert q.value == pytest.approx(selberg_laguerre(m, t, alpha, beta), rel=1e-8)


@pytest.mark.parametrize("m", [2, 3])
def test_ordered_and_tensor_routes_agree(m):
    for shift, power in ((0.0, 0), (0.7, 3)):
        a = laguerre_vandermonde_quad(m, 1.0, 1.0, 4, shift, power, method="tensor_gauss")
        b = laguerre_vandermonde_quad(m, 1.0, 1.0, 4, shift, power, method="ordered_simplex_adaptive")
        assert b.value == pytest.approx(a.value, rel=1e-8)


def test_aiidag_one_point_n0_equals_selberg():
    r = z1_integral_aiidag(1, 0, 3.0)
    assert r.value == pytest.approx(selberg_laguerre(2, 1.0, -0.5, 1), rel=1e-9)
    assert z1_integral_aiidag(0, 3, 1.0).value == 1.0


@pytest.mark.parametrize("x", [0.0, 0.5, 2.0, 6.0])
def test_aiidag_one_point_n1_exact(x):
    # N = 1: H = a I_2 and E|z - a|^4 = |z|^4 + 2g|z|^2 + g^2/2, x = |z|^2/g
    ratio = z1_integral_aiidag(1, 1, x).value / z1_integral_aiidag(1, 1, 0.0).value
    assert ratio == pytest.approx(2 * x * x + 4 * x + 1, rel=1e-9)


def test_aiidag_grid_matches_pointwise():
    zsq = np.array([0.0, 1.0, 4.0])
    grid = z1_integral_aiidag_grid(1, 3, zsq)
    for x, r in zip(zsq, grid):
        assert r.value == pytest.approx(z1_integral_aiidag(1, 3, x).value, rel=1e-9)
        assert r.converged


def test_normalized_ratio_at_zero_is_one():
    for cls in ("AIdagger", "AIIdagger"):
        assert z1_normalized(cls, 1, 2, 1.5, [0.0])[0] == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(
    n=st.integers(1, 3),
    N=st.integers(1, 12),
    g=st.floats(0.2, 5.0),
    a=st.floats(0.0, 10.0),
    b=st.floats(0.0, 10.0),
)
def test_aidag_ratio_monotone_in_zsq(n, N, g, a, b):
    lo, hi = sorted((a, b))
    va = z1_integral_aidag(n, N, g, lo).log_value
    vb = z1_integral_aidag(n, N, g, hi).log_value
    assert vb >= va - 1e-12


def test_aiidag_ratio_monotone_in_zsq():
    zsq = np.linspace(0, 4, 9)
    v = [r.log_value for r in z1_integral_aiidag_grid(2, 3, zsq)]
    assert np.all(np.diff(v) > 0)


def test_two_point_aidag_examples():
    assert z2_integral_aidag(1, 0.0).value == pytest.approx(1 / 6, rel=1e-13)
    assert z2_integral_aidag(0, 2.0).value == 1.0


def test_two_point_aidag_n1_closed_form():
    # int_0^1 l(1-l) e^{-c l} dl with c = 2 w^2, times e^{w^2}
    for w2 in (0.25, 1.0, 4.0, 30.0):
        c = 2 * w2
        core, _ = integrate.quad(lambda l: l * (1 - l) * math.exp(-c * l), 0, 1, epsabs=0, epsrel=1e-13)
        assert z2_integral_aidag(1, w2).value == pytest.approx(math.exp(w2) * core, rel=1e-11)


def test_two_point_aidag_n2_vs_scipy():
    c = 2.0
    core, _ = integrate.dblquad(
        lambda y, x: x * (1 - x) * y * (1 - y) * math.exp(-c * (x + y)) * (x - y) ** 4,
        0, 1, 0, 1, epsabs=0, epsrel=1e-11,
    )
    assert z2_integral_aidag(2, 1.0).value == pytest.approx(math.exp(2.0) * core, rel=1e-9)


def test_arcsine_examples():
    assert arcsine_vandermonde_integral(1, 0.0).value == pytest.approx(math.pi, rel=1e-12)
    assert z2_integral_aiidag(0, 1.0).value == 1.0


def test_arcsine_m2_at_zero_vs_scipy():
    val, _ = integrate.dblquad(
        lambda b, a: 4 * abs(math.sin(a) ** 2 - math.sin(b) ** 2), 0, math.pi / 2, 0, math.pi / 2,
        epsabs=0, epsrel=1e-9,
    )
    assert val == pytest.approx(4.0, rel=1e-8)
    assert arcsine_vandermonde_integral(2, 0.0).value == pytest.approx(val, rel=1e-8)


@pytest.mark.parametrize("t", [200.0, 1000.0])
def test_arcsine_large_t_approaches_selberg(t):
    ratio = arcsine_vandermonde_integral(2, t).value / selberg_laguerre(2, t, -0.5, 1)
    assert 0 < ratio - 1 < 2 / t


def test_arcsine_m4_converges():
    r = arcsine_vandermonde_integral(4, 3.0)
    assert r.converged and r.rel_error_est < 1e-8


def test_two_point_normalized_starts_at_one_and_decays_gaussian_factor():
    for cls, n in (("AIdagger", 2), ("AIIdagger", 1)):
        v = z2_normalized(cls, n, 1.0, [0.0, 0.5, 1.0])
        assert v[0] == pytest.approx(1.0, rel=1e-12)
        assert np.all(np.isfinite(v)) and np.all(v > 0)


def test_two_point_prefactor_convention():
    a = z2_integral_aiidag(1, 0.8, zsq=0.3, g=2.0)
    core = arcsine_vandermonde_integral(2, 0.4)
    assert a.log_value == pytest.approx(core.log_value + 4 * 0.3 / 2 + 0.8 / 2, rel=1e-13)


def test_quadrature_result_invariants_and_csv(tmp_path):
    rs = [z1_integral_aidag(1, 2, 1.0, x) for x in (0.0, 1.0)]
    for r in rs:
        assert np.isfinite(r.value) and r.abs_error_est >= 0
    p = tmp_path / "q.csv"
    write_quadrature_csv(p, [0.0, 1.0], rs)
    lines = p.read_text().splitlines()
    assert lines[0] == "argument,value,abs_error_est,method,nodes"
    assert len(lines) == 3
    assert QuadratureResult.unit().value == 1.0

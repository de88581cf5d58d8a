import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from nhrmt.asymptotics import (
    OutOfRegimeWarning,
    density_in_edge_units,
    dos_edge,
    edge_coordinate,
    r2_bulk,
    r2_from_smalln,
    r2_small,
    surmise_cdf,
    surmise_mean,
    surmise_spacing,
    yn_smalln,
)
from nhrmt.errors import ParameterError

CLASSES = ["A", "AIdagger", "AIIdagger"]


def test_edge_limits():
    assert dos_edge("AIdagger", 1e4, 500) == pytest.approx(1.0, abs=1e-8)
    assert dos_edge("AIIdagger", 1e4, 500) == pytest.approx(2.0, abs=1e-8)


def test_edge_errors():
    with pytest.raises(ParameterError):
        dos_edge("AIdagger", 0.0, 10)
    with pytest.raises(ParameterError):
        dos_edge("AIdagger", [1.0, -0.5], 10)
    with pytest.raises(ParameterError):
        dos_edge("A", 1.0, 10)


@settings(max_examples=50, deadline=None)
@given(u=st.floats(1 / math.sqrt(2), 50.0), N=st.integers(1, 10**6))
def test_aidag_edge_below_bulk(u, N):
    assert dos_edge("AIdagger", u, N) < 1.0


@settings(max_examples=50, deadline=None)
@given(u=st.floats(1.5, 50.0), N=st.integers(1, 10**6))
def test_aiidag_edge_above_bulk(u, N):
    assert dos_edge("AIIdagger", u, N) > 2.0


def test_aiidag_edge_overshoot_value():
    u = 2.0
    expected = 2 + 1 / 16 - math.sqrt(2 * math.pi) * math.exp(-8) * (2 + 1 / 8 + 1 / 64) - math.exp(-16) / (64 * math.sqrt(math.pi))
    assert dos_edge("AIIdagger", u, 100) == pytest.approx(expected, rel=1e-14)


def test_edge_unit_conversion():
    # |z| and u scale as sqrt(g); densities as 1/g
    ec = edge_coordinate("AIdagger", [0.0, 2.0], 100, 1.0)
    assert ec.g_convention == 2.0
    assert np.allclose(ec.u, [10.0, 10.0 - 2.0 * math.sqrt(2)])
    assert density_in_edge_units("AIIdagger", 1.0, 2.0) == pytest.approx(2.0)
    assert density_in_edge_units("AIdagger", 1.0, 2.0) == pytest.approx(1.0)


def test_r2_bulk_values():
    assert r2_bulk("AIIdagger", 1.0) == pytest.approx(4 - math.pi / math.e, rel=1e-14)
    assert r2_bulk("AIIdagger", 1.0) == pytest.approx(2.8443, abs=1e-4)
    assert r2_bulk("AIdagger", 1.0) == pytest.approx(4 * (1 - math.exp(-2)), rel=1e-14)
    assert r2_bulk("AIdagger", 1.0) == pytest.approx(3.4587, abs=1e-4)
    assert r2_bulk("AIdagger", 50.0) == pytest.approx(4.0, rel=1e-14)
    assert r2_bulk("AIIdagger", 3.0, g=2.0) == pytest.approx((4 - math.pi * 4.5 * math.exp(-4.5)) / 4, rel=1e-14)


def test_r2_bulk_flags_out_of_regime():
    with pytest.warns(OutOfRegimeWarning):
        r2_bulk("AIdagger", 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r2_bulk("AIdagger", 1.5)


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_r2_bulk_deviation_decays(g):
    w = np.sqrt(g * np.array([4.0, 9.0, 16.0, 25.0]))
    nu = w**2 / g
    dev_ai = np.abs(r2_bulk("AIdagger", w, g) - 4 / g**2)
    dev_aii = np.abs(r2_bulk("AIIdagger", w, g) - 4 / g**2)
    assert np.all(dev_ai <= 4 / g**2 * np.exp(-2 * nu) / nu**2 * (1 + 1e-9) + 1e-14)
    assert np.all(dev_aii <= math.pi / g**2 * nu * np.exp(-nu) * (1 + 1e-9) + 1e-14)


def test_yn_smalln_examples():
    c1, c2 = yn_smalln("AIdagger", 1.0)
    assert c1 == 1.0
    assert c2 == pytest.approx(0.5 - math.exp(-2) / 4, rel=1e-14)
    assert c2 == pytest.approx(0.46617, abs=1e-5)
    with pytest.raises(ParameterError):
        yn_smalln("AIdagger", 0.0)


def test_yn_smalln_alt_sign_flips_one_term():
    nu = 1.7
    for cls, term in (("AIdagger", math.exp(-2 * nu) / (4 * nu**4)), ("AIIdagger", math.pi * math.exp(-nu) / nu)):
        _, a = yn_smalln(cls, nu)
        _, b = yn_smalln(cls, nu, alt_sign=True)
        assert abs(a - b) == pytest.approx(2 * term, rel=1e-12)


def _fd_biharmonic(f, r, h):
    """(1/16) Delta^2 of F(x, y) = f(x^2 + y^2) at (r, 0), 13-point stencil."""
    F = lambda x, y: f(x * x + y * y)  # noqa: E731
    x, y = r, 0.0
    s = 20 * F(x, y)
    s -= 8 * (F(x + h, y) + F(x - h, y) + F(x, y + h) + F(x, y - h))
    s += 2 * (F(x + h, y + h) + F(x + h, y - h) + F(x - h, y + h) + F(x - h, y - h))
    s += F(x + 2 * h, y) + F(x - 2 * h, y) + F(x, y + 2 * h) + F(x, y - 2 * h)
    return s / h**4 / 16


@pytest.mark.parametrize("cls", ["AIdagger", "AIIdagger"])
@pytest.mark.parametrize("w", [1.5, 2.0])
@pytest.mark.parametrize("alt", [False, True])
def test_biharmonic_of_c2_matches_finite_differences(cls, w, alt):
    c2 = lambda nu: yn_smalln(cls, nu, alt)[1]  # noqa: E731
    a = _fd_biharmonic(c2, w, 0.02)
    b = _fd_biharmonic(c2, w, 0.01)
    fd = b + (b - a) / 3  # Richardson on the O(h^2) error
    assert fd == pytest.approx(r2_from_smalln(cls, w * w, alt) - 2, abs=5e-5)


@pytest.mark.parametrize("cls", ["AIdagger", "AIIdagger"])
def test_smalln_reproduces_bulk_to_leading_order(cls):
    # the gap to r2_bulk is subleading relative to the bulk deviation from 4
    nu = np.array([4.0, 6.0, 8.0, 10.0, 12.0])
    w = np.sqrt(nu)
    gap = np.abs(r2_from_smalln(cls, nu) - r2_bulk(cls, w))
    if cls == "AIdagger":
        dev = 4 * np.exp(-2 * nu) / nu**2
        # leading relative correction 6/nu from differentiating nu^-4
        limit = 6.0
    else:
        dev = math.pi * nu * np.exp(-nu)
        # leading relative correction 2/nu^2
        limit = 2.0
        nu = nu**2
    ratio = gap / dev
    assert np.all(np.diff(ratio) < 0)
    assert np.all(ratio * nu > limit)
    assert np.all(np.diff(ratio * nu) < 0)


def test_smalln_plateau():
    assert r2_from_smalln("AIdagger", 60.0) == pytest.approx(4.0, abs=1e-12)
    assert r2_from_smalln("AIIdagger", 60.0) == pytest.approx(4.0, abs=1e-12)


def test_r2_small_values():
    assert r2_small("A", 0.5) == pytest.approx(8 / math.pi / math.e, rel=1e-14)
    assert r2_small("A", 0.5) == pytest.approx(0.9368, abs=1e-4)
    for cls in CLASSES:
        assert r2_small(cls, 0.0) == 0.0
        assert r2_small(cls, 1e-8) < 1e-12


@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_r2_small_aidag_log_behaviour(C):
    r = np.array([1e-4, 1e-3, 1e-2])
    approx = -(2 / math.pi) * 16 * C**4 * r**2 * np.log(4 * C**2 * r**2)
    assert np.allclose(r2_small("AIdagger", r, C) / approx, 1, atol=0.1)
    # the ratio approaches 1 as r shrinks
    ratio = r2_small("AIdagger", r, C) / approx
    assert np.all(np.diff(np.abs(ratio - 1)) > 0)


@pytest.mark.parametrize("cls", CLASSES)
@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_surmise_normalized(cls, C):
    total, _ = integrate.quad(lambda s: surmise_spacing(cls, s, C), 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)
    mean, _ = integrate.quad(lambda s: s * surmise_spacing(cls, s, C), 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    assert mean == pytest.approx(surmise_mean(cls, C), rel=1e-8)


@pytest.mark.parametrize("cls", CLASSES)
def test_surmise_cdf_matches_quadrature(cls):
    for s in (0.3, 1.0, 2.2):
        v, _ = integrate.quad(lambda x: surmise_spacing(cls, x, 1.3), 0, s, epsabs=1e-14, epsrel=1e-12)
        assert surmise_cdf(cls, s, 1.3) == pytest.approx(v, abs=1e-10)
    assert surmise_cdf(cls, 0.0) == 0.0
    assert surmise_cdf(cls, 40.0) == pytest.approx(1.0, abs=1e-12)


def test_surmise_point_values():
    assert surmise_spacing("AIdagger", 1.0) == pytest.approx(2 * special.k0(1.0), rel=1e-14)
    assert surmise_spacing("AIdagger", 1.0) == pytest.approx(0.8421, abs=1e-4)
    assert surmise_spacing("A", 1.0) == pytest.approx(2 / math.e, rel=1e-14)
    for cls in CLASSES:
        assert surmise_spacing(cls, 0.0) == 0.0


@pytest.mark.parametrize("cls", CLASSES)
@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_inversion_identity(cls, C):
    r = np.linspace(0.01, 3.0, 200) / C
    lhs = surmise_spacing(cls, 2 * r, C)
    rhs = math.pi * r / 2 * r2_small(cls, r, C)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=0)


def test_k0_accuracy_over_range():
    x = np.geomspace(1e-6, 690, 400)
    # K0 via its integral representation int_0^inf exp(-x cosh t) dt
    for xv in x[::40]:
        # scaled by e^x: int_0^inf exp(-2 x sinh^2(t/2)) dt
        ref, _ = integrate.quad(
            lambda t: math.exp(-2 * xv * math.sinh(min(t, 60.0) / 2) ** 2), 0, np.inf, epsabs=0, epsrel=1e-13, limit=200
        )
        s = math.sqrt(xv)
        ours = surmise_spacing("AIdagger", s) / (2 * s**3) * math.exp(xv)
        assert ours == pytest.approx(ref, rel=1e-12)


def test_surmise_errors():
    with pytest.raises(ParameterError):
        surmise_spacing("A", -1.0)
    with pytest.raises(ParameterError):
        surmise_spacing("A", 1.0, C=0.0)
    with pytest.raises(ParameterError):
        r2_small("A", 1.0, C=-1.0)

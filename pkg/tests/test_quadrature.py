import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite import hermgauss
from scipy import integrate as sint

from qhopfield.errors import NonFiniteIntegrandError
from qhopfield.quadrature import (
    build_grid,
    build_panel_grid,
    integrate,
    inverse_erf,
    normal_cdf,
    normal_pdf,
)


def test_two_point_rule():
    g = build_grid(2)
    np.testing.assert_allclose(g.nodes, [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(g.weights, [0.5, 0.5], atol=1e-14)


@pytest.mark.parametrize("order", [2, 3, 10, 64, 101, 201, 401])
def test_grid_invariants(order):
    g = build_grid(order)
    assert g.order == order == len(g)
    assert abs(g.weights.sum() - 1.0) < 1e-12
    np.testing.assert_array_equal(g.nodes, -g.nodes[::-1])
    np.testing.assert_array_equal(g.weights, g.weights[::-1])
    assert abs(g.weights @ g.nodes**2 - 1.0) < 1e-10


def test_odd_order_contains_zero():
    g = build_grid(101)
    assert g.nodes[50] == 0.0


def test_fourth_moment_order_64():
    g = build_grid(64)
    assert abs(g.weights @ g.nodes**4 - 3.0) < 1e-9


@pytest.mark.parametrize("order", [5, 20, 64])
def test_matches_numpy_hermgauss(order):
    # physicists' rule mapped to the normal measure: t = √2 x, w = w_H / √π
    x, w = hermgauss(order)
    g = build_grid(order)
    np.testing.assert_allclose(g.nodes, np.sqrt(2.0) * x, atol=1e-11)
    # the smallest weights underflow relative accuracy in both constructions
    np.testing.assert_allclose(g.weights, w / np.sqrt(np.pi), rtol=1e-9, atol=1e-15)


def test_grid_is_read_only():
    g = build_grid(8)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


@pytest.mark.parametrize("bad", [1, 0, -3, 2.5])
def test_bad_order(bad):
    with pytest.raises(ValueError):
        build_grid(bad)


def test_integrate_basics():
    g = build_grid(101)
    assert abs(integrate(g, lambda t: np.ones_like(t)) - 1.0) < 1e-12
    assert abs(integrate(g, lambda t: t**2) - 1.0) < 1e-10
    # scalar-only callables are accepted too
    assert abs(integrate(g, lambda t: math.cos(t)) - math.exp(-0.5)) < 1e-12


def test_half_gaussian_mean():
    # the kink at t = 0 limits a plain Hermite rule to O(1/n): the error at
    # order 128 is 1.285e-3, identical to numpy's independent construction
    exact = 1.0 / math.sqrt(2.0 * math.pi)
    g = build_grid(128)
    x, w = hermgauss(128)
    val = integrate(g, lambda t: t * (t > 0))
    ref = (w / np.sqrt(np.pi)) @ (np.sqrt(2.0) * x * (x > 0))
    assert abs(val - ref) < 1e-13
    assert abs(val - exact) < 2e-3
    errs = [abs(integrate(build_grid(n), lambda t: t * (t > 0)) - exact) for n in (128, 256, 1024)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-4
    # with a panel edge at the kink the same integral is exact
    panel = build_panel_grid(128, breakpoints=[0.0])
    assert abs(integrate(panel, lambda t: t * (t > 0)) - exact) < 1e-12


def test_nonfinite_integrand_reports_node():
    g = build_grid(11)
    with pytest.raises(NonFiniteIntegrandError) as err:
        integrate(g, lambda t: np.where(t > 2.0, np.inf, 0.0))
    assert err.value.node > 2.0


def test_moments_against_adaptive_quadrature():
    g = build_grid(64)
    for k in (2, 4, 6, 8):
        ref = sint.quad(lambda t: t**k * normal_pdf(t), -np.inf, np.inf, epsabs=1e-13)[0]
        assert abs(g.weights @ g.nodes**k - ref) < 1e-9 * ref


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), k=st.floats(0.1, 3.0))
def test_linearity(a, b, k):
    g = build_grid(51)

    def f(t):
        return np.tanh(k * t) ** 2

    def h(t):
        return np.exp(-0.1 * k * t * t)

    lhs = integrate(g, lambda t: a * f(t) + b * h(t))
    rhs = a * integrate(g, f) + b * integrate(g, h)
    assert abs(lhs - rhs) < 1e-12 * (1 + abs(a) + abs(b))


@settings(max_examples=40, deadline=None)
@given(k=st.floats(0.1, 5.0), shift=st.floats(-2, 2), order=st.integers(2, 150))
def test_odd_functions_vanish(k, shift, order):
    g = build_grid(order)
    assert abs(integrate(g, lambda t: np.sin(k * t) * np.cosh(shift * t / 4))) < 1e-12


def test_refinement_is_monotone_for_tanh():
    exact = sint.quad(lambda t: np.tanh(t + 0.3) ** 2 * normal_pdf(t), -40, 40,
                      epsabs=1e-15, epsrel=1e-14, limit=200)[0]
    errs = []
    for n in (4, 8, 16, 32, 64):
        errs.append(abs(integrate(build_grid(n), lambda t: np.tanh(t + 0.3) ** 2) - exact))
    diffs = [abs(integrate(build_grid(2 * n), lambda t: np.tanh(t + 0.3) ** 2)
                 - integrate(build_grid(n), lambda t: np.tanh(t + 0.3) ** 2)) for n in (4, 8, 16)]
    assert all(d1 > d2 for d1, d2 in zip(diffs, diffs[1:]))
    assert errs[-1] < 1e-8


def test_panel_grid_integrates_piecewise_functions():
    # a step at t = 0.7 is integrated exactly once it is a panel edge
    g = build_panel_grid(101, breakpoints=[0.7])
    val = integrate(g, lambda t: np.where(t < 0.7, t**2, 1.0))
    ref = (normal_cdf(0.7) - 0.7 * normal_pdf(0.7)) + (1.0 - normal_cdf(0.7))
    assert abs(val - ref) < 1e-13
    assert g.breakpoints == (0.7,)
    assert abs(g.weights.sum() - 1.0) < 1e-13


def test_panel_grid_moments():
    g = build_panel_grid(201)
    for k, ref in ((0, 1.0), (2, 1.0), (4, 3.0), (6, 15.0)):
        assert abs(g.weights @ g.nodes**k - ref) < 1e-12 * ref


def test_inverse_erf_basics():
    assert inverse_erf(0.0) == 0.0
    assert abs(inverse_erf(math.erf(1.0)) - 1.0) < 1e-12
    assert abs(math.sqrt(2.0) * inverse_erf(0.95) - 1.959964) < 1e-5


@pytest.mark.parametrize("y", [1e-12, 0.1, 0.5, 0.9, 0.95, 0.999, 0.9999, 1 - 1e-12])
def test_inverse_erf_high_precision(y):
    ref = float(mpmath.erfinv(mpmath.mpf(y)))
    assert abs(inverse_erf(y) - ref) <= 1e-12 * abs(ref)
    assert abs(inverse_erf(-y) + ref) <= 1e-12 * abs(ref)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-5.0, 5.0))
def test_inverse_erf_round_trip(x):
    y = math.erf(x)
    if abs(y) >= 1.0:
        return
    # relative accuracy in y translates to |dx| <= tol / erf'(x)
    assert abs(math.erf(inverse_erf(y)) - y) <= 1e-12 * max(abs(y), 1e-300) + 1e-16


@pytest.mark.parametrize("y", [1.0, -1.0, 1.5])
def test_inverse_erf_domain(y):
    with pytest.raises(ValueError):
        inverse_erf(y)

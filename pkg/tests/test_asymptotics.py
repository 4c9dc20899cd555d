import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import fresnel

from kreinlab import asymptotics as asy
from kreinlab.errors import DomainError, PreconditionError


def _oracle(x):
    s, c = fresnel(x * math.sqrt(2 / math.pi))
    return asy.H0 - math.sqrt(math.pi / 2) * complex(c, s)


def test_H0():
    v = asy.fresnel_H(0.0)
    assert abs(v - math.sqrt(math.pi) / 2 * (1 + 1j) / math.sqrt(2)) < 1e-10
    assert v.real == pytest.approx(0.626657, abs=1e-6)


@pytest.mark.parametrize("x", [0.5, 2.0, 3.0, 5.0, 10.0, 20.0])
def test_H_against_scipy(x):
    assert abs(asy.fresnel_H(x) - _oracle(x)) < 1e-8


def test_branches_agree_at_crossover():
    x0 = 3.0
    assert abs(asy.fresnel_quadrature(x0) - asy.fresnel_series(x0).value) < 1e-8


def test_leading_term_and_envelope():
    x = 10.0
    assert abs(asy.fresnel_H(x) - 1j * np.exp(1j * x * x) / (2 * x)) < 1.5e-3
    for x in (5.0, 8.0, 15.0):
        assert abs(asy.fresnel_H(x)) <= 1.2 / (2 * x)


def test_negative_x_and_tolerance_flag():
    with pytest.raises(DomainError):
        asy.fresnel_H(-1.0)
    with pytest.raises(PreconditionError):
        asy.fresnel_H(3.5, n=3, tol=1e-9)


def test_coefficients():
    assert asy.fresnel_coeffs_exact(1)[0] == (Fraction(1, 2), 1)
    c = asy.fresnel_coeffs(6)
    assert c[0] == 0.5j
    for j in range(5):
        assert abs(c[j + 1] / c[j]) == pytest.approx((2 * j + 1) / 2)
    x = 20.0
    fit = (_oracle(x) * np.exp(-1j * x * x) - c[0] / x) * x ** 3
    assert abs(fit - c[1]) < 1e-3


def test_phase_zero_and_guards():
    rep = asy.stationary_phase_check(lambda u: 0.0, [0.1, 0.01])
    assert rep.integrals == (0, 0) and max(rep.ratios) == 0
    with pytest.raises(PreconditionError):
        asy.stationary_phase_check(lambda u: 1.0, [0.1])
    with pytest.raises(PreconditionError):
        asy.stationary_phase_check(lambda u: u, [0.1], nu=1.0, a=20.0)


def test_phase_linear_closed_form():
    # g(u) = u gives eps * (exp(i a^2) - 1) / (2i)
    for eps in (1e-1, 1e-2, 1e-3):
        a = 1 / eps
        exact = eps * (np.exp(1j * a * a) - 1) / 2j
        assert abs(asy.oscillatory_integral(lambda u: u, eps, a) - exact) < 1e-9
    rep = asy.stationary_phase_check(lambda u: u, [1e-1, 1e-2, 1e-3, 1e-4])
    assert rep.passed and max(rep.ratios) <= 1 + 1e-9


def test_phase_first_order_scaling():
    g = lambda u: math.sin(u) + u * u
    vals = [abs(asy.oscillatory_integral(g, e, 10.0)) for e in (1e-2, 5e-3, 2.5e-3)]
    for a, b in zip(vals, vals[1:]):
        assert b / a == pytest.approx(0.5, rel=0.2)


@pytest.fixture(scope="module")
def unit_gauss():
    return asy.LineProfile.from_function(0.1, 16000, lambda x: np.exp(-x ** 2 / 2))


def test_free_defect_decays(unit_gauss):
    d = [asy.free_asymptotic_defect(unit_gauss, t) for t in (1.0, 10.0, 100.0)]
    assert d[0] / d[-1] > 10
    assert d[0] >= d[1] >= d[2]
    scaled = asy.LineProfile(unit_gauss.step, 3 * unit_gauss.values)
    assert asy.free_asymptotic_defect(scaled, 10.0) == pytest.approx(3 * d[1], rel=1e-10)


def test_comparison_profile_norm(unit_gauss):
    c = asy.comparison_profile(unit_gauss, 10.0)
    assert abs(c.norm() - unit_gauss.norm()) < 1e-6


def test_uniform_bound():
    k = np.linspace(-12, 12, 241)
    zero, sup0 = asy.gaussian_band(5.0, 2.0, amplitude=0.0)
    rep = asy.uniform_bound_check(zero, sup0, [1.0, 4.0], [0.0], [10.0], k)
    assert rep.global_sup == 0
    hh, sup = asy.gaussian_band(5.0, 2.0)
    rep = asy.uniform_bound_check(hh, sup, [1.0, 4.0, 16.0, 64.0], [-np.inf, 0.0, 5.0],
                                  [10.0, np.inf], k)
    assert rep.passed and rep.flatness < 0.25
    h3, sup3 = asy.gaussian_band(5.0, 2.0, amplitude=3.0)
    v1 = asy.uniform_integral(hh, sup, 4.0, 0.0, 10.0, k)
    v3 = asy.uniform_integral(h3, sup3, 4.0, 0.0, 10.0, k)
    assert np.max(np.abs(v3 - 3 * v1)) < 1e-6 * np.max(np.abs(v3))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from fracneumann.kernel import (FracOrder, KernelConstants, analytic_primitives, c_norm,
                                exterior_mass, kernel_eval, power_integral, power_integral_span)


def test_c_norm_half_is_inverse_pi():
    # 2 * 0.5 * Gamma(1) / (sqrt(pi) Gamma(1/2)) = 1/pi
    assert abs(c_norm(1, 0.5) - 1 / np.pi) < 1e-15


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_c_norm_matches_fourier_symbol(s):
    # c int (1 - cos z) |z|^{-1-2s} dz = 1, the symbol at xi = 1
    f = lambda z: (1 - np.cos(z)) * z ** (-1 - 2 * s)
    I = integrate.quad(f, 0, 1, limit=200)[0]
    I += integrate.quad(lambda z: z ** (-1 - 2 * s), 1, np.inf)[0]
    I -= integrate.quad(lambda z: z ** (-1 - 2 * s), 1, np.inf, weight="cos", wvar=1.0)[0]
    assert abs(2 * c_norm(1, s) * I - 1) < 1e-8


def test_c_norm_closed_form_general_n():
    for n, s in [(2, 0.3), (3, 0.7)]:
        ref = 4 ** s * s * math.gamma(n / 2 + s) / (np.pi ** (n / 2) * math.gamma(1 - s))
        assert abs(c_norm(n, s) / ref - 1) < 1e-14


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5, float("nan")])
def test_order_rejected(bad):
    with pytest.raises(ValueError, match=r"s must lie in \(0,1\)"):
        c_norm(1, bad)
    with pytest.raises(ValueError):
        FracOrder(bad)


def test_constants_bundle():
    k = KernelConstants.for_order(0.4)
    assert k.c_ns == c_norm(1, 0.4) and k.n == 1


def test_kernel_eval():
    assert abs(kernel_eval(0.0, 2.0, 0.5) - 1 / (4 * np.pi)) < 1e-16
    assert kernel_eval(1.0, 3.0, 0.3) == kernel_eval(3.0, 1.0, 0.3)
    with pytest.raises(ZeroDivisionError):
        kernel_eval(0.5, 0.5, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
def test_power_integrals_against_quad(s, r0, span):
    p = 1 + 2 * s
    ref = integrate.quad(lambda r: r ** (-p), r0, r0 + span, epsrel=1e-13, limit=200)[0]
    assert abs(power_integral(p, r0, r0 + span) / ref - 1) < 1e-9
    assert abs(power_integral_span(p, r0, span) / ref - 1) < 1e-9


def test_power_integral_log_branch_and_infinite_end():
    assert abs(power_integral(1.0, 1.0, np.e) - 1.0) < 1e-15
    assert abs(power_integral_span(1.0, 2.0, 2.0) - np.log(2.0)) < 1e-15
    assert abs(power_integral(2.0, 0.5, np.inf) - 2.0) < 1e-15


def test_span_precision_far_away():
    # int_{r0}^{r0+l} r^{-p} for l << r0 is l r0^{-p} (1 - p l/(2 r0)) to O(l^2)
    r0, l, p = 1e6, 1e-3, 1.6
    approx = l * r0 ** (-p) * (1 - p * l / (2 * r0))
    assert abs(power_integral_span(p, r0, l) / approx - 1) < 1e-12


def test_primitives_bundle():
    P = analytic_primitives(0.3)
    assert abs(P.kernel(1.0, 2.0) - (1 - 2 ** -0.6) / 0.6) < 1e-15
    assert abs(P.first(1.0, 2.0) - (2 ** 0.4 - 1) / 0.4) < 1e-15
    assert abs(P.second(1.0, 2.0) - (2 ** 1.4 - 1) / 1.4) < 1e-15
    assert abs(P.tail(2.0) - 2 ** -0.6 / 0.6) < 1e-15


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_exterior_mass_against_quad(s):
    for x in [-0.3, 1.01, 4.0]:
        ref = c_norm(1, s) * integrate.quad(lambda y: abs(x - y) ** (-1 - 2 * s), 0, 1,
                                            epsrel=1e-13)[0]
        assert abs(exterior_mass(x, (0, 1), s) / ref - 1) < 1e-10


def test_exterior_mass_errors():
    with pytest.raises(ValueError):
        exterior_mass(0.5, (0, 1), 0.5)
    with pytest.raises(OverflowError):
        exterior_mass(1 + 1e-14, (0, 1), 0.5)

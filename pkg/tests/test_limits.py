import numpy as np
import pytest
from scipy import integrate

from fracneumann.limits import (boundary_kappa, kappa_value, renormalized_trace, richardson,
                                s_limit_suite)

u_bump = lambda x: np.clip(1 - ((x - 0.5) / 1.5) ** 2, 0, None) ** 3
v_bump = lambda x: np.clip(1 - ((x - 0.3) / 1.2) ** 2, 0, None) ** 3


def test_richardson_exact_on_model_sequence():
    t = np.array([0.4, 0.2, 0.1])
    vals = 2.0 + 3.0 * t ** 0.7
    assert abs(richardson(vals, t, 0.7) - 2.0) < 1e-14


def test_kappa_closed_form():
    # half-line moment ratio computed by quadrature
    for s in (0.6, 0.75, 0.9):
        num = integrate.quad(lambda t: (1 + t) ** (-2 * s), 0, np.inf)[0]
        den = integrate.quad(lambda t: (1 + t) ** (-1 - 2 * s), 0, np.inf)[0]
        assert abs(kappa_value(s) - num / den) < 1e-8
    with pytest.raises(ValueError, match="infinite"):
        kappa_value(0.5)


def test_renormalized_trace_of_constant_and_linear():
    assert np.abs(renormalized_trace(lambda x: 3.0 + 0 * x, (0, 1), 0.5, [1.2, -0.4])).max() == 0
    s, x = 0.6, 1.3
    d = x - 1
    num = integrate.quad(lambda y: (x - y) * (x - y) ** (-1 - 2 * s), 0, 1)[0]
    den = integrate.quad(lambda y: (x - y) ** (-1 - 2 * s), 0, 1)[0]
    got = renormalized_trace(lambda y: y, (0, 1), s, x)[0]
    assert abs(got - num / den) < 1e-10
    with pytest.raises(ValueError):
        renormalized_trace(lambda y: y, (0, 1), s, 0.5)


@pytest.mark.parametrize("s", [0.75, 0.9])
@pytest.mark.parametrize("side", ["a", "b"])
def test_boundary_kappa(s, side):
    u = lambda x: np.sin(2 * x) + x ** 2
    du = lambda x: 2 * np.cos(2 * x) + 2 * x
    est = boundary_kappa(u, (0, 1), s, side=side, eps_list=(1e-2, 5e-3, 2.5e-3, 1.25e-3), du=du)
    assert abs(est.kappa / kappa_value(s) - 1) < 0.01
    fd = boundary_kappa(u, (0, 1), s, side=side)
    assert abs(fd.kappa - est.kappa) < 1e-6 * abs(est.kappa)


def test_boundary_kappa_rejects_small_order():
    with pytest.raises(ValueError, match="s > 1/2"):
        boundary_kappa(np.sin, (0, 1), 0.5)
    with pytest.raises(ValueError):
        boundary_kappa(np.sin, (0, 1), 0.75, eps_list=(1e-3, 1e-2))


def _du_bump(x, c, w):
    # d/dx (1 - ((x-c)/w)^2)^3
    z = (x - c) / w
    return -6 * z / w * (1 - z ** 2) ** 2


def test_s_limit_suite_trend_and_limits():
    s_list = [0.6, 0.7, 0.8, 0.9, 0.95]
    tab = s_limit_suite(u_bump, v_bump, s_list, h=0.02, R=2.0)
    du = lambda x: _du_bump(x, 0.5, 1.5)
    flux_target = du(1.0) * v_bump(1.0) - du(0.0) * v_bump(0.0)
    energy_target = integrate.quad(lambda x: du(x) ** 2, 0, 1)[0]
    assert np.all(np.diff(np.abs(tab.flux - flux_target)) < 0)
    assert np.all(np.diff(np.abs(tab.scaled_energy - energy_target)) < 0)
    assert abs(tab.flux_limit / flux_target - 1) < 0.10
    assert abs(tab.energy_limit / energy_target - 1) < 0.10


def test_s_limit_support_violation():
    with pytest.raises(ValueError, match="supported"):
        s_limit_suite(lambda x: 1 + 0 * x, v_bump, [0.8, 0.9], h=0.05)

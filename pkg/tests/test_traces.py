import numpy as np
import pytest
from scipy import integrate, special

from fracneumann.kernel import c_norm
from fracneumann.mesh import build_mesh
from fracneumann.operators import assemble
from fracneumann.traces import (eval_fraclap, extend, extended_field, fractional_perimeter,
                                fractional_perimeter_quadrature, hs_norm, hs_norm_parts,
                                neumann_trace)
from conftest import operator_for


def gaussian_fraclap(x, s):
    """(-Delta)^s exp(-x^2) = 4^s Gamma(1/2+s)/Gamma(1/2) 1F1(1/2+s; 1/2; -x^2)."""
    return 4 ** s * special.gamma(0.5 + s) / special.gamma(0.5) * special.hyp1f1(0.5 + s, 0.5, -x ** 2)


def gaussian_fraclap_fourier(x, s):
    """Inverse transform of |xi|^{2s} sqrt(pi) e^{-xi^2/4} by quadrature."""
    f = lambda xi: xi ** (2 * s) * np.sqrt(np.pi) * np.exp(-xi ** 2 / 4) * np.cos(xi * x)
    return integrate.quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0] / np.pi


def test_gaussian_oracles_agree():
    x = np.array([0.0, 0.3, 0.7])
    for s in (0.3, 0.75):
        ref = [gaussian_fraclap_fourier(v, s) for v in x]
        assert np.allclose(gaussian_fraclap(x, s), ref, atol=1e-10)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.75])
def test_eval_fraclap_gaussian(s):
    m = build_mesh((-1, 1), 0.0125, 8)
    fld = m.sample(lambda x: np.exp(-x ** 2), farfield=0.0)
    for x in (0.0, 0.4):
        ref = gaussian_fraclap(x, s)
        assert abs(eval_fraclap(fld, x, s) - ref) < 2e-3 * abs(ref) + 1e-4


@pytest.mark.parametrize("s", [0.3, 0.5, 0.75])
def test_eval_fraclap_cauchy_convergence(s):
    # (-Delta)^s 1/(1+x^2) at 0 equals Gamma(1+2s) (symbol |xi|^{2s}, transform pi e^{-|xi|})
    ref = special.gamma(1 + 2 * s)
    errs = []
    for h in (0.1, 0.05, 0.025):
        m = build_mesh((-1, 1), h, 40)
        fld = m.sample(lambda x: 1 / (1 + x ** 2), farfield=0.0)
        errs.append(abs(eval_fraclap(fld, 0.0, s) - ref))
    assert errs[1] <= 0.5 * errs[0] and errs[2] <= 0.5 * errs[1]


def test_eval_fraclap_needs_interior_point():
    m = build_mesh((0, 1), 0.05, 2)
    with pytest.raises(ValueError):
        eval_fraclap(m.sample(np.sin), 0.01, 0.5)


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_neumann_trace_against_quadrature(s):
    m = build_mesh((0, 1), 0.05, 2)
    fld = m.sample(lambda x: np.cos(2 * x) + x ** 2)
    pts = np.array([-0.37, -0.02, 1.004, 1.6])
    tr = neumann_trace(fld, pts, s)
    c = c_norm(1, s)
    for x, N, Nt, w in zip(pts, tr.values, tr.renormalized, tr.weight):
        f = lambda y: (fld(x) - fld(y)) * abs(x - y) ** (-1 - 2 * s)
        ref = c * integrate.quad(f, 0, 1, points=m.nodes[m.i_a:m.i_b + 1], limit=400,
                                 epsrel=1e-12)[0]
        wref = c * integrate.quad(lambda y: abs(x - y) ** (-1 - 2 * s), 0, 1, epsrel=1e-12)[0]
        assert abs(N - ref) < 1e-9 * max(1.0, abs(ref))
        assert abs(w / wref - 1) < 1e-10
        assert abs(Nt - N / w) < 1e-12 * max(1.0, abs(Nt))


def test_extension_zero_trace_and_roundtrip():
    m = build_mesh((0, 1), 0.05, 2)
    fld = m.sample(lambda x: np.exp(x) * np.sin(3 * x))
    ext = extended_field(fld, 0.5)
    pts = m.nodes[np.r_[0:m.i_a, m.i_b + 1:m.n_nodes]]
    assert np.abs(neumann_trace(ext, pts, 0.5).values).max() < 1e-10
    again = extended_field(ext, 0.5)
    assert np.abs(again.dofs - ext.dofs).max() < 1e-8


@pytest.mark.parametrize("s", [0.4, 0.5, 0.75, 0.9])
def test_extension_continuous_at_boundary(s):
    m = build_mesh((0, 1), 0.02, 2)
    fld = m.sample(lambda x: np.cos(3 * x) + x)
    vals = extend(fld, [-1e-4, 1 + 1e-4], s)
    assert np.abs(vals - fld([0.0, 1.0])).max() < 1e-3


def test_indicator_identity():
    m = build_mesh((0, 1), 0.05, 2)
    ind = m.sample(lambda x: ((x >= 0) & (x <= 1)).astype(float))
    pts = np.concatenate([np.linspace(-2.5, -0.01, 5), np.linspace(1.01, 3.5, 5)])
    for s in (0.3, 0.5, 0.8):
        tr = neumann_trace(ind, pts, s, exterior_values=0.0)
        assert np.abs(tr.renormalized + 1).max() < 1e-10


def test_hs_norm_parts():
    op = operator_for(0.5)
    m = op.mesh
    const = np.full(m.n_dofs, 2.0)
    p = hs_norm_parts(op, const, g=1.0)
    assert abs(p.l2_sq - 4.0) < 1e-12 and abs(p.seminorm_sq) < 1e-10
    assert abs(p.weighted_sq - 4.0 * 2 * 2.0) < 1e-10       # |CO| truncated = 4
    u = m.sample(lambda x: np.sin(x)).dofs
    assert hs_norm(op, u) >= np.sqrt(u @ op.M @ u)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
def test_perimeter_closed_form_vs_quadrature(s):
    assert abs(fractional_perimeter((0, 1), s) / fractional_perimeter_quadrature((0, 1), s) - 1) < 1e-8


def test_perimeter_scaling(rng):
    s = 0.3
    P1 = fractional_perimeter_quadrature((0, 1), s)
    for L in rng.uniform(0.1, 10, 10):
        assert abs(fractional_perimeter_quadrature((0, L), s) / P1 - L ** (1 - 2 * s)) < 1e-10 * L ** (1 - 2 * s)
    with pytest.raises(ValueError):
        fractional_perimeter((0, 1), 0.5)

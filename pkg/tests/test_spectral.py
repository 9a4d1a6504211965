import numpy as np
import pytest
from scipy import linalg

from fracneumann.kernel import c_norm
from fracneumann.mesh import build_mesh
from fracneumann.spectral import eigs, poincare_constant
from conftest import operator_for


def pencil_oracle(op, k):
    """Finite eigenvalues of the singular pencil (B, M) by QZ."""
    w = linalg.eig(op.B, op.M, right=False)
    w = w[np.isfinite(w)]
    w = np.sort(w.real[np.abs(w.imag) < 1e-8])
    return w[:k]


def test_matches_pencil(op):
    res = eigs(op, 6)
    ref = pencil_oracle(op, 6)
    assert res.eigenvalues[0] == 0.0
    assert np.allclose(res.eigenvalues[1:], ref[1:], rtol=1e-8)
    assert abs(ref[0]) < 1e-8


def test_orthonormal_and_residuals(op):
    res = eigs(op, 8)
    assert np.abs(res.gram - np.eye(8)).max() < 1e-10
    I = op.mesh.interior_nodes
    for i in range(8):
        u = res.vectors[:, i]
        r = op.B @ u - res.eigenvalues[i] * (op.M @ u)
        assert np.linalg.norm(r) <= 1e-8 * max(res.eigenvalues[i], 1.0) * np.linalg.norm(u[I])
    assert np.all(np.diff(res.eigenvalues) > 0)
    assert np.allclose(res.mu * res.eigenvalues[1:], 1.0, rtol=1e-14)


def test_trace_vanishes_on_eigenfields(op_half):
    res = eigs(op_half, 5)
    m = op_half.mesh
    for i in range(5):
        tr = op_half.discrete_trace(res.vectors[:, i])
        pick = np.linspace(0, tr.size - 1, 10).astype(int)
        assert np.abs(tr[pick]).max() < 1e-8 * max(res.eigenvalues[i], 1.0)


def test_completeness_proxy(op_half, rng):
    # expanding a mean-zero field in all eigenfields recovers it
    res = eigs(op_half)
    I = op_half.mesh.interior_nodes
    M_II = op_half.M[np.ix_(I, I)]
    V = res.vectors[I]
    f = rng.standard_normal(I.size)
    coef = V.T @ M_II @ f
    assert np.linalg.norm(V @ coef - f) < 1e-9 * np.linalg.norm(f)


def test_second_eigenvalue_grows_with_s():
    lam2 = [eigs(operator_for(s), 2).eigenvalues[1] for s in (0.3, 0.5, 0.75, 0.9)]
    assert np.all(np.diff(lam2) > 0)
    assert lam2[-1] < np.pi ** 2


def test_k_validation(op_half):
    n = op_half.mesh.interior_nodes.size
    with pytest.raises(ValueError, match="k must lie"):
        eigs(op_half, n + 1)
    with pytest.raises(ValueError):
        eigs(op_half, 0)


def test_poincare_random_fields(rng):
    m = build_mesh((0, 1), 0.05, 2)
    s = 0.5
    op = operator_for(s)
    C = poincare_constant(m, s, op=op)
    I = m.interior_nodes
    M_II = op.M[np.ix_(I, I)]
    Rm = (2.0 / c_norm(1, s)) * op.B_reg[np.ix_(I, I)]
    one = np.ones(I.size)
    for _ in range(100):
        u = rng.standard_normal(I.size) * rng.uniform(0.1, 10)
        u += rng.standard_normal() * np.sin(rng.uniform(0, 6) * m.nodes[I])
        d = u - (one @ M_II @ u) / (one @ M_II @ one)
        assert d @ M_II @ d <= C * (u @ Rm @ u) * (1 + 1e-12)


def test_poincare_decreases_with_s():
    m = build_mesh((0, 1), 0.05, 2)
    C = [poincare_constant(m, s, op=operator_for(s)) for s in (0.3, 0.5, 0.75)]
    assert np.all(np.diff(C) < 0)

"""Neumann eigenpairs B u = lambda M u and the discrete Poincare constant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernel import c_norm
from .mesh import Field
from .operators import assemble


@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray
    vectors: np.ndarray          # (n_dofs, k) full eigenfields, columns
    gram: np.ndarray             # interior L2 Gram matrix of the eigenfields
    mesh: object = None

    @property
    def mu(self):
        """1/lambda_i for i >= 2 (the compact inverse on the mean-zero space)."""
        return 1.0 / self.eigenvalues[1:]

    def field(self, i):
        return Field.from_dofs(self.mesh, self.vectors[:, i])

    @property
    def k(self):
        return self.eigenvalues.size


def _fix_signs(V_int):
    for j in range(V_int.shape[1]):
        col = V_int[:, j]
        nz = np.nonzero(np.abs(col) > 1e-10 * np.abs(col).max())[0]
        if nz.size and col[nz[0]] < 0:
            V_int[:, j] = -col
    return V_int


def schur_reduce(op):
    """Interior Schur complement S and the slaving map u_E = P u_I."""
    m = op.mesh
    I, E = m.interior_nodes, m.exterior_dofs
    B = op.B
    cf = linalg.cho_factor(B[np.ix_(E, E)])
    P = -linalg.cho_solve(cf, B[np.ix_(E, I)])
    S = B[np.ix_(I, I)] + B[np.ix_(I, E)] @ P
    return 0.5 * (S + S.T), P


def eigs(op, k=None):
    """Lowest k eigenpairs, M-orthonormal, exterior slaved by (B u)_E = 0."""
    m = op.mesh
    I, E = m.interior_nodes, m.exterior_dofs
    n_int = I.size
    if k is None:
        k = n_int
    if int(k) != k or not 1 <= k <= n_int:
        raise ValueError(f"k must lie in [1, {n_int}] (number of interior dofs), got {k}")
    k = int(k)
    S, P = schur_reduce(op)
    M_II = op.M[np.ix_(I, I)]
    # constants are an exact eigenvector (lambda = 0); solve on their
    # M-orthogonal complement so roundoff cannot push lambda_1 below zero
    one = np.ones(n_int)
    Q = linalg.null_space((M_II @ one)[None, :])
    lam = np.zeros(k)
    V = np.empty((n_int, k))
    V[:, 0] = one / np.sqrt(one @ M_II @ one)
    if k > 1:
        mu, Y = linalg.eigh(Q.T @ S @ Q, Q.T @ M_II @ Q, subset_by_index=[0, k - 2])
        lam[1:] = mu
        V[:, 1:] = Q @ Y
    V = _fix_signs(V)
    full = np.zeros((m.n_dofs, k))
    full[I] = V
    full[E] = P @ V
    gram = V.T @ M_II @ V
    return SpectralResult(lam, full, gram, m)


def poincare_constant(mesh, s, q=8, op=None):
    """C with int_O |u - avg|^2 <= C iint_{OxO} |u(x)-u(y)|^2 |x-y|^{-1-2s}."""
    if op is None:
        op = assemble(mesh, s, q)
    I = mesh.interior_nodes
    R = (2.0 / c_norm(1, s)) * op.B_reg[np.ix_(I, I)]
    nu = linalg.eigh(0.5 * (R + R.T), op.M[np.ix_(I, I)], eigvals_only=True,
                     subset_by_index=[0, 1])
    return 1.0 / nu[1]

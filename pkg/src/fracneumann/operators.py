"""Galerkin assembly of the nonlocal Neumann bilinear form on a uniform P1 mesh.

The form is

    B(u, v) = (c/2) * iint_{R^2 minus (CO)^2} (u(x)-u(y)) (v(x)-v(y)) |x-y|^{-1-2s}

with ``CO`` the exterior of the interval. Pairs of exterior points do not
interact. Besides ``B`` the assembly keeps two non-symmetric pieces with
``B = L + N`` (up to rounding):

* ``L[i, j]``: the part of the form tested against ``phi_i(x)`` with ``x`` in
  the interval, i.e. ``v^T L u = int_O v (-Delta)^s u``;
* ``N[i, j]``: the part tested at exterior points, ``v^T N u = int_CO v N_s u``.

Uniform spacing makes the unit-cell moments depend only on the cell offset,
so each offset is integrated once and scattered.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
import functools

import numpy as np
from scipy.special import beta as beta_fn

from .kernel import c_norm, check_order
from .mesh import Mesh

DEFAULT_QUAD_ORDER = 8
_SMOOTH_ORDER = 24


class AssemblyError(RuntimeError):
    pass


@functools.lru_cache(maxsize=None)
def gauss_unit(q):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(q)
    return (t + 1) / 2, w / 2


@functools.lru_cache(maxsize=None)
def _duffy_triangle(q):
    """Quadrature on the triangle a, b >= 0, a + b <= 1."""
    t, w = gauss_unit(q)
    U, V = np.meshgrid(t, t, indexing="ij")
    W = np.outer(w, w) * (1 - U)
    return U.ravel(), ((1 - U) * V).ravel(), W.ravel()


@functools.lru_cache(maxsize=None)
def touching_moments(s):
    """T[al, be] = int_0^1 int_0^1 xi^al eta^be (xi+eta)^{-1-2s} for 1 <= al+be <= 2.

    The corner triangle xi + eta <= 1 is done in closed form (polar-type
    substitution); the complementary triangle has a smooth integrand.
    """
    sigma = 1 + 2 * s
    a, b, w = _duffy_triangle(_SMOOTH_ORDER)
    xi, eta = 1 - a, 1 - b
    kern = (xi + eta) ** (-sigma)
    T = np.full((3, 3), np.nan)
    for al in range(3):
        for be in range(3 - al):
            if al + be == 0:
                continue
            corner = beta_fn(al + 1, be + 1) / (al + be + 2 - sigma)
            T[al, be] = corner + np.sum(w * xi ** al * eta ** be * kern)
    return T


def _poly_moment(T, poly):
    """Integrate sum c_{al,be} xi^al eta^be against the touching kernel."""
    return sum(c * T[al, be] for (al, be), c in poly.items() if c != 0)


def _pmul(p, q):
    out = {}
    for (a1, b1), c1 in p.items():
        for (a2, b2), c2 in q.items():
            key = (a1 + a2, b1 + b2)
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


@functools.lru_cache(maxsize=None)
def touching_blocks(s):
    """Unit-cell blocks for two cells sharing a vertex.

    Local dofs are ``[left_far, shared, right_far]``. Returns ``(H_left,
    H_right)`` of shape (3, 3): rows carried by the left-cell and right-cell
    test functions respectively. ``H_left + H_right`` is symmetric.
    """
    T = touching_moments(s)
    xi, eta = {(1, 0): 1.0}, {(0, 1): 1.0}
    # u(x) - u(y) = g . u_local, x in left cell, y in right cell
    g = [xi, {(0, 1): 1.0, (1, 0): -1.0}, {(0, 1): -1.0}]
    phi_left = [xi, {(0, 0): 1.0, (1, 0): -1.0}, {}]
    phi_right = [{}, {(0, 0): 1.0, (0, 1): -1.0}, eta]
    HL = np.array([[_poly_moment(T, _pmul(p, gq)) for gq in g] for p in phi_left])
    HR = -np.array([[_poly_moment(T, _pmul(p, gq)) for gq in g] for p in phi_right])
    return HL, HR


def same_cell_block(s):
    """Unit cell against itself: (u1-u0)^2 int int |x-y|^{1-2s}."""
    J0 = 2.0 / ((2 - 2 * s) * (3 - 2 * s))
    return J0 * np.array([[1.0, -1.0], [-1.0, 1.0]])


def separated_blocks(offsets, s, q):
    """Blocks for a left unit cell and a right unit cell ``k >= 2`` cells later.

    Local dofs ``[l0, l1, r0, r1]``; returns arrays (K, 4, 4) holding the rows
    carried by the left cell and by the right cell (other rows zero).
    """
    t, w = gauss_unit(q)
    k = np.asarray(offsets, dtype=float)[:, None, None]
    X, Y = t[None, :, None], t[None, None, :]
    W = (w[:, None] * w[None, :])[None]
    kern = W * (k + Y - X) ** (-1 - 2 * s)
    fl = [1 - X, X]
    fr = [1 - Y, Y]
    P = np.stack([np.stack([np.sum(kern * a * b, axis=(1, 2)) for b in fl], -1) for a in fl], -2)
    Q = np.stack([np.stack([np.sum(kern * a * b, axis=(1, 2)) for b in fr], -1) for a in fl], -2)
    S = np.stack([np.stack([np.sum(kern * a * b, axis=(1, 2)) for b in fr], -1) for a in fr], -2)
    P = 0.5 * (P + np.swapaxes(P, 1, 2))
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    Z = np.zeros_like(P)
    HL = np.concatenate([np.concatenate([P, -Q], axis=2), np.concatenate([Z, Z], axis=2)], axis=1)
    HR = np.concatenate([np.concatenate([Z, Z], axis=2),
                         np.concatenate([-np.swapaxes(Q, 1, 2), S], axis=2)], axis=1)
    return HL, HR


@dataclass(eq=False)
class DiscreteOperator:
    mesh: Mesh
    s: float
    q: int
    c: float
    B: np.ndarray = dc_field(repr=False)
    L: np.ndarray = dc_field(repr=False)
    N: np.ndarray = dc_field(repr=False)
    B_reg: np.ndarray = dc_field(repr=False)
    M: np.ndarray = dc_field(repr=False)

    @property
    def n_dofs(self):
        return self.mesh.n_dofs

    def energy(self, u):
        """iint_{R^2 minus (CO)^2} |u(x)-u(y)|^2 K_0 (no normalization constant)."""
        u = _dofs(u)
        return 2.0 / self.c * float(u @ self.B @ u)

    def mass(self, u):
        u = _dofs(u)
        return float(np.sum(self.M @ u))

    def discrete_trace(self, u):
        """Weak N_s u at exterior vertices: (Bu)_j / int phi_j.

        Vanishes exactly on fields whose exterior is slaved by the discrete
        Neumann relation.
        """
        u = _dofs(u)
        m = self.mesh
        idx = np.concatenate([np.arange(0, m.i_a), np.arange(m.i_b + 1, m.n_nodes)])
        return (self.B @ u)[idx] / hat_measure(m)[idx]


def _dofs(u):
    return u.dofs if hasattr(u, "dofs") else np.asarray(u, dtype=float)


def hat_measure(mesh):
    """int phi_j over the truncated box for each vertex."""
    w = np.full(mesh.n_nodes, mesh.h)
    w[0] = w[-1] = mesh.h / 2
    return w


def _scatter(A, dofs_r, dofs_c, vals):
    np.add.at(A, (dofs_r[:, :, None], dofs_c[:, None, :]), vals)


def assemble(mesh, s, q=DEFAULT_QUAD_ORDER):
    """Assemble the discrete operator for order ``s``.

    ``q`` is the tensor Gauss order for cell pairs that do not touch; pairs
    sharing a vertex or a cell use closed-form singular moments.
    """
    check_order(s)
    if int(q) != q or q < 2:
        raise ValueError(f"quadrature order must be an integer >= 2, got {q}")
    q = int(q)
    c = c_norm(1, s)
    n = mesh.n_dofs
    nC = mesh.n_cells
    B = np.zeros((n, n))
    L = np.zeros((n, n))
    Nm = np.zeros((n, n))
    Breg = np.zeros((n, n))
    inside = mesh.cell_inside
    scale = mesh.h ** (1 - 2 * s)

    def check(vals, what):
        bad = ~np.all(np.isfinite(vals.reshape(vals.shape[0], -1)), axis=1)
        if np.any(bad):
            raise AssemblyError(f"non-finite entry in {what}, pair #{int(np.argmax(bad))}")

    # same cell, interior only
    cells = mesh.interior_cells
    A0 = (c / 2) * scale * same_cell_block(s)
    d = np.stack([cells, cells + 1], 1)
    vals = np.broadcast_to(A0, (cells.size, 2, 2))
    for T in (B, L, Breg):
        _scatter(T, d, d, vals)

    # touching cells
    HL, HR = touching_blocks(s)
    check(np.stack([HL, HR]), "touching block")
    left = np.arange(nC - 1)
    keep = inside[left] | inside[left + 1]
    left = left[keep]
    dofs = np.stack([left, left + 1, left + 2], 1)
    _emit(B, L, Nm, Breg, dofs, inside[left], inside[left + 1],
          c * scale * HL, c * scale * HR)

    # separated cells
    if nC > 2:
        offsets = np.arange(2, nC)
        HLs, HRs = separated_blocks(offsets, s, q)
        check(HLs, "separated block")
        check(HRs, "separated block")
        for kk, k in enumerate(offsets):
            left = np.arange(nC - k)
            right = left + k
            keep = inside[left] | inside[right]
            if not np.any(keep):
                continue
            left, right = left[keep], right[keep]
            dofs = np.stack([left, left + 1, right, right + 1], 1)
            _emit(B, L, Nm, Breg, dofs, inside[left], inside[right],
                  c * scale * HLs[kk], c * scale * HRs[kk])

    _tail_terms(mesh, s, q, c, B, L, Nm)

    if not np.all(np.isfinite(B)):
        raise AssemblyError("non-finite entries in the assembled form")
    M = mass_matrix(mesh)
    return DiscreteOperator(mesh=mesh, s=float(s), q=q, c=c, B=B, L=L, N=Nm, B_reg=Breg, M=M)


def _emit(B, L, Nm, Breg, dofs, in_left, in_right, HL, HR):
    """Scatter one offset class given the left-cell and right-cell row blocks.

    Blocks already include both orderings of the pair and the factor c.
    """
    npair = dofs.shape[0]
    A = HL + HR
    A = 0.5 * (A + A.T)
    _scatter(B, dofs, dofs, np.broadcast_to(A, (npair,) + A.shape))
    both = in_left & in_right
    if np.any(both):
        _scatter(Breg, dofs[both], dofs[both], np.broadcast_to(A, (int(both.sum()),) + A.shape))
    fl = in_left[:, None, None].astype(float)
    fr = in_right[:, None, None].astype(float)
    _scatter(L, dofs, dofs, HL * fl + HR * fr)
    _scatter(Nm, dofs, dofs, HL * (1 - fl) + HR * (1 - fr))


def _tail_terms(mesh, s, q, c, B, L, Nm):
    """Interior cells against the constant tails beyond the truncation box."""
    t, w = gauss_unit(max(q, 8))
    h = mesh.h
    cells = mesh.interior_cells
    x0 = mesh.nodes[cells][:, None]
    X = x0 + h * t[None, :]
    Wq = h * w[None, :]
    N0, N1 = 1 - t[None, :], t[None, :]
    for tail, W in ((mesh.left_tail, (X - mesh.lo) ** (-2 * s) / (2 * s)),
                    (mesh.right_tail, (mesh.hi - X) ** (-2 * s) / (2 * s))):
        KW = c * W * Wq
        psi = [N0, N1, -np.ones_like(N0)]
        # interior rows: phi_p(x) (u(x) - u_inf)
        Hin = np.stack([np.stack([np.sum(KW * p * r, 1) for r in psi], -1)
                        for p in (N0, N1)], -2)
        # tail row: -(u(x) - u_inf)
        Hout = np.stack([np.sum(-KW * r, 1) for r in psi], -1)[:, None, :]
        dofs = np.stack([cells, cells + 1, np.full_like(cells, tail)], 1)
        Hin_f = np.concatenate([Hin, np.zeros_like(Hout)], axis=1)
        Hout_f = np.concatenate([np.zeros_like(Hin), Hout], axis=1)
        A = Hin_f + Hout_f
        A = 0.5 * (A + np.swapaxes(A, 1, 2))
        _scatter(B, dofs, dofs, A)
        _scatter(L, dofs, dofs, Hin_f)
        _scatter(Nm, dofs, dofs, Hout_f)


def mass_matrix(mesh):
    """Consistent P1 mass matrix of the interval only (zero on exterior dofs)."""
    n = mesh.n_dofs
    M = np.zeros((n, n))
    cells = mesh.interior_cells
    loc = mesh.h / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])
    d = np.stack([cells, cells + 1], 1)
    _scatter(M, d, d, np.broadcast_to(loc, (cells.size, 2, 2)))
    return M


def _as_callable(f):
    if callable(f):
        return lambda x: np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x))
    val = float(f)
    return lambda x: np.full(np.shape(x), val)


def cell_quadrature(mesh, cells, q):
    """Physical Gauss points (ncell, q) and weights on the given cells."""
    t, w = gauss_unit(q)
    x0 = mesh.nodes[cells][:, None]
    return x0 + mesh.h * t[None, :], np.broadcast_to(mesh.h * w, (len(cells), q)), t


def load_vector(mesh, f=0.0, g=0.0, q=8):
    """r_i = int_O f phi_i + int_{CO} g phi_i, g taken as zero beyond the box."""
    f, g = _as_callable(f), _as_callable(g)
    r = np.zeros(mesh.n_dofs)
    inside = mesh.cell_inside
    for func, cells in ((f, np.nonzero(inside)[0]), (g, np.nonzero(~inside)[0])):
        X, W, t = cell_quadrature(mesh, cells, q)
        FW = func(X) * W
        np.add.at(r, cells, np.sum(FW * (1 - t), 1))
        np.add.at(r, cells + 1, np.sum(FW * t, 1))
    return r


def region_integral(mesh, func, region, q=8, absolute=False):
    """Gauss integral of ``func`` over the interval or the truncated exterior."""
    func = _as_callable(func)
    inside = mesh.cell_inside
    cells = np.nonzero(inside if region == "interior" else ~inside)[0]
    X, W, _ = cell_quadrature(mesh, cells, q)
    vals = func(X)
    if absolute:
        vals = np.abs(vals)
    return float(np.sum(vals * W))


def ibp_residuals(op, u, v):
    """Residuals of the discrete divergence theorem and integration by parts.

    Returns ``(divergence, parts)``, each normalized by the natural scale of
    the terms involved.
    """
    u, v = _dofs(u), _dofs(v)
    one = np.ones_like(u)
    Lu, Nu = op.L @ u, op.N @ u
    div_terms = (one @ Lu, one @ Nu)
    div = abs(div_terms[0] + div_terms[1])
    form = v @ (op.B @ u)
    vol, flux = v @ Lu, v @ Nu
    parts = abs(form - vol - flux)
    scale_u = np.sqrt(abs(u @ op.B @ u)) + 1e-300
    scale_v = np.sqrt(abs(v @ op.B @ v)) + 1e-300
    norm_B = np.abs(op.B).max()
    div_scale = max(abs(div_terms[0]), abs(div_terms[1]), norm_B * np.abs(u).max(), 1e-300)
    parts_scale = max(abs(form), abs(vol), abs(flux), scale_u * scale_v, 1e-300)
    return div / div_scale, parts / parts_scale

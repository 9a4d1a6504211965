"""Elliptic problems for B u = r: pure Neumann, mixed Dirichlet/Neumann, Robin.

The pure Neumann system is singular (constants span the kernel of B), so it
is solved on the complement of the constants by a rank-one deflation::

    (B + sigma w w^T) u = r,   w = M 1

which is nonsingular whenever r is compatible (1^T r = 0) and returns the
solution with w^T u = int_O u = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import linalg

from .mesh import ExteriorPartition, Field
from .operators import _as_callable, _dofs, hat_measure, load_vector, region_integral

SOLVER_TOL = 1e-10
COMPAT_TOL = 1e-8


class CompatibilityError(ValueError):
    """Neumann data with int_O f + int_{CO} g != 0."""

    def __init__(self, residual, tol):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(f"compatibility violated: int f + int g = {self.residual:.6e} "
                         f"(tolerance {self.tol:.3e})")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class EllipticProblem:
    f: object = 0.0
    g: object = 0.0
    kind: str = "neumann"
    partition: ExteriorPartition | None = None
    phi: object = 0.0
    alpha: object = 1.0
    beta: object = 0.0
    gamma: object = 0.0

    def __post_init__(self):
        if self.kind not in ("neumann", "mixed", "robin"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kind == "mixed" and self.partition is None:
            raise ValueError("a mixed problem needs an exterior partition")


@dataclass
class EllipticSolution:
    field: Field
    residual: float
    compatibility: float = 0.0
    pinned_mean: bool = False
    info: dict = dc_field(default_factory=dict)

    @property
    def dofs(self):
        return self.field.dofs


def check_compatibility(f, g, mesh, q=8):
    """int_O f + int_{CO} g by the load-vector quadrature (g is zero beyond R)."""
    return float(load_vector(mesh, f, g, q).sum())


def compatibility_tolerance(f, g, mesh, q=8, rel=COMPAT_TOL):
    scale = (region_integral(mesh, f, "interior", q, absolute=True)
             + region_integral(mesh, g, "exterior", q, absolute=True))
    return rel * max(scale, 1.0e-300)


def _relative_residual(A, u, r):
    res = np.linalg.norm(A @ u - r)
    scale = np.linalg.norm(r)
    return res / scale if scale > 0 else res


def _shift_scale(B, w):
    return np.abs(np.diag(B)).max() / max(float(w @ w), 1e-300)


def _deflated_solve(op, r, pin=None, shift=None, tol=SOLVER_TOL):
    """Solve B u = r for compatible r; returns (u, residual, pinned_mean)."""
    B = op.B
    mean_w = op.M @ np.ones(op.n_dofs)
    w = mean_w if pin is None else np.asarray(pin, dtype=float)
    if abs(w.sum()) < 1e-14 * np.abs(w).sum():
        raise ValueError("pin vector must have nonzero total weight")
    sigma = _shift_scale(B, w) if shift is None else float(shift)
    A = B + sigma * np.outer(w, w)
    try:
        u = linalg.solve(A, r, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise SolverError(_kernel_report(op, f"factorization failed: {exc}")) from exc
    res = _relative_residual(B, u, r)
    if not np.isfinite(res) or res > tol:
        raise SolverError(_kernel_report(
            op, f"relative residual {res:.3e} exceeds tolerance {tol:.1e}"))
    return u, res, pin is None


def _kernel_report(op, msg):
    one = np.ones(op.n_dofs)
    k = np.linalg.norm(op.B @ one) / max(np.abs(op.B).max(), 1e-300)
    ev = linalg.eigvalsh(op.B, subset_by_index=[0, min(2, op.n_dofs - 1)])
    return (f"{msg}; kernel diagnostics: |B 1|/|B| = {k:.3e}, "
            f"smallest eigenvalues = {np.array2string(ev, precision=3)}")


def solve_neumann(op, f=0.0, g=0.0, tol=SOLVER_TOL, tol_compat=None, q=8,
                  pin=None, shift=None):
    """Weak solution of (-Delta)^s u = f in O, N_s u = g outside, mean zero on O.

    ``pin`` replaces the mean-zero normalization by w^T u = 0 for a custom
    weight vector w (then ``pinned_mean`` is False); ``shift`` overrides the
    deflation strength sigma.
    """
    m = op.mesh
    r = load_vector(m, f, g, q)
    comp = float(r.sum())
    if tol_compat is None:
        tol_compat = compatibility_tolerance(f, g, m, q)
    if abs(comp) > tol_compat:
        raise CompatibilityError(comp, tol_compat)
    # remove the quadrature-level incompatibility as a uniform interior source
    mean_w = op.M @ np.ones(op.n_dofs)
    r = r - comp * mean_w / mean_w.sum()
    u, res, pinned = _deflated_solve(op, r, pin, shift, tol)
    return EllipticSolution(Field.from_dofs(m, u), res, comp, pinned)


def _dirichlet_dofs(mesh, partition):
    x = mesh.nodes
    in_d = np.zeros(mesh.n_dofs, dtype=bool)
    in_d[:mesh.n_nodes] = partition.in_dirichlet(x)
    in_d[mesh.left_tail] = partition.tail_in_dirichlet(-1)
    in_d[mesh.right_tail] = partition.tail_in_dirichlet(+1)
    return in_d


def _dof_coordinates(mesh):
    """Vertex positions, with the box ends standing in for the two tails."""
    return np.concatenate([mesh.nodes, [mesh.lo, mesh.hi]])


def solve_mixed(op, f=0.0, phi=0.0, g=0.0, partition=None, tol=SOLVER_TOL, q=8):
    """u = phi on D, N_s u = g on N, (-Delta)^s u = f in O.

    Dofs whose vertex lies in D (and tails whose half-line lies in D) are
    eliminated; the tails take phi at the box ends.
    """
    m = op.mesh
    if partition is None or partition.is_empty:
        raise ValueError("empty Dirichlet set D: use solve_neumann for the pure Neumann problem")
    in_d = _dirichlet_dofs(m, partition)
    if not in_d.any():
        raise ValueError("Dirichlet set D contains no degrees of freedom; "
                         "refine the mesh or use solve_neumann")
    g = _as_callable(g)
    g_n = lambda x: np.where(partition.in_neumann(x), g(x), 0.0)
    r = load_vector(m, f, g_n, q)
    D = np.nonzero(in_d)[0]
    F = np.nonzero(~in_d)[0]
    u = np.empty(m.n_dofs)
    u[D] = _as_callable(phi)(_dof_coordinates(m)[D])
    B = op.B
    rhs = r[F] - B[np.ix_(F, D)] @ u[D]
    BFF = B[np.ix_(F, F)]
    try:
        u[F] = linalg.solve(BFF, rhs, assume_a="pos")
    except linalg.LinAlgError:
        u[F] = linalg.solve(BFF, rhs, assume_a="sym")
    res = _relative_residual(BFF, u[F], rhs)
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"mixed solve residual {res:.3e} exceeds tolerance {tol:.1e}")
    return EllipticSolution(Field.from_dofs(m, u), res, 0.0, False,
                            {"n_dirichlet": int(D.size)})


def solve_robin(op, alpha=1.0, beta=0.0, gamma=0.0, f=0.0, tol=SOLVER_TOL, q=8,
                tol_compat=None):
    """alpha N_s u + beta u = gamma outside, (-Delta)^s u = f in O.

    Exterior rows are collocated at the vertices: the discrete trace
    (Bu)_j / m_j stands in for N_s u(x_j), with m_j the hat measure
    (so row j reads alpha_j (Bu)_j + beta_j m_j u_j = m_j gamma_j). Interior
    rows keep the exterior halves of the boundary hats only where the
    condition is pure Neumann (beta = 0), with flux gamma/alpha.
    """
    m = op.mesh
    xd = _dof_coordinates(m)
    ext = m.exterior_dofs
    a_j = _as_callable(alpha)(xd[ext])
    b_j = _as_callable(beta)(xd[ext])
    c_j = _as_callable(gamma)(xd[ext])
    if np.any((a_j == 0) & (b_j == 0)):
        raise ValueError("alpha and beta vanish together; the Robin condition is void there")
    alpha_f, beta_f, gamma_f = map(_as_callable, (alpha, beta, gamma))

    def flux(x):
        al, be = alpha_f(x), beta_f(x)
        ok = (be == 0) & (al != 0)
        return np.where(ok, gamma_f(x) / np.where(ok, al, 1.0), 0.0)

    r = load_vector(m, f, flux, q)
    mj = np.append(hat_measure(m), [1.0, 1.0])[ext]   # tails: unit measure
    if np.all(b_j == 0):
        # pure Neumann rows: divide by alpha and use the deflated solver
        r[ext] = mj * c_j / a_j
        comp = float(r.sum())
        if tol_compat is None:
            scale = np.abs(r).sum()
            tol_compat = COMPAT_TOL * max(scale, 1e-300)
        if abs(comp) > tol_compat:
            raise CompatibilityError(comp, tol_compat)
        mean_w = op.M @ np.ones(op.n_dofs)
        r = r - comp * mean_w / mean_w.sum()
        u, res, pinned = _deflated_solve(op, r, tol=tol)
        return EllipticSolution(Field.from_dofs(m, u), res, comp, pinned)
    A = op.B.copy()
    A[ext] = a_j[:, None] * op.B[ext]
    A[ext, ext] += b_j * mj
    r[ext] = mj * c_j
    try:
        u = linalg.solve(A, r)
    except linalg.LinAlgError as exc:
        raise SolverError(f"Robin system is singular: {exc}") from exc
    res = _relative_residual(A, u, r)
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"Robin solve residual {res:.3e} exceeds tolerance {tol:.1e}")
    return EllipticSolution(Field.from_dofs(m, u), res, 0.0, False)


def energy_and_gradient(op, u, f=0.0, g=0.0, q=8):
    """I[u] = u^T B u / 2 - int_O f u - int_{CO} g u and its gradient B u - r."""
    u = _dofs(u)
    r = load_vector(op.mesh, f, g, q)
    Bu = op.B @ u
    return 0.5 * float(u @ Bu) - float(r @ u), Bu - r


def solve(op, problem: EllipticProblem, tol=SOLVER_TOL, q=8):
    if problem.kind == "neumann":
        return solve_neumann(op, problem.f, problem.g, tol=tol, q=q)
    if problem.kind == "mixed":
        return solve_mixed(op, problem.f, problem.phi, problem.g, problem.partition, tol=tol, q=q)
    return solve_robin(op, problem.alpha, problem.beta, problem.gamma, problem.f, tol=tol, q=q)

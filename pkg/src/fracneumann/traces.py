"""Pointwise evaluation: fractional Laplacian, nonlocal normal derivative,
exterior extension, H^s_{O,g} norm and fractional perimeter."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .kernel import c_norm, check_order, exterior_mass, power_integral, power_integral_span
from .mesh import Field, restrict
from .operators import _as_callable, cell_quadrature


@dataclass(frozen=True)
class NeumannTrace:
    points: np.ndarray
    values: np.ndarray      # N_s u
    renormalized: np.ndarray  # N_s u / w
    weight: np.ndarray       # w_{s,O}


def _exterior_points(mesh, points):
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if np.any(mesh.interval.contains(x)):
        raise ValueError("points must lie outside the closed interval")
    return x


def _interior_moments(field, x, s):
    """For exterior x: (int_O K0, int_O u K0) with u the P1 interior field."""
    m = field.mesh
    sigma = 1 + 2 * s
    h = m.h
    y = m.nodes[m.i_a:m.i_b + 1]
    u = restrict(field, "interior")
    y0, y1 = y[:-1][None, :], y[1:][None, :]
    u0, u1 = u[:-1][None, :], u[1:][None, :]
    X = x[:, None]
    right = X > m.interval.b
    # distance to the near and far end of each cell
    r0 = np.where(right, X - y1, y0 - X)
    u_near = np.where(right, u1, u0)
    slope = np.where(right, u0 - u1, u1 - u0) / h   # du/dr moving away from x
    I0 = power_integral_span(sigma, r0, h)
    I1 = power_integral_span(sigma - 1, r0, h)
    w0 = I0.sum(1)
    mom = (u_near * I0 + slope * (I1 - r0 * I0)).sum(1)
    return w0, mom


def neumann_trace(field, points, s, exterior_values=None):
    """N_s u and its renormalization at exterior points.

    ``exterior_values`` overrides u(x) at the points (e.g. for data that is
    discontinuous across the boundary); by default the field is interpolated.
    """
    check_order(s)
    x = _exterior_points(field.mesh, points)
    ux = field(x) if exterior_values is None else np.broadcast_to(
        np.asarray(exterior_values, dtype=float), x.shape)
    w0, mom = _interior_moments(field, x, s)
    c = c_norm(1, s)
    N = c * (ux * w0 - mom)
    return NeumannTrace(points=x, values=N, renormalized=ux - mom / w0, weight=c * w0)


def extend(field, points, s):
    """Kernel-weighted interior average at exterior points (N_s v = 0 there)."""
    check_order(s)
    x = _exterior_points(field.mesh, points)
    w0, mom = _interior_moments(field, x, s)
    return mom / w0


def extended_field(field, s):
    """Copy of ``field`` whose exterior vertices and tails carry the extension."""
    m = field.mesh
    dofs = field.dofs.copy()
    ext_nodes = np.concatenate([np.arange(0, m.i_a), np.arange(m.i_b + 1, m.n_nodes)])
    dofs[ext_nodes] = extend(field, m.nodes[ext_nodes], s)
    dofs[[m.left_tail, m.right_tail]] = extend(field, [m.lo, m.hi], s)
    return Field.from_dofs(m, dofs)


def _linear_power(s_exp, z0, z1, g0, g1):
    """int_{z0}^{z1} G(z) z^{-p} dz for G linear with G(z0)=g0, G(z1)=g1."""
    dz = z1 - z0
    slope = (g1 - g0) / dz
    I0 = power_integral(s_exp, z0, z1)
    I1 = power_integral(s_exp - 1, z0, z1)
    return (g0 - slope * z0) * I0 + slope * I1


def _one_sided(field, x, z_start, direction, s):
    """c-free int_{z_start}^inf (u(x) - u(x + direction z)) z^{-1-2s} dz."""
    m = field.mesh
    sigma = 1 + 2 * s
    ux = float(field(x))
    end = (m.hi - x) if direction > 0 else (x - m.lo)
    total = 0.0
    if end > z_start:
        # breakpoints of the P1 field along the ray
        zs = direction * (m.nodes - x)
        zs = np.sort(zs[(zs > z_start) & (zs < end)])
        bps = np.concatenate([[z_start], zs, [end]])
        za, zb = bps[:-1], bps[1:]
        ua = field(x + direction * za)
        ub = field(x + direction * zb)
        slope = (ub - ua) / (zb - za)
        # u(x+dz) = ua + slope (z - za)
        I0 = power_integral(sigma, za, zb)
        I1 = power_integral(sigma - 1, za, zb)
        total += float(np.sum((ux - ua + slope * za) * I0 - slope * I1))
    u_inf = field.farfield[1 if direction > 0 else 0]
    total += (ux - u_inf) * max(end, z_start) ** (-2 * s) / (2 * s)
    return total


def eval_fraclap(field, x, s):
    """Collocated (-Delta)^s u(x) for a field sampled from a smooth profile.

    Near x the two sides are paired, ``D(z) = 2u(x) - u(x+z) - u(x-z)``, and
    ``D(z)/z^2`` is interpolated linearly on the grid so the principal value
    needs no cancellation. Far parts use the P1 field exactly and the tails
    their constant far-field values.
    """
    check_order(s)
    m = field.mesh
    x = float(x)
    a, b = m.interval.a, m.interval.b
    if not (a + 2 * m.h - 1e-12 <= x <= b - 2 * m.h + 1e-12):
        raise ValueError(f"x = {x} must be at least 2h inside the interval")
    h = m.h
    Z = min(x - m.lo, m.hi - x)
    K = int(np.floor(Z / h + 1e-9))
    zk = h * np.arange(1, K + 1)
    ux = float(field(x))
    D = 2 * ux - field(x + zk) - field(x - zk)
    G = D / zk ** 2
    p = 2 * s - 1   # G(z) z^2 z^{-1-2s} = G(z) z^{-(2s-1)}
    # first cell: linear extrapolation through G(h), G(2h)
    g_at0 = 2 * G[0] - G[1]
    total = float(_linear_power(p, 0.0, zk[0], g_at0, G[0]))
    total += float(np.sum(_linear_power(p, zk[:-1], zk[1:], G[:-1], G[1:])))
    z_end = zk[-1]
    if Z - z_end > 1e-12 * h:
        gZ = (2 * ux - field(x + Z) - field(x - Z)) / Z ** 2
        total += float(_linear_power(p, z_end, Z, G[-1], gZ))
    total += _one_sided(field, x, Z, +1, s) + _one_sided(field, x, Z, -1, s)
    return c_norm(1, s) * total


@dataclass(frozen=True)
class HsNormParts:
    l2_sq: float
    weighted_sq: float
    seminorm_sq: float

    @property
    def total_sq(self):
        return self.l2_sq + self.weighted_sq + self.seminorm_sq

    @property
    def value(self):
        return float(np.sqrt(self.total_sq))


def hs_norm_parts(op, field, g=0.0, q=8):
    u = field.dofs if hasattr(field, "dofs") else np.asarray(field, dtype=float)
    m = op.mesh
    l2 = float(u @ op.M @ u)
    g = _as_callable(g)
    cells = np.nonzero(~m.cell_inside)[0]
    X, W, _ = cell_quadrature(m, cells, q)
    weighted = float(np.sum(np.abs(g(X)) * m.interpolate(u, X) ** 2 * W))
    semi = op.energy(u)
    return HsNormParts(l2, weighted, max(semi, 0.0))


def hs_norm(op, field, g=0.0, q=8):
    return hs_norm_parts(op, field, g, q).value


def fractional_perimeter(interval, s):
    """c_{1,s} int_O int_{CO} |x-y|^{-1-2s} = c L^{1-2s} / (s (1-2s))."""
    check_order(s)
    if s >= 0.5:
        raise ValueError("fractional perimeter of an interval diverges for s >= 1/2")
    a, b = (interval.a, interval.b) if hasattr(interval, "a") else interval
    L = b - a
    return c_norm(1, s) * L ** (1 - 2 * s) / (s * (1 - 2 * s))


def fractional_perimeter_quadrature(interval, s):
    """Adaptive quadrature of the exterior mass over both exterior half-lines."""
    check_order(s)
    if s >= 0.5:
        raise ValueError("fractional perimeter of an interval diverges for s >= 1/2")
    a, b = (interval.a, interval.b) if hasattr(interval, "a") else interval
    L = b - a

    c = c_norm(1, s)

    def w_regular(d):
        # w(b + d) * d^{2s}, finite at d = 0
        return c / (2 * s) * (1.0 - (d / (d + L)) ** (2 * s))

    near, _ = integrate.quad(w_regular, 0.0, L, weight="alg", wvar=(-2 * s, 0.0),
                             epsabs=0, epsrel=1e-13, limit=200)
    far, _ = integrate.quad(lambda d: float(exterior_mass(b + d, (a, b), s)), L, np.inf,
                            epsabs=0, epsrel=1e-13, limit=200)
    return 2 * (near + far)

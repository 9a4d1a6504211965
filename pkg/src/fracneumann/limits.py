"""Limits of the nonlocal Neumann quantities: s -> 1 and approach to the boundary."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .kernel import check_order, power_integral_span
from .mesh import build_mesh
from .operators import assemble


def richardson(values, steps, order):
    """Two-term extrapolation to step -> 0 assuming error ~ C step^order.

    Uses the last two entries of ``values``/``steps``.
    """
    f1, f2 = values[-2], values[-1]
    t1, t2 = steps[-2], steps[-1]
    r = (t2 / t1) ** order
    return (f2 - r * f1) / (1 - r)


@dataclass(frozen=True)
class SLimitTable:
    s: np.ndarray
    flux: np.ndarray
    scaled_energy: np.ndarray
    flux_limit: float
    energy_limit: float


def _check_support(u, mesh, name):
    beyond = np.concatenate([np.linspace(mesh.lo - mesh.R, mesh.lo, 50),
                             np.linspace(mesh.hi, mesh.hi + mesh.R, 50)])
    vals = np.asarray(u(beyond), dtype=float)
    if np.any(np.abs(vals) > 1e-14):
        raise ValueError(f"{name} must be supported inside the truncated box "
                         f"[{mesh.lo}, {mesh.hi}]")


def s_limit_suite(u, v, s_list, interval=(0.0, 1.0), h=0.02, R=2.0, q=8):
    """flux(s) = int_{CO} v N_s u and (1-s) times the energy of u, per s.

    Both are exact Galerkin quantities for the P1 interpolants on a mesh of
    width ``h`` (one assembly per s). The s -> 1 limits are extrapolated
    linearly in 1 - s from the two largest values of s.
    """
    s_arr = np.array(sorted(float(s) for s in s_list))
    for s in s_arr:
        check_order(s)
    mesh = build_mesh(interval, h, R)
    _check_support(u, mesh, "u")
    _check_support(v, mesh, "v")
    U, V = mesh.sample(u, 0.0).dofs, mesh.sample(v, 0.0).dofs
    flux, energy = [], []
    for s in s_arr:
        op = assemble(mesh, s, q)
        flux.append(float(V @ op.N @ U))
        energy.append((1 - s) * op.energy(U))
    flux, energy = np.array(flux), np.array(energy)
    if s_arr.size >= 2:
        fl = richardson(flux, 1 - s_arr, 1.0)
        el = richardson(energy, 1 - s_arr, 1.0)
    else:
        fl, el = flux[-1], energy[-1]
    return SLimitTable(s_arr, flux, energy, float(fl), float(el))


def _interval_ends(interval):
    a, b = (interval.a, interval.b) if hasattr(interval, "a") else interval
    return float(a), float(b)


def renormalized_trace(u, interval, s, x):
    """N~_s u(x) = int_O (u(x)-u(y)) K dy / int_O K dy at exterior points.

    ``u`` is a callable defined on the whole line. The integral is done by
    adaptive quadrature with breakpoints graded toward the boundary, so
    points very close to it keep full relative accuracy.
    """
    check_order(s)
    a, b = _interval_ends(interval)
    L = b - a
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    sig = 1 + 2 * s
    for i, xi in enumerate(x):
        if a <= xi <= b:
            raise ValueError("points must lie outside the closed interval")
        right = xi > b
        d = xi - b if right else a - xi
        ux = float(u(xi))
        # t = distance from the boundary into O
        y_of = (lambda t: b - t) if right else (lambda t: a + t)
        f = lambda t: (ux - float(u(y_of(t)))) * (d + t) ** (-sig)
        edges = d * np.geomspace(1.0, max(L / d, 1.0), int(np.ceil(np.log10(max(L / d, 10)))) + 2)
        edges = np.unique(np.clip(np.concatenate([[0.0], edges - d, [L]]), 0, L))
        num = sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
                  for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo)
        den = float(power_integral_span(sig, d, L))
        out[i] = num / den
    return out


def kappa_value(s):
    """2s/(2s-1): ratio of the half-line integrals of (1+t)^{-2s} and (1+t)^{-1-2s}."""
    check_order(s)
    if s <= 0.5:
        raise ValueError("kappa is infinite for s <= 1/2")
    return 2 * s / (2 * s - 1)


@dataclass(frozen=True)
class KappaEstimate:
    eps: np.ndarray
    ratios: np.ndarray       # N~_s u(x + eps nu) / eps
    limit: float             # extrapolated eps -> 0
    normal_derivative: float
    kappa: float             # limit / d_nu u


def boundary_kappa(u, interval, s, side="b", eps_list=(1e-2, 5e-3, 2.5e-3, 1.25e-3), du=None):
    """Ratio sequence N~_s u(x + eps nu)/eps at x = a or b and its eps -> 0 limit.

    The leading correction is of order eps^{2s-1} (the finite length of the
    interval seen from the boundary), which sets the Richardson exponent.
    ``du`` is the derivative of u; by default a central difference is used.
    """
    check_order(s)
    if s <= 0.5:
        raise ValueError(f"boundary_kappa requires s > 1/2 (kappa is infinite), got s = {s}")
    a, b = _interval_ends(interval)
    if side not in ("a", "b"):
        raise ValueError(f"side must be 'a' or 'b', got {side!r}")
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 2 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be at least two decreasing positive values")
    x0, nu = (b, 1.0) if side == "b" else (a, -1.0)
    ratios = renormalized_trace(u, (a, b), s, x0 + nu * eps) / eps
    limit = richardson(ratios, eps, 2 * s - 1)
    if du is None:
        hd = 1e-5 * max(1.0, b - a)
        dnu = nu * (float(u(x0 + hd)) - float(u(x0 - hd))) / (2 * hd)
    else:
        dnu = nu * float(du(x0))
    return KappaEstimate(eps, ratios, float(limit), dnu, float(limit / dnu))

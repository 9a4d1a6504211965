"""Fractional heat flow M du/dt = -B u + load(t) with nonlocal Neumann data.

The mass matrix vanishes on exterior dofs, so those rows are the algebraic
constraint (B u)_E = load_E(t), i.e. the discrete N_s u = g. A theta-scheme
(theta = 1 implicit Euler, theta = 1/2 Crank-Nicolson) steps the whole
differential-algebraic system with one reused LU factorization.
"""
from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import linalg

from .mesh import Field
from .operators import _dofs, load_vector

SCHEMES = {"implicit-euler": 1.0, "crank-nicolson": 0.5}


def _time_callable(f):
    if f is None:
        return None
    if callable(f):
        return f
    val = float(f)
    return lambda x, t: np.full(np.shape(x), val)


@dataclass
class HeatRun:
    u0: object
    dt: float
    T_final: float
    scheme: str = "implicit-euler"
    f: object = None      # f(x, t) in O
    g: object = None      # g(x, t) outside O
    sample_every: int = 1
    consistent_init: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T_final >= self.dt * (1 - 1e-12):
            raise ValueError(f"T_final = {self.T_final} must be at least dt = {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {sorted(SCHEMES)}, got {self.scheme!r}")
        if int(self.sample_every) < 1:
            raise ValueError("sample_every must be a positive integer")

    @property
    def n_steps(self):
        return max(1, int(round(self.T_final / self.dt)))


@dataclass
class Trajectory:
    times: np.ndarray
    fields: np.ndarray      # (n_samples, n_dofs)
    mass: np.ndarray
    energy: np.ndarray
    A: np.ndarray
    mean: float
    scheme: str
    mesh: object = None

    def field(self, i):
        return Field.from_dofs(self.mesh, self.fields[i])

    def max_increase(self, name):
        v = getattr(self, name)
        return float(np.max(np.diff(v), initial=-np.inf))


@dataclass(frozen=True)
class DecayFit:
    rate: float
    violation: float        # largest upward step of A
    zero_reached: bool = False
    n_used: int = 0


def diagnostics(op, field, m=None):
    """(mass, E, A) with mass = 1^T M u, E = (2/c) u^T B u, A = (u-m)^T M (u-m)."""
    u = _dofs(field)
    mass = float(np.sum(op.M @ u))
    if m is None:
        m = mass / op.mesh.interval.length
    d = u - m
    return mass, op.energy(u), float(d @ op.M @ d)


def _loads(mesh, f, g, t, q):
    if f is None and g is None:
        return None
    fx = (lambda x: f(x, t)) if f is not None else 0.0
    gx = (lambda x: g(x, t)) if g is not None else 0.0
    return load_vector(mesh, fx, gx, q)


def consistent_state(op, u, load=None):
    """Replace exterior values so that (B u)_E = load_E holds exactly."""
    m = op.mesh
    I, E = m.interior_nodes, m.exterior_dofs
    u = np.array(u, dtype=float)
    rhs = -op.B[np.ix_(E, I)] @ u[I]
    if load is not None:
        rhs = rhs + load[E]
    u[E] = linalg.solve(op.B[np.ix_(E, E)], rhs, assume_a="pos")
    return u


def evolve(op, run: HeatRun, q=8):
    m = op.mesh
    theta = SCHEMES[run.scheme]
    n = run.n_steps
    dt = run.T_final / n
    if theta < 1 and dt > m.h:
        warnings.warn(f"Crank-Nicolson with dt = {dt:g} > h = {m.h:g}: accuracy is not "
                      "guarded and energy decay is only asymptotic", RuntimeWarning)
    f, g = _time_callable(run.f), _time_callable(run.g)
    u = m.sample(run.u0).dofs if callable(run.u0) else _dofs(run.u0).astype(float).copy()
    if u.shape != (m.n_dofs,):
        raise ValueError(f"initial field has shape {u.shape}, expected ({m.n_dofs},)")
    if run.consistent_init:
        u = consistent_state(op, u, _loads(m, f, g, 0.0, q))
    lhs = op.M + theta * dt * op.B
    rhs_mat = op.M - (1 - theta) * dt * op.B
    lu = linalg.lu_factor(lhs)

    mass0, _, _ = diagnostics(op, u)
    mean = mass0 / m.interval.length
    times, fields = [0.0], [u.copy()]
    for k in range(1, n + 1):
        rhs = rhs_mat @ u
        load = _loads(m, f, g, (k - 1 + theta) * dt, q)
        if load is not None:
            rhs += dt * load
        u = linalg.lu_solve(lu, rhs)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite state at step {k}")
        if k % run.sample_every == 0 or k == n:
            times.append(k * dt)
            fields.append(u.copy())
    fields = np.array(fields)
    diag = np.array([diagnostics(op, v, mean) for v in fields])
    return Trajectory(np.array(times), fields, diag[:, 0], diag[:, 1], diag[:, 2],
                      mean, run.scheme, m)


def fit_decay(traj, t_min=None, t_max=None, zero_tol=1e-28):
    """Least-squares rate c in A(t) ~ A(0) e^{-ct} over an optional time window.

    If A vanishes (relative to the field scale) the rate is +inf and the
    ``zero_reached`` flag is set.
    """
    t, A = np.asarray(traj.times), np.asarray(traj.A)
    scale = max(float(np.max(np.abs(traj.fields))) ** 2 * traj.mesh.interval.length
                if traj.mesh is not None else 1.0, 1e-300)
    up = np.diff(A)
    violation = float(max(up.max(initial=0.0), 0.0))
    if np.any(A <= zero_tol * scale):
        return DecayFit(np.inf, violation, True, 0)
    sel = np.ones(t.size, dtype=bool)
    if t_min is not None:
        sel &= t >= t_min
    if t_max is not None:
        sel &= t <= t_max
    if sel.sum() < 5:
        raise ValueError(f"need at least 5 samples with A > 0 in the window, got {sel.sum()}")
    slope = np.polyfit(t[sel], np.log(A[sel]), 1)[0]
    return DecayFit(float(-slope), violation, False, int(sel.sum()))

"""Uniform vertex grid over the truncated line [a-R, b+R] with far-field unknowns.

Degrees of freedom are ordered as the mesh vertices from ``a-R`` to ``b+R``
followed by two far-field values: one for the left tail ``x < a-R`` and one
for the right tail ``x > b+R``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

RATIO_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"interval needs finite a < b, got ({self.a}, {self.b})")

    @property
    def length(self):
        return self.b - self.a

    def contains(self, x, closed=True):
        x = np.asarray(x, dtype=float)
        if closed:
            return (x >= self.a) & (x <= self.b)
        return (x > self.a) & (x < self.b)


def _as_interval(domain):
    if isinstance(domain, Interval):
        return domain
    a, b = domain
    return Interval(float(a), float(b))


def _integral_ratio(num, den, name):
    ratio = num / den
    k = round(ratio)
    if k < 1 or abs(ratio - k) > RATIO_TOL * max(1.0, abs(ratio)):
        raise ValueError(f"{name} = {ratio:.12g} is not a positive integer")
    return int(k)


@dataclass(frozen=True, eq=False)
class Mesh:
    interval: Interval
    h: float
    R: float
    nodes: np.ndarray = dc_field(repr=False)
    i_a: int = 0
    i_b: int = 0
    has_farfield: bool = True

    @property
    def n_nodes(self):
        return self.nodes.size

    @property
    def n_dofs(self):
        return self.n_nodes + 2

    @property
    def n_cells(self):
        return self.n_nodes - 1

    @property
    def left_tail(self):
        return self.n_nodes

    @property
    def right_tail(self):
        return self.n_nodes + 1

    @property
    def interior_nodes(self):
        return np.arange(self.i_a, self.i_b + 1)

    @property
    def exterior_dofs(self):
        return np.concatenate([np.arange(0, self.i_a),
                               np.arange(self.i_b + 1, self.n_nodes),
                               [self.left_tail, self.right_tail]])

    @property
    def cell_inside(self):
        """Region tag per cell: True iff the cell midpoint lies in (a, b)."""
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return self.interval.contains(mid, closed=False)

    @property
    def interior_cells(self):
        return np.arange(self.i_a, self.i_b)

    @property
    def lo(self):
        return self.interval.a - self.R

    @property
    def hi(self):
        return self.interval.b + self.R

    def locate(self, x):
        """Cell index containing each point of the truncated box (clipped)."""
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.lo) / self.h).astype(int)
        return np.clip(idx, 0, self.n_cells - 1)

    def interpolate(self, values, x):
        """P1 interpolation of nodal values (length n_nodes or n_dofs) at x.

        Points beyond the box take the corresponding far-field value when
        ``values`` carries the far-field entries.
        """
        values = np.asarray(values, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.nodes, values[:self.n_nodes])
        if values.size == self.n_dofs:
            out = np.where(x < self.lo, values[self.left_tail], out)
            out = np.where(x > self.hi, values[self.right_tail], out)
        return out

    def field(self, values, farfield=None):
        return Field(self, values, farfield)

    def sample(self, func, farfield="edge"):
        """Field from a callable evaluated at every vertex.

        ``farfield="edge"`` copies the end-vertex values into the tails;
        a number or pair sets them explicitly.
        """
        vals = np.broadcast_to(np.asarray(func(self.nodes), dtype=float),
                               self.nodes.shape).copy()
        if isinstance(farfield, str):
            ff = (vals[0], vals[-1])
        else:
            ff = np.broadcast_to(np.asarray(farfield, dtype=float), (2,))
        return Field(self, vals, ff)


def build_mesh(interval, h, R):
    interval = _as_interval(interval)
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if not R >= 2 * interval.length * (1 - RATIO_TOL):
        raise ValueError(
            f"truncation radius R = {R} is smaller than 2(b-a) = {2 * interval.length}")
    n_in = _integral_ratio(interval.length, h, "(b-a)/h")
    n_out = _integral_ratio(R, h, "R/h")
    a, b = interval.a, interval.b
    nodes = np.concatenate([
        np.linspace(a - R, a, n_out + 1)[:-1],
        np.linspace(a, b, n_in + 1),
        np.linspace(b, b + R, n_out + 1)[1:],
    ])
    return Mesh(interval=interval, h=interval.length / n_in, R=float(R), nodes=nodes,
                i_a=n_out, i_b=n_out + n_in)


class Field:
    """Nodal values on a mesh plus the two far-field values (left, right)."""

    def __init__(self, mesh, values, farfield=None):
        values = np.asarray(values, dtype=float)
        if values.shape == (mesh.n_dofs,) and farfield is None:
            values, farfield = values[:mesh.n_nodes], values[mesh.n_nodes:]
        if values.shape != (mesh.n_nodes,):
            raise ValueError(f"expected {mesh.n_nodes} nodal values, got {values.shape}")
        if farfield is None:
            farfield = (values[0], values[-1])
        farfield = np.broadcast_to(np.asarray(farfield, dtype=float), (2,)).copy()
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(farfield))):
            raise ValueError("field entries must be finite")
        self.mesh = mesh
        self.values = values.copy()
        self.farfield = farfield

    @classmethod
    def from_dofs(cls, mesh, dofs):
        dofs = np.asarray(dofs, dtype=float)
        return cls(mesh, dofs[:mesh.n_nodes], dofs[mesh.n_nodes:])

    @property
    def dofs(self):
        return np.concatenate([self.values, self.farfield])

    def __call__(self, x):
        return self.mesh.interpolate(self.dofs, x)

    def __repr__(self):
        return f"Field(n_nodes={self.values.size}, farfield={tuple(self.farfield)})"


def restrict(field, region):
    """Interior view (vertices in [a, b]) or exterior view (rest + far-field)."""
    m = field.mesh
    if region == "interior":
        return field.values[m.i_a:m.i_b + 1].copy()
    if region == "exterior":
        return field.dofs[m.exterior_dofs]
    raise ValueError(f"region must be 'interior' or 'exterior', got {region!r}")


def combine(mesh, interior, exterior):
    """Inverse of the two restriction views."""
    dofs = np.empty(mesh.n_dofs)
    dofs[mesh.interior_nodes] = interior
    dofs[mesh.exterior_dofs] = exterior
    return Field.from_dofs(mesh, dofs)


class ExteriorPartition:
    """Split of the exterior into a Dirichlet part D and a Neumann part N.

    ``dirichlet`` is a list of intervals ``(lo, hi)`` (either end may be
    infinite); every exterior point not covered by them belongs to N.
    """

    def __init__(self, interval, dirichlet=()):
        self.interval = _as_interval(interval)
        self.dirichlet = [(float(lo), float(hi)) for lo, hi in dirichlet]
        for lo, hi in self.dirichlet:
            if not lo < hi:
                raise ValueError(f"empty Dirichlet interval ({lo}, {hi})")

    def in_dirichlet(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.dirichlet:
            out |= (x > lo) & (x < hi)
        return out & ~self.interval.contains(x)

    def in_neumann(self, x):
        x = np.asarray(x, dtype=float)
        return ~self.interval.contains(x) & ~self.in_dirichlet(x)

    def tail_in_dirichlet(self, side):
        """Whether x -> -inf (side < 0) or x -> +inf (side > 0) lies in D."""
        if side < 0:
            return any(lo == -np.inf for lo, _ in self.dirichlet)
        return any(hi == np.inf for _, hi in self.dirichlet)

    @property
    def is_empty(self):
        return not self.dirichlet

    def to_json(self):
        return [[_encode_inf(lo), _encode_inf(hi)] for lo, hi in self.dirichlet]


def _encode_inf(v):
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    return v

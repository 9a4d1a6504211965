"""Fractional kernel, normalization constant and closed-form 1D kernel integrals."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

#: exterior_mass refuses points closer than this to the boundary
BOUNDARY_GUARD = 1e-12


@dataclass(frozen=True)
class FracOrder:
    s: float
    n: int = 1

    def __post_init__(self):
        check_order(self.s)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n}")


@dataclass(frozen=True)
class KernelConstants:
    s: float
    n: int
    c_ns: float

    @classmethod
    def for_order(cls, s, n=1):
        return cls(s=s, n=n, c_ns=c_norm(n, s))


def check_order(s):
    if not (0.0 < s < 1.0) or not np.isfinite(s):
        raise ValueError(f"s must lie in (0,1), got {s!r}")
    return float(s)


def c_norm(n, s):
    """Normalization constant c_{n,s} of the fractional Laplacian.

    Chosen so that ``(-Delta)^s`` has Fourier symbol ``|xi|^{2s}``::

        c_{n,s} = 2^{2s} s Gamma(n/2 + s) / (pi^{n/2} Gamma(1 - s))
    """
    check_order(s)
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    log_c = (2 * s * math.log(2.0) + math.log(s) + gammaln(n / 2 + s)
             - (n / 2) * math.log(math.pi) - gammaln(1 - s))
    return math.exp(log_c)


def kernel_eval(x, y, s, n=1):
    """c_{n,s} |x - y|^{-n-2s}; raises on coincident points."""
    r = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if np.any(r == 0):
        raise ZeroDivisionError("kernel evaluated at coincident points x == y")
    out = c_norm(n, s) * r ** (-n - 2 * s)
    return float(out) if np.ndim(out) == 0 else out


def power_integral(p, r0, r1):
    """Integral of r^{-p} over [r0, r1] for 0 < r0 <= r1 (r1 may be inf).

    Uses the logarithmic branch for p == 1. Vectorized over r0, r1.
    """
    r0 = np.asarray(r0, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    if p == 1.0:
        out = np.log(r1) - np.log(r0)
    else:
        q = 1.0 - p
        with np.errstate(over="ignore", divide="ignore"):
            if q < 0:
                # decaying primitive; r1 = inf contributes zero
                out = (r0 ** q - r1 ** q) / (-q)
            else:
                out = (r1 ** q - r0 ** q) / q
    return out


def power_integral_span(p, r0, length):
    """Integral of r^{-p} over [r0, r0 + length] without cancellation.

    Stable when ``length << r0`` (far-away cells), where subtracting the two
    primitive values would lose most digits.
    """
    r0 = np.asarray(r0, dtype=float)
    rel = np.log1p(np.asarray(length, dtype=float) / r0)
    if p == 1.0:
        return rel
    q = 1.0 - p
    return r0 ** q * np.expm1(q * rel) / q


def power_moment(p, k, r0, r1):
    """Integral of r^{k-p} over [r0, r1]: polynomial-weighted kernel moments."""
    return power_integral(p - k, r0, r1)


@dataclass(frozen=True)
class Primitives:
    """Closed-form integrals of r^{-1-2s}, r^{-2s} and r^{1-2s}.

    Each callable takes ``(r0, r1)`` with ``0 < r0 <= r1`` and returns the
    definite integral; ``tail(R)`` is the integral of r^{-1-2s} over [R, inf).
    """
    s: float

    def kernel(self, r0, r1):
        return power_integral(1 + 2 * self.s, r0, r1)

    def first(self, r0, r1):
        return power_integral(2 * self.s, r0, r1)

    def second(self, r0, r1):
        return power_integral(2 * self.s - 1, r0, r1)

    def tail(self, R):
        return np.asarray(R, dtype=float) ** (-2 * self.s) / (2 * self.s)


def analytic_primitives(s):
    check_order(s)
    return Primitives(s)


def _interval_ends(domain):
    a, b = (domain.a, domain.b) if hasattr(domain, "a") else domain
    return float(a), float(b)


def exterior_mass(x, domain, s, guard=BOUNDARY_GUARD):
    """w_{s,Omega}(x) = c_{1,s} int_Omega |x-y|^{-1-2s} dy for exterior x."""
    a, b = _interval_ends(domain)
    x = np.asarray(x, dtype=float)
    dist = np.where(x > b, x - b, a - x)
    if np.any((x >= a) & (x <= b)):
        raise ValueError("exterior_mass requires points outside the closed interval")
    if np.any(dist < guard):
        raise OverflowError(
            f"point within {guard:g} of the boundary; use boundary_kappa for the limit")
    out = c_norm(1, s) * power_integral_span(1 + 2 * s, dist, b - a)
    return float(out) if out.ndim == 0 else out

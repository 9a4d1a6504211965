"""Reflected Levy flight on the line: payoffs of the mixed problem and occupation.

The walk is simulated as its embedded jump chain (time plays no role in the
functionals computed here). Jumps shorter than the cutoff ``eps`` are dropped,
which turns the jump law into an exactly invertible power law. A walker that
lands in the Neumann part N of the exterior collects psi there and returns
to the interval with density proportional to |x - y|^{-1-2s}.

Walkers are split into fixed-size blocks; block ``j`` draws from its own
stream spawned from the seed, so results do not depend on how many threads
process the blocks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
import warnings

import numpy as np

from .kernel import check_order
from .mesh import ExteriorPartition, _as_interval
from .operators import _as_callable

BLOCK = 8192
CAP_WARN = 0.01


def jump_from_uniform(s, eps, u, sign_u):
    """Signed jump eps U^{-1/(2s)} with sign from a second uniform."""
    mag = eps * np.asarray(u, dtype=float) ** (-1.0 / (2 * s))
    return np.where(np.asarray(sign_u) < 0.5, -mag, mag)


def sample_jump(s, eps, rng, size=None):
    check_order(s)
    if not eps > 0:
        raise ValueError(f"jump cutoff eps must be positive, got {eps}")
    u = 1.0 - rng.random(size)    # (0, 1]
    return jump_from_uniform(s, eps, u, rng.random(size))


def return_from_uniform(x, interval, s, u):
    """Inverse CDF of the density ~ |x-y|^{-1-2s} on (a, b) for exterior x.

    For x > b, F(y) = [(x-y)^{-2s} - (x-a)^{-2s}] / [(x-b)^{-2s} - (x-a)^{-2s}],
    so u = 0 gives the far end a and u = 1 the near end b (mirrored for x < a).
    Evaluated through log1p/expm1 so far-away points keep full precision.
    """
    I = _as_interval(interval)
    a, b = I.a, I.b
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any((x >= a) & (x <= b)):
        raise ValueError("return point must lie outside the closed interval")
    right = x > b
    d = np.where(right, x - b, a - x)
    q = 2 * s
    # 1 - rho with rho = (d/(d+L))^{2s}
    one_m_rho = -np.expm1(-q * np.log1p(I.length / d))
    # ((x-y)/d)^{-2s} = 1 - (1-u)(1-rho); measure from the near end
    # so that points far away do not cancel against x
    depth = d * np.expm1(-np.log1p(-(1.0 - u) * one_m_rho) / q)
    y = np.where(right, b - depth, a + depth)
    return np.clip(y, a, b)


def sample_return(x, interval, s, rng):
    check_order(s)
    x = np.asarray(x, dtype=float)
    return return_from_uniform(x, interval, s, rng.random(x.shape))


@dataclass
class WalkConfig:
    s: float
    interval: tuple = (0.0, 1.0)
    eps: float = 0.002
    partition: ExteriorPartition | None = None
    phi: object = 1.0
    psi: object = 0.0
    max_jumps: int = 10 ** 6
    n_walkers: int = 10 ** 5
    seed: int = 0

    def __post_init__(self):
        check_order(self.s)
        self.interval = _as_interval(self.interval)
        if not self.eps > 0:
            raise ValueError(f"jump cutoff eps must be positive, got {self.eps}")
        if int(self.max_jumps) < 1:
            raise ValueError("max_jumps must be at least 1")
        if int(self.n_walkers) < 1:
            raise ValueError("n_walkers must be at least 1")
        if self.partition is None:
            self.partition = ExteriorPartition(self.interval, [])

    @property
    def has_dirichlet(self):
        return not self.partition.is_empty


@dataclass
class McResult:
    x0: float
    estimate: float
    stderr: float
    count: int
    absorbed: int
    capped: int
    mean_jumps: float = 0.0
    info: dict = dc_field(default_factory=dict)

    @property
    def capped_fraction(self):
        return self.capped / max(self.absorbed + self.capped, 1)


def _block_streams(seed, n_blocks, salt=0):
    ss = np.random.SeedSequence([int(seed), int(salt)])
    return [np.random.Generator(np.random.Philox(c)) for c in ss.spawn(n_blocks)]


def _walk_block(cfg, x0, n, rng):
    """Payoff, absorption flag and jump count for n walkers started at x0."""
    phi, psi = _as_callable(cfg.phi), _as_callable(cfg.psi)
    I, part, s = cfg.interval, cfg.partition, cfg.s
    pos = np.full(n, float(x0))
    pay = np.zeros(n)
    jumps = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for _ in range(int(cfg.max_jumps)):
        if active.size == 0:
            break
        m = active.size
        y = pos[active] + jump_from_uniform(s, cfg.eps, 1.0 - rng.random(m), rng.random(m))
        jumps[active] += 1
        inside = I.contains(y)
        in_d = ~inside & part.in_dirichlet(y)
        in_n = ~inside & ~in_d
        if in_d.any():
            idx = active[in_d]
            pay[idx] += phi(y[in_d])
            done[idx] = True
        if in_n.any():
            yn = y[in_n]
            pay[active[in_n]] += psi(yn)
            y[in_n] = return_from_uniform(yn, I, s, rng.random(yn.size))
        keep = ~in_d
        pos[active[keep]] = y[keep]
        active = active[keep]
    return pay, done, jumps


def _run_blocks(cfg, work, threads):
    n = int(cfg.n_walkers)
    sizes = [min(BLOCK, n - k) for k in range(0, n, BLOCK)]
    tasks = list(enumerate(sizes))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            return list(ex.map(lambda t: work(*t), tasks))
    return [work(*t) for t in tasks]


def run_payoff(cfg, starts, threads=1):
    """Mean collected payoff per start point, with standard errors."""
    if not cfg.has_dirichlet:
        raise ValueError("walk never terminates: the Dirichlet set D is empty")
    starts = np.atleast_1d(np.asarray(starts, dtype=float))
    if not np.all(cfg.interval.contains(starts, closed=False)):
        raise ValueError("start points must lie inside the interval")
    results = []
    n_blocks = -(-int(cfg.n_walkers) // BLOCK)
    for k, x0 in enumerate(starts):
        streams = _block_streams(cfg.seed, n_blocks, salt=k)
        parts = _run_blocks(cfg, lambda j, m: _walk_block(cfg, x0, m, streams[j]), threads)
        pay = np.concatenate([p[0] for p in parts])
        done = np.concatenate([p[1] for p in parts])
        jumps = np.concatenate([p[2] for p in parts])
        vals = pay[done]
        cnt = int(done.sum())
        capped = int((~done).sum())
        est = float(vals.mean()) if cnt else np.nan
        se = float(vals.std(ddof=1) / np.sqrt(cnt)) if cnt > 1 else np.nan
        res = McResult(float(x0), est, se, cnt, cnt, capped, float(jumps.mean()))
        if res.capped_fraction > CAP_WARN:
            warnings.warn(f"{capped} walkers from x0={x0} hit max_jumps "
                          f"({100 * res.capped_fraction:.1f}%); the estimate is biased",
                          RuntimeWarning)
        results.append(res)
    return results


@dataclass(frozen=True)
class Occupation:
    edges: np.ndarray
    density: np.ndarray      # normalized so that sum(density * width) = 1
    frequency: np.ndarray    # bin fractions, summing to 1
    counts: np.ndarray
    n_jumps: int
    stderr: np.ndarray = None   # of ``frequency``, from between-chain spread

    def sup_distance_to_uniform(self):
        L = self.edges[-1] - self.edges[0]
        return float(np.max(np.abs(self.density * L - 1.0)))


def _occupation_block(cfg, x0, n_chains, n_steps, burn, edges, rng):
    I, s = cfg.interval, cfg.s
    pos = np.full(n_chains, float(x0))
    nb = edges.size - 1
    base = np.arange(n_chains) * nb
    counts = np.zeros(n_chains * nb, dtype=np.int64)
    for step in range(burn + n_steps):
        y = pos + jump_from_uniform(s, cfg.eps, 1.0 - rng.random(n_chains), rng.random(n_chains))
        out = ~I.contains(y)
        if out.any():
            y[out] = return_from_uniform(y[out], I, s, rng.random(int(out.sum())))
        pos = y
        if step >= burn:
            k = np.clip(np.searchsorted(edges, pos, side="right") - 1, 0, nb - 1)
            counts += np.bincount(base + k, minlength=counts.size)
    return counts.reshape(n_chains, nb)


def occupation_histogram(cfg, total_jumps, x0=None, bins=20, n_chains=20000,
                         burn_in=20.0, threads=1):
    """Occupation frequencies of the reflected chain (D must be empty).

    ``n_chains`` independent chains start at ``x0`` and each records
    ``total_jumps / n_chains`` positions after a burn-in of ``burn_in`` times
    that many jumps.
    """
    if cfg.has_dirichlet:
        raise ValueError("occupation mode needs pure reflection (empty D)")
    I = cfg.interval
    x0 = 0.5 * (I.a + I.b) if x0 is None else float(x0)
    n_chains = int(min(n_chains, total_jumps))
    n_steps = int(np.ceil(total_jumps / n_chains))
    burn = int(np.ceil(burn_in * n_steps))
    edges = np.linspace(I.a, I.b, bins + 1)
    sizes = [min(BLOCK, n_chains - k) for k in range(0, n_chains, BLOCK)]
    streams = _block_streams(cfg.seed, len(sizes), salt=10 ** 6)
    work = lambda j: _occupation_block(cfg, x0, sizes[j], n_steps, burn, edges, streams[j])
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            parts = list(ex.map(work, range(len(sizes))))
    else:
        parts = [work(j) for j in range(len(sizes))]
    per_chain = np.concatenate(parts, axis=0)
    counts = per_chain.sum(0)
    total = int(counts.sum())
    freq = counts / total
    chain_freq = per_chain / per_chain.sum(1, keepdims=True)
    se = chain_freq.std(0, ddof=1) / np.sqrt(n_chains) if n_chains > 1 else np.full(bins, np.nan)
    return Occupation(edges, freq / np.diff(edges), freq, counts, total, se)

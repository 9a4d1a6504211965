import numpy as np
import pytest

from fracneumann.elliptic import solve_mixed
from fracneumann.mesh import ExteriorPartition
from fracneumann.stochastic import (WalkConfig, jump_from_uniform, occupation_histogram,
                                    return_from_uniform, run_payoff, sample_jump, sample_return)


def return_cdf(y, x, s, a=0.0, b=1.0):
    """Exact CDF of the return density ~ |x-y|^{-1-2s} on (a,b), for x > b."""
    F = lambda t: -(x - t) ** (-2 * s)
    return (F(y) - F(a)) / (F(b) - F(a))


def test_jump_examples():
    assert abs(jump_from_uniform(0.5, 0.01, 0.25, 0.9) - 0.04) < 1e-15
    assert abs(jump_from_uniform(0.5, 0.01, 0.25, 0.1) + 0.04) < 1e-15
    assert abs(jump_from_uniform(0.3, 0.01, 1.0, 0.9) - 0.01) < 1e-16
    with pytest.raises(ValueError):
        sample_jump(0.5, 0.0, np.random.default_rng(0))


@pytest.mark.parametrize("s", [0.25, 0.5, 0.8])
def test_jump_tail_law(s):
    eps, n = 0.01, 10 ** 6
    z = sample_jump(s, eps, np.random.default_rng(7), n)
    assert abs(np.mean(z > 0) - 0.5) < 3 * np.sqrt(0.25 / n)
    for k in (2, 10, 100):
        p = k ** (-2 * s)
        frac = np.mean(np.abs(z) > k * eps)
        assert abs(frac - p) < 3 * np.sqrt(p * (1 - p) / n)


def test_return_examples():
    assert abs(return_from_uniform(2.0, (0, 1), 0.5, 0.5) - 2 / 3) < 1e-14
    assert return_from_uniform(2.0, (0, 1), 0.5, 0.0) == 0.0
    assert return_from_uniform(2.0, (0, 1), 0.5, 1.0) == 1.0
    # mirror image for a point on the left
    assert abs(return_from_uniform(-1.0, (0, 1), 0.5, 0.5) - 1 / 3) < 1e-14
    with pytest.raises(ValueError):
        return_from_uniform(0.5, (0, 1), 0.5, 0.5)
    # very distant points keep accuracy: the law tends to uniform
    assert abs(return_from_uniform(1e12, (0, 1), 0.4, 0.3) - 0.3) < 1e-9


@pytest.mark.parametrize("x,s", [(1.05, 0.5), (2.0, 0.3), (7.0, 0.8)])
def test_return_histogram(x, s):
    n = 10 ** 6
    y = sample_return(np.full(n, x), (0, 1), s, np.random.default_rng(11))
    edges = np.linspace(0, 1, 51)
    counts = np.histogram(y, edges)[0]
    p = np.diff(return_cdf(edges, x, s))
    assert np.all(np.abs(counts / n - p) <= 3 * np.sqrt(p * (1 - p) / n))
    for d in np.arange(1, 10) / 10:
        P = return_cdf(d, x, s)
        assert abs(np.mean(y <= d) - P) <= 3 * np.sqrt(P * (1 - P) / n)


def _cfg(**kw):
    base = dict(s=0.5, interval=(0, 1), eps=0.01, n_walkers=4000, seed=3,
                partition=ExteriorPartition((0, 1), [(1, np.inf), (-np.inf, -0.5)]),
                phi=lambda y: np.where(y > 1, 1.0, 0.0))
    base.update(kw)
    return WalkConfig(**base)


def test_full_dirichlet_gives_one():
    cfg = _cfg(partition=ExteriorPartition((0, 1), [(-np.inf, 0), (1, np.inf)]), phi=1.0)
    for r in run_payoff(cfg, [0.1, 0.5]):
        assert r.estimate == 1.0 and r.stderr == 0.0 and r.capped == 0


def test_bonus_linearity():
    a = run_payoff(_cfg(phi=0.0, psi=1.0), [0.3])[0]
    b = run_payoff(_cfg(phi=0.0, psi=2.0), [0.3])[0]
    assert a.estimate > 0
    assert abs(b.estimate - 2 * a.estimate) < 1e-12
    c = run_payoff(_cfg(phi=0.0, psi=2.0, seed=99), [0.3])[0]
    assert abs(c.estimate - 2 * a.estimate) < 3 * np.hypot(c.stderr, 2 * a.stderr)


def test_thread_independence():
    cfg = _cfg(n_walkers=20000)
    r1 = run_payoff(cfg, [0.2, 0.7], threads=1)
    r3 = run_payoff(cfg, [0.2, 0.7], threads=3)
    for a, b in zip(r1, r3):
        assert a.estimate == b.estimate and a.stderr == b.stderr


def test_errors_and_caps():
    with pytest.raises(ValueError, match="never terminates"):
        run_payoff(_cfg(partition=ExteriorPartition((0, 1), [])), [0.5])
    with pytest.raises(ValueError):
        run_payoff(_cfg(), [1.5])
    with pytest.warns(RuntimeWarning, match="max_jumps"):
        r = run_payoff(_cfg(max_jumps=2), [0.5])[0]
    assert r.capped > 0 and r.count + r.capped == 4000
    with pytest.raises(ValueError):
        _cfg(eps=-1.0)


def test_short_payoff_against_pde():
    # coarse version of the headline comparison at a single probe
    from conftest import operator_for
    cfg = _cfg(eps=0.004, n_walkers=20000)
    mc = run_payoff(cfg, [0.9])[0]
    u = [solve_mixed(operator_for(0.5, h=h), 0.0, cfg.phi, 0.0, cfg.partition).field(0.9)
         for h in (0.02, 0.01)]
    assert abs(mc.estimate - (2 * u[1] - u[0])) < 3 * mc.stderr + 0.005


def test_occupation_normalized_and_flat():
    cfg = _cfg(partition=ExteriorPartition((0, 1), []), eps=0.005, seed=5)
    occ = occupation_histogram(cfg, 200000, bins=10, n_chains=4000, burn_in=20.0)
    assert abs(occ.frequency.sum() - 1.0) < 1e-14
    assert abs(np.sum(occ.density * np.diff(occ.edges)) - 1.0) < 1e-14
    assert occ.sup_distance_to_uniform() < 0.1
    with pytest.raises(ValueError):
        occupation_histogram(_cfg(), 1000)

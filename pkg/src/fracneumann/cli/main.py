"""fracneumann {solve,eig,heat,mc,limits,perimeter} --config FILE [--out DIR]

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
import warnings

import numpy as np

from .config import ConfigError, U64_MAX, emit, parse_config
from .expr import ExprEvalError, parse_expr
from .output import write_csv, write_manifest, write_svg
from .. import elliptic, heat, limits, spectral, stochastic, traces
from ..mesh import ExteriorPartition, build_mesh
from ..operators import AssemblyError, assemble

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("solve", "eig", "heat", "mc", "limits", "perimeter")


class InputError(ValueError):
    pass


def _u64(text):
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}")
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _positive_int(text):
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="fracneumann", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="strict-schema JSON config")
    p.add_argument("--out", default="out", help="output directory (created if missing)")
    p.add_argument("--seed", type=_u64, default=None, help="overrides the config seed")
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads for Monte Carlo")
    return p


def _section(cfg, name):
    sec = getattr(cfg, name)
    if sec is None:
        raise InputError(f"config has no '{name}' section")
    return sec


def _mesh_op(cfg):
    mesh = build_mesh((cfg.domain.a, cfg.domain.b), cfg.grid.h, cfg.grid.R)
    return mesh, assemble(mesh, cfg.s, cfg.grid.q)


def _path(out, name):
    return os.path.join(out, name)


def cmd_solve(cfg, out, threads):
    pb = _section(cfg, "problem")
    mesh, op = _mesh_op(cfg)
    f, g = parse_expr(pb.f), parse_expr(pb.g)
    if pb.kind == "neumann":
        sol = elliptic.solve_neumann(op, f, g, q=cfg.grid.q)
    elif pb.kind == "mixed":
        sol = elliptic.solve_mixed(op, f, parse_expr(pb.phi), g, pb.partition(cfg.domain),
                                   q=cfg.grid.q)
    else:
        sol = elliptic.solve_robin(op, parse_expr(pb.alpha), parse_expr(pb.beta),
                                   parse_expr(pb.gamma), f, q=cfg.grid.q)
    u = sol.field
    files = [write_csv(_path(out, "solution.csv"), ["x", "u"], [mesh.nodes, u.values]),
             write_svg(_path(out, "solution.svg"), [(mesh.nodes, u.values, "u")],
                       title=f"{pb.kind} solution, s = {cfg.s}", xlabel="x", ylabel="u")]
    print(f"solved {pb.kind} problem: relative residual {sol.residual:.3e}")
    return files, {"residual": sol.residual, "compatibility": sol.compatibility,
                   "pinned_mean": sol.pinned_mean, "farfield": list(u.farfield)}


def cmd_eig(cfg, out, threads):
    sec = _section(cfg, "eig")
    mesh, op = _mesh_op(cfg)
    n_int = mesh.interior_nodes.size
    if sec.k > n_int:
        raise InputError(f"eig.k = {sec.k} exceeds the {n_int} interior degrees of freedom")
    res = spectral.eigs(op, sec.k)
    i = np.arange(1, res.k + 1)
    mu = np.concatenate([[np.nan], res.mu])
    cols = [mesh.nodes] + [res.vectors[:mesh.n_nodes, j] for j in range(res.k)]
    files = [write_csv(_path(out, "eigenvalues.csv"), ["i", "lambda", "mu"],
                       [i, res.eigenvalues, mu]),
             write_csv(_path(out, "eigenfunctions.csv"),
                       ["x"] + [f"u{j}" for j in i], cols)]
    inside = mesh.interval.contains(mesh.nodes)
    series = [(mesh.nodes[inside], res.vectors[:mesh.n_nodes, j][inside], f"u{j + 1}")
              for j in range(min(res.k, 4))]
    files.append(write_svg(_path(out, "eigenfunctions.svg"), series,
                           title=f"Neumann eigenfunctions, s = {cfg.s}", xlabel="x"))
    print("eigenvalues: " + " ".join(f"{v:.6g}" for v in res.eigenvalues))
    return files, {"eigenvalues": res.eigenvalues,
                   "gram_offdiag": float(np.abs(res.gram - np.eye(res.k)).max())}


def cmd_heat(cfg, out, threads):
    sec = _section(cfg, "heat")
    mesh, op = _mesh_op(cfg)
    f = parse_expr(sec.f) if sec.f is not None else None
    g = parse_expr(sec.g) if sec.g is not None else None
    run = heat.HeatRun(parse_expr(sec.u0), sec.dt, sec.T, sec.scheme, f, g, sec.sample_every)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tr = heat.evolve(op, run, q=cfg.grid.q)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    files = [write_csv(_path(out, "heat.csv"), ["t", "mass", "E", "A"],
                       [tr.times, tr.mass, tr.energy, tr.A]),
             write_svg(_path(out, "heat.svg"), [(tr.times, tr.A, "A(t)")],
                       title="distance to the mean", xlabel="t", ylabel="A", logy=True)]
    results = {"mass_drift": float(np.abs(tr.mass - tr.mass[0]).max()),
               "max_energy_increase": tr.max_increase("energy"),
               "max_A_increase": tr.max_increase("A")}
    try:
        fit = heat.fit_decay(tr)
        results.update(decay_rate=fit.rate, zero_reached=fit.zero_reached)
    except ValueError as exc:
        results["decay_rate"] = None
        print(f"decay fit skipped: {exc}", file=sys.stderr)
    print(f"heat: {tr.times.size} samples, mass drift {results['mass_drift']:.3e}")
    return files, results


def cmd_mc(cfg, out, threads):
    sec = _section(cfg, "mc")
    eps = sec.eps if sec.eps is not None else cfg.grid.h / 10
    part = ExteriorPartition((cfg.domain.a, cfg.domain.b),
                             [(float(lo), float(hi)) for lo, hi in sec.dirichlet])
    wc = stochastic.WalkConfig(cfg.s, (cfg.domain.a, cfg.domain.b), eps, part,
                               parse_expr(sec.phi), parse_expr(sec.psi), sec.max_jumps,
                               sec.walkers, cfg.seed)
    if sec.mode == "payoff":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = stochastic.run_payoff(wc, sec.probes, threads=threads)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        cols = [[r.x0 for r in res], [r.estimate for r in res], [r.stderr for r in res],
                [r.count for r in res], [r.capped for r in res], [r.mean_jumps for r in res]]
        files = [write_csv(_path(out, "payoff.csv"),
                           ["x0", "estimate", "stderr", "count", "capped", "mean_jumps"],
                           [np.array(c, dtype=float) for c in cols])]
        for r in res:
            print(f"x0 = {r.x0:.6g}: {r.estimate:.6g} +- {r.stderr:.2g}")
        return files, {"eps": eps}
    occ = stochastic.occupation_histogram(wc, sec.total_jumps, x0=sec.x0, bins=sec.bins,
                                          n_chains=sec.chains, burn_in=sec.burn_in,
                                          threads=threads)
    mid = 0.5 * (occ.edges[:-1] + occ.edges[1:])
    files = [write_csv(_path(out, "occupation.csv"),
                       ["left", "right", "density", "frequency", "stderr"],
                       [occ.edges[:-1], occ.edges[1:], occ.density, occ.frequency, occ.stderr]),
             write_svg(_path(out, "occupation.svg"), [(mid, occ.density, "density")],
                       title="occupation density", xlabel="x")]
    d = occ.sup_distance_to_uniform()
    print(f"occupation: sup distance to uniform {d:.4f}")
    return files, {"eps": eps, "sup_distance_to_uniform": d}


def cmd_limits(cfg, out, threads):
    sec = _section(cfg, "limits")
    dom = (cfg.domain.a, cfg.domain.b)
    tab = limits.s_limit_suite(parse_expr(sec.u), parse_expr(sec.v), sec.s_list, dom,
                               cfg.grid.h, cfg.grid.R, cfg.grid.q)
    files = [write_csv(_path(out, "limits.csv"), ["s", "flux", "scaled_energy"],
                       [tab.s, tab.flux, tab.scaled_energy]),
             write_svg(_path(out, "limits.svg"),
                       [(tab.s, tab.flux, "flux"), (tab.s, tab.scaled_energy, "scaled energy")],
                       title="s -> 1 limits", xlabel="s")]
    results = {"flux_limit": tab.flux_limit, "energy_limit": tab.energy_limit}
    if sec.kappa_s:
        ku = parse_expr(sec.kappa_u if sec.kappa_u is not None else sec.u)
        rows_s, rows_e, rows_r, kap = [], [], [], {}
        for s in sec.kappa_s:
            est = limits.boundary_kappa(ku, dom, s, sec.side, sec.eps)
            rows_s += [s] * est.eps.size
            rows_e += list(est.eps)
            rows_r += list(est.ratios)
            kap[str(s)] = {"kappa": est.kappa, "closed_form": limits.kappa_value(s)}
        files.append(write_csv(_path(out, "kappa.csv"), ["s", "eps", "ratio"],
                               [np.array(rows_s), np.array(rows_e), np.array(rows_r)]))
        results["kappa"] = kap
    print(f"limits: flux -> {tab.flux_limit:.6g}, scaled energy -> {tab.energy_limit:.6g}")
    return files, results


def cmd_perimeter(cfg, out, threads):
    sec = cfg.perimeter
    s_list = sec.s_list if sec is not None and sec.s_list else [cfg.s]
    dom = (cfg.domain.a, cfg.domain.b)
    closed = np.array([traces.fractional_perimeter(dom, s) for s in s_list])
    quad = np.array([traces.fractional_perimeter_quadrature(dom, s) for s in s_list])
    L = np.full(len(s_list), cfg.domain.b - cfg.domain.a)
    files = [write_csv(_path(out, "perimeter.csv"),
                       ["s", "L", "closed_form", "quadrature", "rel_diff"],
                       [np.array(s_list), L, closed, quad, np.abs(quad / closed - 1)])]
    print("perimeter: " + " ".join(f"s={s}: {v:.12g}" for s, v in zip(s_list, closed)))
    return files, {"closed_form": closed, "quadrature": quad}


HANDLERS = {"solve": cmd_solve, "eig": cmd_eig, "heat": cmd_heat, "mc": cmd_mc,
            "limits": cmd_limits, "perimeter": cmd_perimeter}

NUMERIC_ERRORS = (elliptic.CompatibilityError, elliptic.SolverError, AssemblyError,
                  FloatingPointError, ExprEvalError, np.linalg.LinAlgError, ArithmeticError)


def run(command, cfg, out, threads=1):
    """Run one subcommand on a validated config; returns (files, results, timings)."""
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    files, results = HANDLERS[command](cfg, out, threads)
    t1 = time.perf_counter()
    timings = {"command": t1 - t0}
    files.append(write_manifest(out, emit(cfg), cfg.seed, files,
                                timings, dict(results, command=command)))
    return files, results, timings


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        run(args.command, cfg, args.out, args.threads)
    except elliptic.CompatibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"residual: {exc.residual:.17g}", file=sys.stderr)
        return EXIT_NUMERIC
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:    # never surface a traceback to the caller
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

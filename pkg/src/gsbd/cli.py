"""Experiment harness and command-line entry point.

Each subcommand writes plot-ready CSVs: dual-residual convergence traces,
sum-rate versus active-RAP-count tradeoff sweeps (optionally overlaid with
a certified exhaustive baseline and a fixed-deployment baseline), per-RAP
power trajectories, and a timing benchmark of per-iteration cost against
network size. Floats are emitted with 12 significant digits and every file
starts with a versioned schema comment so downstream tooling can check
what it is parsing.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import oracle
from .model import SystemConfig, realization
from .solver import SolverParams, solve

__all__ = [
    "ExperimentConfig", "TradeoffPoint", "load_config", "config_from_dict",
    "eta_for_target_active", "tradeoff_sweep", "bench_scaling",
    "cmd_converge", "cmd_tradeoff", "cmd_powers", "cmd_bench", "main",
]

SCHEMA_VERSION = "gsbd-csv-v1"

_EXP_DEFAULTS = dict(
    eta_grid=(0.0, 0.1, 0.5),
    steps=(0.1, 0.5),
    n_layouts=10,
    n_fading=5,
    oracle=False,
    dump_s=False,
    bench_l_grid=(8, 16, 32, 64),
    bench_max_iter=25,
    bench_reps=3,
    workers=1,
    out_dir=".",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Scenario + solver knobs + sweep shape for one harness invocation."""

    system: SystemConfig
    solver: SolverParams
    eta_grid: tuple = _EXP_DEFAULTS["eta_grid"]
    steps: tuple = _EXP_DEFAULTS["steps"]
    n_layouts: int = 10
    n_fading: int = 5
    oracle: bool = False
    dump_s: bool = False
    bench_l_grid: tuple = _EXP_DEFAULTS["bench_l_grid"]
    bench_max_iter: int = 25
    bench_reps: int = 3
    workers: int = 1
    out_dir: str = "."

    def __post_init__(self):
        if len(self.eta_grid) == 0:
            raise ValueError("eta_grid must be nonempty")
        if any(e < 0 for e in self.eta_grid):
            raise ValueError("eta_grid values must be nonnegative")
        if self.n_layouts < 1 or self.n_fading < 1:
            raise ValueError("n_layouts and n_fading must be >= 1")
        if any(s <= 0 for s in self.steps):
            raise ValueError("steps must be positive")
        if self.bench_reps < 1 or self.bench_max_iter < 1:
            raise ValueError("bench_reps and bench_max_iter must be >= 1")


@dataclass(frozen=True)
class TradeoffPoint:
    """Sweep aggregate at one penalty value; non-converged runs are counted
    in n_nonconverged and excluded from the means."""

    eta: float
    mean_active: float
    mean_rate: float
    std_rate: float
    n_samples: int
    n_nonconverged: int


def config_from_dict(raw):
    """Build a validated config from flat JSON-style keys."""
    sys_keys = {f.name for f in fields(SystemConfig)}
    sol_keys = {f.name for f in fields(SolverParams)}
    exp_keys = set(_EXP_DEFAULTS)
    unknown = sorted(set(raw) - sys_keys - sol_keys - exp_keys)
    if unknown:
        valid = ", ".join(sorted(sys_keys | sol_keys | exp_keys))
        raise ValueError(f"unknown config keys {unknown}; valid keys: {valid}")
    system = SystemConfig(**{k: raw[k] for k in raw if k in sys_keys})
    solver = SolverParams(**{k: raw[k] for k in raw if k in sol_keys})
    exp = dict(_EXP_DEFAULTS)
    exp.update({k: raw[k] for k in raw if k in exp_keys})
    for k in ("eta_grid", "steps", "bench_l_grid"):
        exp[k] = tuple(exp[k])
    return ExperimentConfig(system=system, solver=solver, **exp)


def load_config(path=None, **overrides):
    """Read a flat JSON config file; keyword overrides win over the file.

    An empty or absent file yields all defaults. Overrides with value None
    are ignored so CLI flags can be passed through untouched.
    """
    raw = {}
    if path is not None:
        with open(path) as fh:
            text = fh.read()
        if text.strip():
            raw = json.loads(text)
            if not isinstance(raw, dict):
                raise ValueError(f"{path}: top level must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def _write_csv(path, name, header, rows, comments=()):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {SCHEMA_VERSION} {name}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _run_jobs(fn, jobs, workers):
    # map preserves submission order, so worker count never changes output
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_converge(cfg: ExperimentConfig):
    """Per-iteration residual/rate/multiplier traces, one file per
    (penalty, step size) pair, all on the first realization."""
    chan = realization(cfg.system, 0, 0)
    L = cfg.system.L
    header = (["iter", "residual", "active_count", "sum_rate"]
              + [f"lambda_{l + 1}" for l in range(L)]
              + [f"omega_{l + 1}" for l in range(L)])
    paths = []
    for eta in cfg.eta_grid:
        for step in cfg.steps:
            params = replace(cfg.solver, eta=eta, step0=step)
            rows = []

            def record(t, lam, omega, rate, resid, n_active):
                rows.append([t, resid, n_active, rate, *lam, *omega])

            solve(chan, params, trace=record)
            path = os.path.join(cfg.out_dir,
                                f"converge_eta{eta:g}_step{step:g}.csv")
            paths.append(_write_csv(path, "converge", header, rows))
    return paths


def _solve_grid(cfg, eta):
    """Solve every (layout, fading) pair at one penalty value."""
    params = replace(cfg.solver, eta=eta)
    jobs = [(i, j) for i in range(cfg.n_layouts) for j in range(cfg.n_fading)]

    def run(ij):
        i, j = ij
        chan = realization(cfg.system, i, j)
        sol, _ = solve(chan, params)
        return i, j, sol

    return _run_jobs(run, jobs, cfg.workers)


def tradeoff_sweep(cfg: ExperimentConfig):
    """TradeoffPoint per penalty plus the raw per-sample records."""
    points = []
    samples = []
    for eta in cfg.eta_grid:
        results = _solve_grid(cfg, eta)
        rates = np.array([s.sum_rate for _, _, s in results if s.converged])
        actives = np.array([len(s.active_set) for _, _, s in results
                            if s.converged])
        n_bad = sum(1 for _, _, s in results if not s.converged)
        points.append(TradeoffPoint(
            eta=eta,
            mean_active=float(actives.mean()) if actives.size else float("nan"),
            mean_rate=float(rates.mean()) if rates.size else float("nan"),
            std_rate=float(rates.std()) if rates.size else float("nan"),
            n_samples=len(results),
            n_nonconverged=n_bad))
        samples.extend((eta, i, j, s) for i, j, s in results)
    return points, samples


def _frontiers(cfg: ExperimentConfig):
    """Certified best rate per cardinality, and the rate of deploying only
    the first a RAPs, both averaged over all realizations."""
    sysc = cfg.system
    jobs = [(i, j) for i in range(cfg.n_layouts) for j in range(cfg.n_fading)]

    def run(ij):
        i, j = ij
        chan = realization(sysc, i, j)
        best = oracle.exhaustive_search(chan.H, sysc.n_c,
                                        budgets=sysc.budgets,
                                        sigma2=sysc.sigma2)
        fixed = {a: oracle.solve_fixed_subset(
                     chan.H, tuple(range(a)), sysc.n_c,
                     budgets=sysc.budgets[:a], sigma2=sysc.sigma2).rate
                 for a in best}
        return best, fixed

    per_real = _run_jobs(run, jobs, cfg.workers)
    sizes = sorted(per_real[0][0])
    frontier = [(a, float(np.mean([b[a].rate for b, _ in per_real])),
                 len(per_real)) for a in sizes]
    fixed = [(a, float(np.mean([f[a] for _, f in per_real])),
              len(per_real)) for a in sizes]
    return frontier, fixed


def cmd_tradeoff(cfg: ExperimentConfig):
    """Averaged rate/active-count sweep; oracle overlays when enabled."""
    points, samples = tradeoff_sweep(cfg)
    paths = [_write_csv(
        os.path.join(cfg.out_dir, "tradeoff.csv"), "tradeoff",
        ["eta", "mean_active", "mean_rate", "std_rate", "n_samples",
         "n_nonconverged"],
        [(p.eta, p.mean_active, p.mean_rate, p.std_rate, p.n_samples,
          p.n_nonconverged) for p in points])]
    paths.append(_write_csv(
        os.path.join(cfg.out_dir, "tradeoff_samples.csv"), "tradeoff-samples",
        ["eta", "layout", "fading", "converged", "active_count", "sum_rate"],
        [(eta, i, j, s.converged, len(s.active_set), s.sum_rate)
         for eta, i, j, s in samples]))
    if cfg.dump_s:
        for eta, i, j, s in samples:
            dump = os.path.join(cfg.out_dir, f"sdump_eta{eta:g}_l{i}_f{j}.npz")
            np.savez(dump, **{f"S_{k}": Sk for k, Sk in enumerate(s.S)})
            paths.append(dump)
    if cfg.oracle:
        frontier, fixed = _frontiers(cfg)
        cols = ["active_count", "mean_rate", "n_samples"]
        paths.append(_write_csv(
            os.path.join(cfg.out_dir, "oracle_frontier.csv"),
            "oracle-frontier", cols, frontier))
        paths.append(_write_csv(
            os.path.join(cfg.out_dir, "fixed_frontier.csv"),
            "fixed-frontier", cols, fixed))
    return paths


def cmd_powers(cfg: ExperimentConfig):
    """Per-RAP power trajectory of the first realization, one file per
    penalty value; inactive RAPs show their powers decaying toward zero."""
    chan = realization(cfg.system, 0, 0)
    L = cfg.system.L
    header = ["iter"] + [f"omega_{l + 1}" for l in range(L)]
    paths = []
    for eta in cfg.eta_grid:
        params = replace(cfg.solver, eta=eta)
        rows = []

        def record(t, lam, omega, rate, resid, n_active):
            rows.append([t, *omega])

        solve(chan, params, trace=record)
        path = os.path.join(cfg.out_dir, f"powers_eta{eta:g}.csv")
        paths.append(_write_csv(path, "powers", header, rows))
    return paths


def bench_scaling(cfg: ExperimentConfig):
    """Median per-iteration wall time for each network size in the grid,
    with the fitted log-log slope of cost against size."""
    rows = []
    for L in cfg.bench_l_grid:
        sys_l = replace(cfg.system, L=L)
        params = replace(cfg.solver, max_iter=cfg.bench_max_iter)
        per_iter = []
        iters = []
        for rep in range(cfg.bench_reps):
            chan = realization(sys_l, rep, 0)
            t0 = time.perf_counter()
            _, state = solve(chan, params)
            per_iter.append((time.perf_counter() - t0) / state.iter)
            iters.append(state.iter)
        rows.append((L, float(np.median(per_iter)), float(np.mean(iters)),
                     cfg.bench_reps))
    ls = np.log([r[0] for r in rows])
    ts = np.log([r[1] for r in rows])
    slope = float(np.polyfit(ls, ts, 1)[0]) if len(rows) > 1 else float("nan")
    return rows, slope


def cmd_bench(cfg: ExperimentConfig):
    rows, slope = bench_scaling(cfg)
    path = _write_csv(
        os.path.join(cfg.out_dir, "bench.csv"), "bench",
        ["L", "sec_per_iter", "t_avg", "n_samples"], rows,
        comments=[f"loglog_slope {slope:.12g}"])
    return [path]


def eta_for_target_active(channels, target, params=SolverParams(),
                          eta_grid=(0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4),
                          n_bisect=12):
    """Search for a penalty that converges to exactly `target` active RAPs.

    Walks a doubling grid until the active set undershoots the target, then
    bisects. Returns (eta, solution) on a hit, (None, None) otherwise.
    """
    lo = 0.0
    hi = None
    for eta in eta_grid:
        sol, _ = solve(channels, replace(params, eta=eta))
        if sol.converged:
            n = len(sol.active_set)
            if n == target:
                return eta, sol
            if n < target:
                hi = eta
                break
        lo = eta
    if hi is None:
        return None, None
    for _ in range(n_bisect):
        mid = (lo + hi) / 2
        sol, _ = solve(channels, replace(params, eta=mid))
        if sol.converged and len(sol.active_set) == target:
            return mid, sol
        if sol.converged and len(sol.active_set) > target:
            lo = mid
        else:
            hi = mid
    return None, None


_COMMANDS = {
    "converge": cmd_converge,
    "tradeoff": cmd_tradeoff,
    "powers": cmd_powers,
    "bench": cmd_bench,
}


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="gsbd",
        description="Joint RAP selection and block-diagonalization "
                    "precoding experiments")
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("--config", metavar="PATH", help="flat JSON config file")
    ap.add_argument("--seed", type=int, metavar="U64")
    ap.add_argument("--out", metavar="DIR", help="output directory")
    ap.add_argument("--eta", metavar="LIST",
                    help="comma-separated penalty grid, e.g. 0,0.1,0.5")
    ap.add_argument("--step", type=float, metavar="REAL",
                    help="subgradient step size (replaces the step grid)")
    ap.add_argument("--oracle", choices=["on", "off"],
                    help="exhaustive baseline overlay for tradeoff")
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = dict(seed=args.seed, out_dir=args.out)
    if args.eta is not None:
        overrides["eta_grid"] = [float(x) for x in args.eta.split(",")]
    if args.step is not None:
        overrides["step0"] = args.step
        overrides["steps"] = [args.step]
    if args.oracle is not None:
        overrides["oracle"] = args.oracle == "on"
    try:
        cfg = load_config(args.config, **overrides)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        paths = _COMMANDS[args.command](cfg)
    except OSError as e:
        print(f"error: cannot write {e.filename}: {e.strerror}",
              file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

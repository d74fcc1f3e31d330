"""Benchmark tables: accuracy sweeps and multiplier/extremal-value tables.

``run_bench`` drives one of the four standard studies and writes one CSV
per table.  A failing cell is recorded with status=error and the sweep
continues.  Wall-clock columns are informative only; accuracy and
iteration counts are the comparable quantities.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import diagnostics
from .splitting_solvers import ALGORITHMS, SolverConfig, solve

__all__ = ["run_bench"]


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _cell(problem, algorithm, record_every=None, max_iter=None):
    n = problem.grid.n_nodes
    cfg = SolverConfig(
        algorithm=algorithm,
        record_every=record_every or max(1, 5 * n),
        max_iter=max_iter or 200_000,
    )
    return solve(problem, cfg)


def _bench_test1(out_dir: Path, algos, sizes):
    sizes = sizes or [20, 40, 60]
    algos = algos or list(ALGORITHMS)
    algos = [a for a in algos if a.upper() != "ADMM"]  # needs conjugate data on the flux block
    rows = []
    errors = {a: [] for a in algos}
    for algo in algos:
        for n in sizes:
            problem = diagnostics.make_test_problem(diagnostics.ExperimentSpec(1, n))
            m_exact, _, lam_exact = diagnostics.exact_test1(problem.grid)
            try:
                rep = _cell(problem, algo)
                err = diagnostics.l2_error(rep.m, m_exact)
                errors[algo].append((problem.grid.h, err))
                rows.append([algo, n, "ok", rep.converged, rep.iterations,
                             f"{rep.wall_time:.2f}", repr(err), repr(rep.lam), repr(lam_exact)])
            except Exception as exc:  # keep sweeping on a failed cell
                rows.append([algo, n, f"error: {exc}", "", "", "", "", "", ""])
    _write_csv(out_dir / "test1_cells.csv",
               ["algorithm", "n", "status", "converged", "iterations", "time_s",
                "l2_error_m", "lambda", "lambda_exact"], rows)
    rate_rows = []
    for algo, pts in errors.items():
        if len(pts) >= 2:
            rate_rows.append([algo, repr(diagnostics.fit_rate(pts))])
    _write_csv(out_dir / "test1_rates.csv", ["algorithm", "rate"], rate_rows)


def _bench_test2(out_dir: Path, algos, sizes, nus):
    algos = algos or ["ADMM", "CP-U"]
    sizes = sizes or [20, 40, 60]
    nus = nus if nus is not None else [1.0, 0.1, 1e-2, 1e-3, 0.0]
    rows = []
    for n in sizes:
        for algo in algos:
            problem = diagnostics.make_test_problem(diagnostics.ExperimentSpec(2, n, nu=0.0))
            try:
                rep = _cell(problem, algo, record_every=10)
                err = diagnostics.l2_error(rep.m, problem.coupling.m_bar)
                rows.append([n, algo, "ok", rep.converged, rep.iterations,
                             f"{rep.wall_time:.2f}", repr(err)])
            except Exception as exc:
                rows.append([n, algo, f"error: {exc}", "", "", "", ""])
    _write_csv(out_dir / "test2_sizes.csv",
               ["n", "algorithm", "status", "converged", "iterations", "time_s", "l2_error_m"],
               rows)
    rows = []
    n_visc = 60
    for nu in nus:
        for algo in algos:
            problem = diagnostics.make_test_problem(diagnostics.ExperimentSpec(2, n_visc, nu=nu))
            try:
                rep = _cell(problem, algo, record_every=10)
                rows.append([repr(nu), algo, "ok", rep.converged, rep.iterations,
                             f"{rep.wall_time:.2f}", repr(rep.lam)])
            except Exception as exc:
                rows.append([repr(nu), algo, f"error: {exc}", "", "", "", ""])
    _write_csv(out_dir / "test2_viscosities.csv",
               ["nu", "algorithm", "status", "converged", "iterations", "time_s", "lambda"],
               rows)


def _bench_test3(out_dir: Path, algos, sizes, nus):
    algo = (algos or ["CP-U"])[0]
    n = (sizes or [50])[0]
    nus = nus if nus is not None else [1.0, 0.1, 1e-2, 1e-3]
    rows = []
    for nu in nus:
        row = [repr(nu)]
        for constrained in (False, True):
            problem = diagnostics.make_test_problem(
                diagnostics.ExperimentSpec(3, n, nu=nu, constrained=constrained)
            )
            try:
                rep = _cell(problem, algo, record_every=10)
                active = (
                    int(np.sum(rep.m >= problem.dbound - 1e-6)) if constrained else 0
                )
                row += [rep.converged, rep.iterations, f"{rep.wall_time:.2f}",
                        repr(rep.lam), active]
            except Exception as exc:
                row += [f"error: {exc}", "", "", "", ""]
        rows.append(row)
    _write_csv(out_dir / "test3_lambda.csv",
               ["nu",
                "unconstrained_converged", "unconstrained_iterations", "unconstrained_time_s",
                "unconstrained_lambda", "unconstrained_active",
                "constrained_converged", "constrained_iterations", "constrained_time_s",
                "constrained_lambda", "constrained_active"],
               rows)


def _bench_test4(out_dir: Path, algos, sizes, qs):
    algo = (algos or ["CP-U"])[0]
    n = (sizes or [50])[0]
    qs = qs if qs is not None else [1.2, 2.0, 3.0, 10.0]
    rows = []
    for q in qs:
        problem = diagnostics.make_test_problem(diagnostics.ExperimentSpec(4, n, nu=1.0, q=q))
        try:
            rep = _cell(problem, algo, record_every=10)
            rows.append([repr(q), "ok", rep.converged, rep.iterations,
                         f"{rep.wall_time:.2f}", repr(float(np.min(rep.m))),
                         repr(float(np.max(rep.m))), repr(rep.lam)])
        except Exception as exc:
            rows.append([repr(q), f"error: {exc}", "", "", "", "", "", ""])
    _write_csv(out_dir / "test4_extremes.csv",
               ["q", "status", "converged", "iterations", "time_s", "min_m", "max_m", "lambda"],
               rows)


def run_bench(test_id: int, out_dir, algos=None, sizes=None, nus=None, qs=None) -> None:
    out_dir = Path(out_dir)
    if algos:
        algos = [a.upper() for a in algos]
        for a in algos:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm '{a}'")
    if test_id == 1:
        _bench_test1(out_dir, algos, sizes)
    elif test_id == 2:
        _bench_test2(out_dir, algos, sizes, nus)
    elif test_id == 3:
        _bench_test3(out_dir, algos, sizes, nus)
    elif test_id == 4:
        _bench_test4(out_dir, algos, sizes, qs)
    else:
        raise ValueError(f"unknown test id {test_id}")

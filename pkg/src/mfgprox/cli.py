"""Command-line front end: solve, bench, check, norms.

Configs are flat INI files with [problem], [solver], and [output]
sections; unknown keys are rejected so typos fail loudly.  Runs write
``history.csv``, ``summary.txt``, and optional GF1 field dumps into the
output directory.  The environment variable MFGPROX_THREADS caps BLAS
parallelism (0 or 1 gives the single-threaded deterministic mode); it is
applied before numpy is loaded, which is why the heavy imports live
inside the handlers.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAXITER = 2


def _apply_thread_cap() -> None:
    cap = os.environ.get("MFGPROX_THREADS")
    if cap is None:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        n = 1
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


class ConfigError(Exception):
    pass


_PROBLEM_KEYS = {
    "test", "n", "nu", "q", "coupling", "constrained",
    "d_bar", "radius", "sigma", "r",
}
_SOLVER_KEYS = {
    "algorithm", "gamma", "tau", "theta", "tol", "max_iter", "record_every",
    "seed", "safety", "allow_unsafe_steps", "linear_method", "cg_tol", "cg_maxit",
}
_OUTPUT_KEYS = {"dir", "dump_fields", "history_every"}


def _parse_config(path: str):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file '{path}' is missing or unreadable")
    known = {"problem": _PROBLEM_KEYS, "solver": _SOLVER_KEYS, "output": _OUTPUT_KEYS}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section '[{section}]'")
        for key in parser[section]:
            if key not in known[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    if "problem" not in parser:
        raise ConfigError("missing required section [problem]")
    if "solver" not in parser or "algorithm" not in parser["solver"]:
        raise ConfigError("missing required key 'algorithm' in section [solver]")
    return parser


def _build_problem(sec):
    from . import diagnostics
    from .couplings import make_coupling
    from .grid_ops import TorusGrid
    from .problem import ProblemSpec

    n = sec.getint("n", fallback=20)
    if "test" in sec:
        exp = diagnostics.ExperimentSpec(
            test_id=sec.getint("test"),
            n_nodes=n,
            nu=sec.getfloat("nu", fallback=_test_default_nu(sec.getint("test"))),
            q=sec.getfloat("q", fallback=2.0),
            constrained=sec.getboolean("constrained", fallback=False),
            d_bar=sec.getfloat("d_bar", fallback=1.3),
            radius=sec.getfloat("radius", fallback=0.25),
            sigma=sec.getfloat("sigma", fallback=0.1),
            r=sec.getfloat("r", fallback=1.0),
        )
        return diagnostics.make_test_problem(exp)
    if "coupling" not in sec:
        raise ConfigError("section [problem] needs either 'test' or 'coupling'")
    grid = TorusGrid(n)
    coupling = make_coupling(
        sec.get("coupling"), grid, sigma=sec.getfloat("sigma", fallback=0.1),
        r=sec.getfloat("r", fallback=1.0),
    )
    dbound = None
    if sec.getboolean("constrained", fallback=False):
        dbound = diagnostics.bound_field(
            grid, sec.getfloat("d_bar", fallback=1.3), sec.getfloat("radius", fallback=0.25)
        )
    problem = ProblemSpec(
        grid, sec.getfloat("nu", fallback=0.0), sec.getfloat("q", fallback=2.0),
        coupling, dbound,
    )
    problem.meta = {
        "coupling": coupling.name,
        "n": n,
        "nu": problem.nu,
        "q": problem.q,
        "constrained": dbound is not None,
        "d_bar": sec.getfloat("d_bar", fallback=1.3),
        "radius": sec.getfloat("radius", fallback=0.25),
        "sigma": sec.getfloat("sigma", fallback=0.1),
        "r": sec.getfloat("r", fallback=1.0),
    }
    return problem


def _test_default_nu(test_id: int) -> float:
    return {1: 0.0, 2: 0.0, 3: 1.0, 4: 1.0}.get(test_id, 0.0)


def _build_config(sec):
    from .splitting_solvers import SolverConfig

    kwargs = dict(algorithm=sec.get("algorithm"))
    for key, conv in (
        ("gamma", sec.getfloat), ("tau", sec.getfloat), ("theta", sec.getfloat),
        ("tol", sec.getfloat), ("max_iter", sec.getint), ("record_every", sec.getint),
        ("seed", sec.getint), ("safety", sec.getfloat),
        ("allow_unsafe_steps", sec.getboolean), ("cg_tol", sec.getfloat),
        ("cg_maxit", sec.getint),
    ):
        if key in sec:
            kwargs[key] = conv(key)
    if "linear_method" in sec:
        kwargs["linear_method"] = sec.get("linear_method")
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _summary_entries(problem, cfg, report):
    import numpy as np

    from . import diagnostics

    entries = dict(problem.meta)
    entries.update(
        algorithm=report.algorithm,
        converged=report.converged,
        iterations=report.iterations,
        primal_change=report.primal_change,
        tol=report.tol,
        gamma=report.gamma,
        tau=report.tau,
        theta=report.theta,
        norm_xi=report.norm_xi,
        wall_time=report.wall_time,
        lambda_=report.lam,
        min_m=float(np.min(report.m)),
        max_m=float(np.max(report.m)),
    )
    res = diagnostics.kkt_residuals(report.m, report.w, report.u, report.lam, problem)
    entries.update(
        res_hjb=res.res_hjb, res_fp=res.res_fp, res_mass=res.res_mass, res_compl=res.res_compl
    )
    if problem.coupling.has_conj:
        entries["gap"] = diagnostics.duality_gap(report.m, report.w, report.u, report.lam, problem)
    if problem.meta.get("test") == 1:
        m_exact, _, lam_exact = diagnostics.exact_test1(problem.grid)
        entries["l2_error_m"] = diagnostics.l2_error(report.m, m_exact)
        entries["lambda_exact"] = lam_exact
    elif problem.meta.get("test") == 2 and problem.nu == 0.0:
        entries["l2_error_m"] = diagnostics.l2_error(report.m, problem.coupling.m_bar)
    if report.warnings:
        entries["warnings"] = ";".join(report.warnings)
    return entries


def cmd_solve(args) -> int:
    _apply_thread_cap()
    try:
        parser = _parse_config(args.config)
        problem = _build_problem(parser["problem"])
        cfg = _build_config(parser["solver"])
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_sec = parser["output"] if "output" in parser else {}
    out_dir = Path(args.out or out_sec.get("dir", "out"))
    dump_fields = (
        out_sec.getboolean("dump_fields", fallback=True)
        if hasattr(out_sec, "getboolean")
        else True
    )

    if args.dry_run:
        from .saddle_linear import estimate_norm

        split = cfg.algorithm.endswith("-SP")
        norm_xi = estimate_norm("G", problem.grid, problem.nu, seed=cfg.seed) if split else 1.0
        print("resolved configuration:")
        for key, val in problem.meta.items():
            print(f"  problem.{key}={val}")
        print(f"  solver.algorithm={cfg.algorithm}")
        print(f"  solver.norm_xi={norm_xi!r}")
        print(f"  solver.gamma={cfg.gamma if cfg.gamma is not None else cfg.safety / max(norm_xi, 1e-300)!r}")
        print(f"  solver.tau={cfg.tau if cfg.tau is not None else cfg.safety / max(norm_xi, 1e-300)!r}")
        print(f"  solver.tol={cfg.tol if cfg.tol is not None else problem.grid.h ** 3 / 5.0!r}")
        print(f"  output.dir={out_dir}")
        return EXIT_OK

    from . import diagnostics
    from .grid_ops import save_gf1
    from .splitting_solvers import solve

    try:
        report = solve(problem, cfg)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "history.csv").write_text(report.history_csv())
    entries = _summary_entries(problem, cfg, report)
    (out_dir / "summary.txt").write_text(diagnostics.summary_lines(entries))
    if dump_fields:
        save_gf1(out_dir / "m.gf1", report.m)
        save_gf1(out_dir / "w.gf1", report.w)
        save_gf1(out_dir / "u.gf1", report.u)
    status = "converged" if report.converged else "max_iter reached"
    print(
        f"{report.algorithm}: {status} after {report.iterations} iterations "
        f"(primal change {report.primal_change:.3e}, lambda {report.lam:.6f})"
    )
    return EXIT_OK if report.converged else EXIT_MAXITER


def cmd_check(args) -> int:
    _apply_thread_cap()
    out_dir = Path(args.dir)
    missing = [n for n in ("summary.txt", "m.gf1", "w.gf1", "u.gf1") if not (out_dir / n).exists()]
    if missing:
        print(f"missing artifacts in {out_dir}: {', '.join(missing)}", file=sys.stderr)
        return EXIT_CONFIG

    from . import diagnostics
    from .grid_ops import load_gf1

    entries = {}
    for line in (out_dir / "summary.txt").read_text().splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            entries[key] = val
    try:
        problem = _problem_from_summary(entries)
    except (KeyError, ValueError) as exc:
        print(f"cannot rebuild problem from summary: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    m = load_gf1(out_dir / "m.gf1")
    w = load_gf1(out_dir / "w.gf1")
    u = load_gf1(out_dir / "u.gf1")
    lam = float(entries["lambda_"])
    tol = float(entries["tol"])

    res = diagnostics.kkt_residuals(m, w, u, lam, problem)
    threshold = 100.0 * tol
    ok = True
    for name, val in (
        ("res_hjb", res.res_hjb),
        ("res_fp", res.res_fp),
        ("res_mass", res.res_mass),
        ("res_compl", res.res_compl),
    ):
        passed = val <= threshold
        ok &= passed
        print(f"{name}={val:.3e} threshold={threshold:.3e} {'PASS' if passed else 'FAIL'}")
    if problem.coupling.has_conj:
        gap = diagnostics.duality_gap(m, w, u, lam, problem)
        import numpy as np

        primal = gap - diagnostics.dual_objective(
            u, lam / problem.grid.h**2, diagnostics.multiplier_slacks(m, w, u, lam, problem)[1],
            problem,
        )
        gap_thresh = 100.0 * tol * (1.0 + abs(primal))
        passed = np.isfinite(gap) and abs(gap) <= gap_thresh
        ok &= bool(passed)
        print(f"gap={gap:.3e} threshold={gap_thresh:.3e} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CONFIG


def _problem_from_summary(entries):
    from . import diagnostics

    if "test" in entries:
        exp = diagnostics.ExperimentSpec(
            test_id=int(entries["test"]),
            n_nodes=int(entries["n"]),
            nu=float(entries["nu"]),
            q=float(entries["q"]),
            constrained=entries.get("constrained", "False") == "True",
            d_bar=float(entries.get("d_bar", 1.3)),
            radius=float(entries.get("radius", 0.25)),
            sigma=float(entries.get("sigma", 0.1)),
            r=float(entries.get("r", 1.0)),
        )
        return diagnostics.make_test_problem(exp)
    from .couplings import make_coupling
    from .grid_ops import TorusGrid
    from .problem import ProblemSpec

    grid = TorusGrid(int(entries["n"]))
    coupling = make_coupling(
        entries["coupling"], grid,
        sigma=float(entries.get("sigma", 0.1)), r=float(entries.get("r", 1.0)),
    )
    dbound = None
    if entries.get("constrained", "False") == "True":
        dbound = diagnostics.bound_field(
            grid, float(entries.get("d_bar", 1.3)), float(entries.get("radius", 0.25))
        )
    return ProblemSpec(grid, float(entries["nu"]), float(entries["q"]), coupling, dbound)


def cmd_norms(args) -> int:
    _apply_thread_cap()
    from .grid_ops import TorusGrid
    from .saddle_linear import estimate_norm

    grid = TorusGrid(args.nh)
    norm_g = estimate_norm("G", grid, args.nu)
    norm_b = estimate_norm("B", grid)
    norm_a = estimate_norm("A", grid, args.nu)
    print(f"n={args.nh} nu={args.nu!r}" + (f" q={args.q!r}" if args.q is not None else ""))
    print(f"norm_G={norm_g!r}")
    print(f"norm_B={norm_b!r}")
    print(f"norm_A={norm_a!r}")
    print(f"cp_split_steps gamma=tau={0.95 / norm_g!r}")
    print(f"pcpm_split_step gamma={0.475 * min(1.0, 1.0 / norm_g)!r}")
    print(f"ms_split_step gamma={0.95 / norm_g!r}")
    return EXIT_OK


def cmd_bench(args) -> int:
    _apply_thread_cap()
    from .bench import run_bench

    out_dir = Path(args.out or f"bench_test{args.test}")
    algos = args.algos.split(",") if args.algos else None
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None
    nus = [float(s) for s in args.nus.split(",")] if args.nus else None
    qs = [float(s) for s in args.qs.split(",")] if args.qs else None
    try:
        run_bench(args.test, out_dir, algos=algos, sizes=sizes, nus=nus, qs=qs)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfgprox", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solve from a config file")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", default=None)
    p_solve.add_argument("--dry-run", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="run a benchmark table")
    p_bench.add_argument("--test", type=int, required=True, choices=(1, 2, 3, 4))
    p_bench.add_argument("--algos", default=None, help="comma-separated algorithm list")
    p_bench.add_argument("--sizes", default=None, help="comma-separated grid sizes")
    p_bench.add_argument("--nus", default=None, help="comma-separated viscosities")
    p_bench.add_argument("--qs", default=None, help="comma-separated exponents")
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_check = sub.add_parser("check", help="re-audit a solve output directory")
    p_check.add_argument("--dir", required=True)
    p_check.set_defaults(func=cmd_check)

    p_norms = sub.add_parser("norms", help="print operator norms and safe steps")
    p_norms.add_argument("--nh", type=int, required=True)
    p_norms.add_argument("--nu", type=float, required=True)
    p_norms.add_argument("--q", type=float, default=None)
    p_norms.set_defaults(func=cmd_norms)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

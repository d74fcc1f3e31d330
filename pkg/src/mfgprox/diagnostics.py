"""Optimality diagnostics, benchmark problem builders, and error metrics.

The residuals check the discrete optimality system at a candidate
(m, w, u, lambda): the value-function row

    -nu*lap(u) + |hat_dh(u)|^q' / q' - lambda  vs  f(x, m)

(with slack multipliers where the density hits 0 or its cap), the
continuity row -nu*lap(m) - transport(u, m), the unit-mass constraint,
and complementarity.  All components are reported relative to the scale
1 + |lambda| + max|u|.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.integrate

from .couplings import CubicCoupling, LogCoupling, QuadraticCoupling, make_coupling
from .energies import primal_objective
from .grid_ops import TorusGrid, apply_A, hat_dh, total_mass, transport
from .problem import ProblemSpec

__all__ = [
    "KktResiduals",
    "kkt_residuals",
    "multiplier_slacks",
    "dual_objective",
    "duality_gap",
    "exact_test1",
    "ExperimentSpec",
    "make_test_problem",
    "l2_error",
    "fit_rate",
    "summary_lines",
]


@dataclass
class KktResiduals:
    """Scaled residuals of the discrete optimality system (all >= 0)."""

    res_hjb: float
    res_fp: float
    res_mass: float
    res_compl: float

    def max(self) -> float:
        return max(self.res_hjb, self.res_fp, self.res_mass, self.res_compl)


def _value_row_gap(m, w, u, lam, problem: ProblemSpec):
    """r = -nu*lap(u) + |hat u|^q'/q' - lambda - f(x, m), f clipped at 0+."""
    qp = problem.q_conj
    hat = hat_dh(u)
    ham = np.sum(hat * hat, axis=-1) ** (qp / 2.0) / qp
    f_val = np.asarray(problem.coupling.f(np.maximum(m, 1e-300)), dtype=float)
    return apply_A(u, problem.nu) + ham - lam - f_val


def fit_level(m, u, problem: ProblemSpec) -> float:
    """Least-squares level of the value row given (m, u): the constant
    lambda minimizing the row residual over nodes with no active bound."""
    qp = problem.q_conj
    hat = hat_dh(u)
    ham = np.sum(hat * hat, axis=-1) ** (qp / 2.0) / qp
    row = apply_A(u, problem.nu) + ham - np.asarray(
        problem.coupling.f(np.maximum(m, 1e-300)), dtype=float
    )
    free = m > 1e-8 * float(np.max(m))
    if problem.dbound is not None:
        free &= m < problem.dbound - 1e-8 * float(np.max(problem.dbound))
    if not free.any():
        return float(np.mean(row))
    return float(np.mean(row[free]))


def multiplier_slacks(m, w, u, lam, problem: ProblemSpec, eps_act: Optional[float] = None):
    """Reconstruct the nonnegative slack multipliers (mu at m ~ 0, p at m ~ d)."""
    if eps_act is None:
        eps_act = 1e-8 * float(np.max(m))
    r = _value_row_gap(m, w, u, lam, problem)
    lower = m <= eps_act
    mu = np.where(lower, np.maximum(-r, 0.0), 0.0)
    if problem.dbound is not None:
        d = problem.dbound
        upper = m >= d - 1e-8 * float(np.max(d))
        p = np.where(upper & ~lower, np.maximum(r, 0.0), 0.0)
    else:
        p = np.zeros_like(m)
    return mu, p


def kkt_residuals(m, w, u, lam, problem: ProblemSpec, eps_act: Optional[float] = None) -> KktResiduals:
    """Residuals of the discrete optimality system, scaled by 1+|lam|+max|u|."""
    scale = 1.0 + abs(lam) + float(np.max(np.abs(u)))
    r = _value_row_gap(m, w, u, lam, problem)
    mu, p = multiplier_slacks(m, w, u, lam, problem, eps_act)
    res_hjb = float(np.max(np.abs(r + mu - p)))
    res_fp = float(np.max(np.abs(apply_A(m, problem.nu) - transport(u, m, problem.q))))
    res_mass = abs(total_mass(m) - 1.0)
    compl = float(np.max(np.abs(mu * m))) if mu.any() else 0.0
    if problem.dbound is not None and p.any():
        compl = max(compl, float(np.max(np.abs(p * (problem.dbound - m)))))
    return KktResiduals(res_hjb / scale, res_fp / scale, res_mass / scale, compl / scale)


def dual_objective(u, lam, p, problem: ProblemSpec) -> float:
    """Dual value lam + sum p*d + sum F*(x, -nu*lap u + |hat u|^q'/q' - p - lam*h^2).

    ``lam`` here is the dual-problem variable; the optimality-system level
    reported by the solvers equals lam * h^2.
    """
    if not problem.coupling.has_conj:
        raise ValueError(f"coupling '{problem.coupling.name}' provides no conjugate")
    qp = problem.q_conj
    h2 = problem.grid.h**2
    hat = hat_dh(u)
    ham = np.sum(hat * hat, axis=-1) ** (qp / 2.0) / qp
    if p is None:
        p = 0.0
    arg = apply_A(u, problem.nu) + ham - p - lam * h2
    with np.errstate(over="ignore"):
        val = lam + float(np.sum(problem.coupling.conj(arg)))
    if problem.dbound is not None:
        val += float(np.sum(np.asarray(p) * problem.dbound))
    return val


def duality_gap(m, w, u, lam, problem: ProblemSpec) -> float:
    """Primal value plus dual value; vanishes at a primal-dual solution.

    ``lam`` is the optimality-system level (as reported by the solvers);
    it is rescaled internally to the dual-problem variable.
    """
    _, p = multiplier_slacks(m, w, u, lam, problem)
    primal = primal_objective(m, w, problem.q, problem.coupling, problem.dbound)
    dual = dual_objective(u, lam / problem.grid.h**2, p, problem)
    return primal + dual


# ---------------------------------------------------------------------------
# Benchmark problems
# ---------------------------------------------------------------------------


def exact_test1(grid: TorusGrid):
    """Closed-form solution of the entropy-coupling first-order benchmark.

    u = 0, lambda = log of the torus integral of exp(sin 2 pi x + sin 2 pi y)
    (evaluated by adaptive quadrature; the double integral separates), and
    m = exp(potential - lambda) sampled at the nodes.
    """
    one_d, _ = scipy.integrate.quad(
        lambda t: np.exp(np.sin(2.0 * np.pi * t)), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13
    )
    lam = 2.0 * np.log(one_d)
    x, y = grid.coords()
    m = np.exp(np.sin(2 * np.pi * x) + np.sin(2 * np.pi * y) - lam)
    return m, grid.zeros(), float(lam)


@dataclass
class ExperimentSpec:
    """One benchmark cell: which test, grid size, and physical parameters."""

    test_id: int
    n_nodes: int
    nu: float = 0.0
    q: float = 2.0
    algorithm: str = "CP-U"
    constrained: bool = False
    d_bar: float = 1.3
    radius: float = 0.25
    sigma: float = 0.1
    r: float = 1.0


def bound_field(grid: TorusGrid, d_bar: float = 1.3, radius: float = 0.25) -> np.ndarray:
    """Density cap: 1 inside the disc x^2 + y^2 <= radius^2, d_bar outside."""
    x, y = grid.coords()
    inside = x * x + y * y <= radius * radius
    return np.where(inside, 1.0, d_bar)


def make_test_problem(exp: ExperimentSpec) -> ProblemSpec:
    """Assemble the grid, coupling, and constraint of a benchmark problem."""
    grid = TorusGrid(exp.n_nodes)
    if exp.test_id == 1:
        problem = ProblemSpec(grid, 0.0, 2.0, LogCoupling.for_grid(grid))
    elif exp.test_id == 2:
        problem = ProblemSpec(
            grid, exp.nu, 2.0, QuadraticCoupling.gaussian(grid, sigma=exp.sigma, r=exp.r)
        )
    elif exp.test_id == 3:
        dbound = bound_field(grid, exp.d_bar, exp.radius) if exp.constrained else None
        problem = ProblemSpec(grid, exp.nu, 2.0, CubicCoupling.for_grid(grid), dbound)
    elif exp.test_id == 4:
        problem = ProblemSpec(grid, exp.nu, exp.q, CubicCoupling.for_grid(grid))
    else:
        raise ValueError(f"unknown test id {exp.test_id} (expected 1..4)")
    problem.meta = {
        "test": exp.test_id,
        "coupling": problem.coupling.name,
        "n": exp.n_nodes,
        "nu": problem.nu,
        "q": problem.q,
        "constrained": problem.dbound is not None,
        "d_bar": exp.d_bar,
        "radius": exp.radius,
        "sigma": exp.sigma,
        "r": exp.r,
    }
    return problem


# ---------------------------------------------------------------------------
# Error metrics
# ---------------------------------------------------------------------------


def l2_error(a: np.ndarray, b: np.ndarray) -> float:
    """Grid-weighted L2 distance sqrt(h^2 * sum (a - b)^2)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    h = 1.0 / a.shape[0]
    return float(np.sqrt(h * h * np.sum((a - b) ** 2)))


def fit_rate(points) -> float:
    """Least-squares slope of log(error) against log(h)."""
    pts = [(h, e) for h, e in points]
    if len(pts) < 2:
        raise ValueError("rate fitting needs at least two (h, error) points")
    lh = np.log([p[0] for p in pts])
    le = np.log([p[1] for p in pts])
    slope, _ = np.polyfit(lh, le, 1)
    return float(slope)


def summary_lines(entries: dict) -> str:
    """Flat key=value text block (one pair per line)."""
    out = []
    for key, val in entries.items():
        if isinstance(val, float):
            out.append(f"{key}={val!r}")
        else:
            out.append(f"{key}={val}")
    return "\n".join(out) + "\n"

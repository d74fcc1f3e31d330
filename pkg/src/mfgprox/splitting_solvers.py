"""The seven first-order splitting algorithms and their shared loop plumbing.

Unsplit variants (CP-U, PCPM-U, MS-U) treat the affine constraint through
the projection P_V, paying one saddle-point solve per iteration; split
variants (CP-SP, MS-SP, PCPM-SP) expose the constraint operator and run
matrix-inversion free, re-centering the density mass after each primal
prox.  ADMM runs on the multiplier side and is specialized to q = 2.

Every run starts from the uniform density m = 1, zero flux, zero duals,
and stops when the Euclidean norm of the stacked primal change drops to
``tol`` (default h^3/5).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics
from .energies import ProxSpec, prox_phi_field, prox_psi_admm_field
from .grid_ops import (
    apply_A,
    apply_B,
    apply_Bstar,
    flux_from_value,
    project_K,
    project_mass,
    total_mass,
)
from .problem import ProblemSpec
from .saddle_linear import SaddleSolver, estimate_norm

__all__ = [
    "ALGORITHMS",
    "SolverConfig",
    "PrimalDualState",
    "SolveReport",
    "stopping_check",
    "recover_multipliers",
    "solve",
    "run_admm",
    "run_cp_u",
    "run_pcpm_u",
    "run_ms_u",
    "run_cp_sp",
    "run_ms_sp",
    "run_pcpm_sp",
]

ALGORITHMS = ("ADMM", "CP-U", "PCPM-U", "MS-U", "CP-SP", "MS-SP", "PCPM-SP")

HISTORY_COLUMNS = (
    "iter",
    "primal_change",
    "res_hjb",
    "res_fp",
    "res_mass",
    "res_compl",
    "gap",
    "lambda",
)


@dataclass
class SolverConfig:
    """Run parameters; unset steps are derived from the operator norm.

    Step-size launch checks follow the convergence theory: CP needs
    gamma*tau*|Xi|^2 < 1, PCPM needs gamma < min(1, 1/|Xi|)/2, MS needs
    gamma < 1/|Xi|.  ``allow_unsafe_steps`` downgrades a violation to a
    recorded warning.
    """

    algorithm: str = "CP-U"
    gamma: Optional[float] = None
    tau: Optional[float] = None
    theta: float = 1.0
    tol: Optional[float] = None
    max_iter: int = 200_000
    record_every: int = 1
    seed: int = 0
    safety: float = 0.95
    allow_unsafe_steps: bool = False
    linear_method: str = "auto"
    cg_tol: float = 1e-10
    cg_maxit: int = 20000
    compute_diagnostics: bool = True

    def __post_init__(self) -> None:
        algo = self.algorithm.upper()
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm '{self.algorithm}' (pick from {ALGORITHMS})")
        self.algorithm = algo
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass
class PrimalDualState:
    """Converged (or last) primal/dual iterate plus algorithm internals."""

    algorithm: str
    m: np.ndarray
    w: np.ndarray
    u: np.ndarray
    lam: float
    aux: dict = field(default_factory=dict)


@dataclass
class SolveReport:
    """Solve outcome: final state, convergence flag, and iteration history."""

    algorithm: str
    state: PrimalDualState
    converged: bool
    iterations: int
    primal_change: float
    tol: float
    gamma: float
    tau: float
    theta: float
    norm_xi: float
    wall_time: float
    history: list
    warnings: list

    @property
    def m(self) -> np.ndarray:
        return self.state.m

    @property
    def w(self) -> np.ndarray:
        return self.state.w

    @property
    def u(self) -> np.ndarray:
        return self.state.u

    @property
    def lam(self) -> float:
        return self.state.lam

    def history_csv(self) -> str:
        lines = [",".join(HISTORY_COLUMNS)]
        for row in self.history:
            lines.append(",".join("%d" % v if k == "iter" else repr(float(v)) for k, v in zip(HISTORY_COLUMNS, row)))
        return "\n".join(lines) + "\n"


def stopping_check(prev: tuple, nxt: tuple, tol: float) -> bool:
    """True when the stacked primal change has Euclidean norm <= tol."""
    dm = nxt[0] - prev[0]
    dw = nxt[1] - prev[1]
    return bool(np.sqrt(np.sum(dm * dm) + np.sum(dw * dw)) <= tol)


def _primal_change(m, w, m_prev, w_prev) -> float:
    dm = m - m_prev
    dw = w - w_prev
    return float(np.sqrt(np.sum(dm * dm) + np.sum(dw * dw)))


def recover_multipliers(state: PrimalDualState, problem: ProblemSpec, solver: SaddleSolver = None):
    """Map a state's dual variables to the value function and level of the
    discrete optimality system (zero-mean u, multiplier-scale lambda).

    ADMM carries (u, lambda) natively (lambda up to the h^2 scale).
    Unsplit variants store the full-space dual sigma, pulled back through
    the constraint Gram matrix: G G* (u, lam) = G sigma.  Split variants
    carry u natively (up to sign), but their scalar dual block moves by
    gamma * (mass defect) per iteration and the projection keeps that
    defect near zero, so it stalls far from the multiplier at any
    realistic stopping point; the level is instead fit from the value
    row in least squares over the nodes where no bound is active.
    """
    h2 = problem.grid.h ** 2
    algo = state.algorithm
    if algo == "ADMM":
        u = state.u
        lam = h2 * state.aux["lam_raw"]
    elif algo in ("CP-SP", "MS-SP", "PCPM-SP"):
        u = -state.aux["sigma_u"]
        lam = diagnostics.fit_level(state.m, u, problem)
    else:
        sn, sv = state.aux["sigma_m"], state.aux["sigma_w"]
        if solver is None:
            solver = SaddleSolver(problem.grid, problem.nu)
        u = -solver.solve(apply_A(sn, problem.nu) + apply_B(sv))
        lam = h2 * float(np.sum(sn))
    return u - np.mean(u), float(lam)


def _resolve_steps(cfg: SolverConfig, problem: ProblemSpec, split: bool):
    """Fill in gamma/tau from the operator-norm bounds; validate launch."""
    warnings = []
    if split:
        norm_xi = estimate_norm("G", problem.grid, problem.nu, seed=cfg.seed)
    else:
        norm_xi = 1.0
    algo = cfg.algorithm
    if algo in ("CP-U", "CP-SP"):
        gamma = cfg.gamma if cfg.gamma is not None else cfg.safety / norm_xi
        tau = cfg.tau if cfg.tau is not None else cfg.safety / norm_xi
        if gamma * tau * norm_xi**2 >= 1.0:
            msg = (
                f"step sizes violate gamma*tau*|Xi|^2 < 1 "
                f"({gamma:.3e}*{tau:.3e}*{norm_xi:.3e}^2 >= 1)"
            )
            if cfg.allow_unsafe_steps:
                warnings.append(msg)
            else:
                raise ValueError(msg)
    elif algo in ("PCPM-U", "PCPM-SP"):
        gamma = cfg.gamma if cfg.gamma is not None else cfg.safety * 0.5 * min(1.0, 1.0 / norm_xi)
        tau = gamma
        if gamma >= 0.5 * min(1.0, 1.0 / norm_xi):
            msg = f"step size violates gamma < min(1, 1/|Xi|)/2 (gamma={gamma:.3e}, |Xi|={norm_xi:.3e})"
            if cfg.allow_unsafe_steps:
                warnings.append(msg)
            else:
                raise ValueError(msg)
    elif algo in ("MS-U", "MS-SP"):
        gamma = cfg.gamma if cfg.gamma is not None else cfg.safety / norm_xi
        tau = gamma
        if gamma >= 1.0 / norm_xi:
            msg = f"step size violates gamma < 1/|Xi| (gamma={gamma:.3e}, |Xi|={norm_xi:.3e})"
            if cfg.allow_unsafe_steps:
                warnings.append(msg)
            else:
                raise ValueError(msg)
    else:  # ADMM: convergent for any positive step
        gamma = cfg.gamma if cfg.gamma is not None else 1.0
        tau = gamma
        if gamma <= 0:
            raise ValueError("ADMM needs gamma > 0")
    return gamma, tau, norm_xi, warnings


class _Recorder:
    """Accumulates history rows; diagnostics are optional but cheap."""

    def __init__(self, problem: ProblemSpec, cfg: SolverConfig, solver: SaddleSolver, recover):
        self.problem = problem
        self.cfg = cfg
        self.solver = solver
        self.recover = recover
        self.rows = []

    def record(self, k: int, change: float, state: PrimalDualState):
        if not self.cfg.compute_diagnostics:
            self.rows.append((k, change, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan))
            return
        u, lam = self.recover(state)
        state.u, state.lam = u, lam
        res = diagnostics.kkt_residuals(state.m, state.w, u, lam, self.problem)
        if self.problem.coupling.has_conj:
            gap = diagnostics.duality_gap(state.m, state.w, u, lam, self.problem)
        else:
            gap = np.nan
        self.rows.append(
            (k, change, res.res_hjb, res.res_fp, res.res_mass, res.res_compl, gap, lam)
        )


def _finish(problem, cfg, recorder, state, k, change, converged, gamma, tau, norm_xi, t0, warnings):
    u, lam = recorder.recover(state)
    state.u, state.lam = u, lam
    if not recorder.rows or recorder.rows[-1][0] != k:
        recorder.record(k, change, state)
    return SolveReport(
        algorithm=cfg.algorithm,
        state=state,
        converged=converged,
        iterations=k,
        primal_change=change,
        tol=cfg.tol if cfg.tol is not None else problem.grid.h**3 / 5.0,
        gamma=gamma,
        tau=tau,
        theta=cfg.theta,
        norm_xi=norm_xi,
        wall_time=time.perf_counter() - t0,
        history=recorder.rows,
        warnings=warnings,
    )


def _tol(cfg: SolverConfig, problem: ProblemSpec) -> float:
    return cfg.tol if cfg.tol is not None else problem.grid.h**3 / 5.0


# ---------------------------------------------------------------------------
# ADMM on the multiplier side (q = 2 only)
# ---------------------------------------------------------------------------


def run_admm(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Alternating direction method of multipliers on the dual formulation.

    Needs q = 2 and a coupling with a conjugate derivative; the density is
    recovered from the multiplier triple through (F*)' and the flux from
    the feedback relation.
    """
    if problem.q != 2.0:
        raise ValueError("the multiplier-side ADMM is specialized to q = 2")
    if not problem.coupling.has_conj_deriv:
        raise ValueError("ADMM needs a coupling with a conjugate derivative")
    if problem.dbound is not None:
        raise ValueError("ADMM handles the unconstrained-density problem only")
    t0 = time.perf_counter()
    gamma, tau, norm_xi, warnings = _resolve_steps(cfg, problem, split=False)
    grid, nu = problem.grid, problem.nu
    h2 = grid.h**2
    tol = _tol(cfg, problem)
    solver = SaddleSolver(grid, nu, cfg.linear_method, cfg.cg_tol, cfg.cg_maxit)

    if init is not None and init.algorithm == "ADMM":
        u = init.u.copy()
        lam_raw = init.aux["lam_raw"]
        a, b, c = (init.aux[k].copy() for k in ("a", "b", "c"))
        s1, s2, s3 = (init.aux[k].copy() for k in ("s1", "s2", "s3"))
        m, w = init.m.copy(), init.w.copy()
    else:
        u = grid.zeros()
        lam_raw = 0.0
        a, c, s1, s3 = grid.zeros(), grid.zeros(), grid.zeros(), grid.zeros()
        b, s2 = grid.zeros_flux(), grid.zeros_flux()
        m, w = grid.ones(), grid.zeros_flux()

    def make_state():
        return PrimalDualState(
            "ADMM", m, w, u, lam_raw,
            aux=dict(lam_raw=lam_raw, a=a, b=b, c=c, s1=s1, s2=s2, s3=s3),
        )

    recorder = _Recorder(problem, cfg, solver, lambda st: recover_multipliers(st, problem, solver))
    converged = False
    change = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        u = solver.solve(apply_B(b - s2 / gamma) + apply_A(c - s3 / gamma, nu))
        lam_raw = float(np.sum(s1 - 1.0 - gamma * a)) / gamma
        bstar_u = apply_Bstar(u)
        a_u = apply_A(u, nu)
        a, b, c = prox_psi_admm_field(
            s1 / gamma - h2 * lam_raw,
            s2 / gamma + bstar_u,
            s3 / gamma + a_u,
            gamma,
            problem.coupling,
        )
        s1 = s1 - gamma * (h2 * lam_raw + a)
        s2 = s2 + gamma * (bstar_u - b)
        s3 = s3 + gamma * (a_u - c)

        m_prev, w_prev = m, w
        pkb = project_K(b)
        eta = a + 0.5 * np.sum(pkb * pkb, axis=-1) + c
        m = np.asarray(problem.coupling.conj_deriv(eta), dtype=float)
        w = flux_from_value(u, m, 2.0)
        change = _primal_change(m, w, m_prev, w_prev)
        if k % cfg.record_every == 0:
            recorder.record(k, change, make_state())
        if change <= tol:
            converged = True
            break
    return _finish(problem, cfg, recorder, make_state(), k, change, converged,
                   gamma, tau, norm_xi, t0, warnings)


# ---------------------------------------------------------------------------
# Unsplit primal-dual family (projection P_V inside the dual prox)
# ---------------------------------------------------------------------------


def run_cp_u(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Primal-dual hybrid gradient iteration with extrapolation, unsplit."""
    t0 = time.perf_counter()
    gamma, tau, norm_xi, warnings = _resolve_steps(cfg, problem, split=False)
    grid, nu = problem.grid, problem.nu
    tol = _tol(cfg, problem)
    solver = SaddleSolver(grid, nu, cfg.linear_method, cfg.cg_tol, cfg.cg_maxit)
    prox = ProxSpec(problem.q, tau, problem.coupling, problem.dbound)

    if init is not None and init.algorithm == "CP-U":
        m, w = init.m.copy(), init.w.copy()
        mb, wb = init.aux["m_bar"].copy(), init.aux["w_bar"].copy()
        sn, sv = init.aux["sigma_m"].copy(), init.aux["sigma_w"].copy()
    else:
        m, w = grid.ones(), grid.zeros_flux()
        mb, wb = m.copy(), w.copy()
        sn, sv = grid.zeros(), grid.zeros_flux()

    def make_state():
        return PrimalDualState("CP-U", m, w, grid.zeros(), 0.0,
                               aux=dict(sigma_m=sn, sigma_w=sv, m_bar=mb, w_bar=wb))

    recorder = _Recorder(problem, cfg, solver, lambda st: recover_multipliers(st, problem, solver))
    converged = False
    change = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        tmp_m = sn + gamma * (mb - 1.0)
        tmp_w = sv + gamma * wb
        ysol = solver.solve(apply_A(tmp_m, nu) + apply_B(tmp_w))
        sn = apply_A(ysol, nu) + total_mass(tmp_m)
        sv = apply_Bstar(ysol)
        m_new, w_new = prox_phi_field(m - tau * sn, w - tau * sv, prox)
        mb = m_new + cfg.theta * (m_new - m)
        wb = w_new + cfg.theta * (w_new - w)
        change = _primal_change(m_new, w_new, m, w)
        m, w = m_new, w_new
        if k % cfg.record_every == 0:
            recorder.record(k, change, make_state())
        if change <= tol:
            converged = True
            break
    return _finish(problem, cfg, recorder, make_state(), k, change, converged,
                   gamma, tau, norm_xi, t0, warnings)


def run_pcpm_u(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Predictor-corrector proximal multiplier method, unsplit."""
    t0 = time.perf_counter()
    gamma, tau, norm_xi, warnings = _resolve_steps(cfg, problem, split=False)
    grid, nu = problem.grid, problem.nu
    tol = _tol(cfg, problem)
    solver = SaddleSolver(grid, nu, cfg.linear_method, cfg.cg_tol, cfg.cg_maxit)
    prox = ProxSpec(problem.q, gamma, problem.coupling, problem.dbound)

    if init is not None and init.algorithm == "PCPM-U":
        m, w = init.m.copy(), init.w.copy()
        sn, sv = init.aux["sigma_m"].copy(), init.aux["sigma_w"].copy()
        vn, vw = init.aux["v_m"].copy(), init.aux["v_w"].copy()
    else:
        m, w = grid.ones(), grid.zeros_flux()
        sn, sv = grid.zeros(), grid.zeros_flux()
        vn, vw = grid.zeros(), grid.zeros_flux()

    def make_state():
        return PrimalDualState("PCPM-U", m, w, grid.zeros(), 0.0,
                               aux=dict(sigma_m=sn, sigma_w=sv, v_m=vn, v_w=vw))

    recorder = _Recorder(problem, cfg, solver, lambda st: recover_multipliers(st, problem, solver))
    converged = False
    change = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        p1 = sn + gamma * (m - vn)
        p2 = sv + gamma * (w - vw)
        m_new, w_new = prox_phi_field(m - gamma * p1, w - gamma * p2, prox)
        y1 = vn + gamma * p1
        y2 = vw + gamma * p2
        ysol = solver.solve(apply_A(y1, nu) + apply_B(y2))
        vn = y1 - apply_A(ysol, nu) - (total_mass(y1) - 1.0)
        vw = y2 - apply_Bstar(ysol)
        sn = sn + gamma * (m_new - vn)
        sv = sv + gamma * (w_new - vw)
        change = _primal_change(m_new, w_new, m, w)
        m, w = m_new, w_new
        if k % cfg.record_every == 0:
            recorder.record(k, change, make_state())
        if change <= tol:
            converged = True
            break
    return _finish(problem, cfg, recorder, make_state(), k, change, converged,
                   gamma, tau, norm_xi, t0, warnings)


def run_ms_u(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Forward-backward-forward splitting of the monotone + skew system, unsplit."""
    t0 = time.perf_counter()
    gamma, tau, norm_xi, warnings = _resolve_steps(cfg, problem, split=False)
    grid, nu = problem.grid, problem.nu
    tol = _tol(cfg, problem)
    solver = SaddleSolver(grid, nu, cfg.linear_method, cfg.cg_tol, cfg.cg_maxit)
    prox = ProxSpec(problem.q, gamma, problem.coupling, problem.dbound)

    if init is not None and init.algorithm == "MS-U":
        m, w = init.m.copy(), init.w.copy()
        sn, sv = init.aux["sigma_m"].copy(), init.aux["sigma_w"].copy()
    else:
        m, w = grid.ones(), grid.zeros_flux()
        sn, sv = grid.zeros(), grid.zeros_flux()

    def make_state():
        return PrimalDualState("MS-U", m, w, grid.zeros(), 0.0,
                               aux=dict(sigma_m=sn, sigma_w=sv))

    recorder = _Recorder(problem, cfg, solver, lambda st: recover_multipliers(st, problem, solver))
    converged = False
    change = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        # eta and p depend on the incoming iterate only and commute.
        tmp_m = sn + gamma * (m - 1.0)
        tmp_w = sv + gamma * w
        ysol = solver.solve(apply_A(tmp_m, nu) + apply_B(tmp_w))
        eta1 = apply_A(ysol, nu) + total_mass(tmp_m)
        eta2 = apply_Bstar(ysol)
        p1, p2 = prox_phi_field(m - gamma * sn, w - gamma * sv, prox)
        sn_new = eta1 + gamma * (p1 - m)
        sv_new = eta2 + gamma * (p2 - w)
        m_new = p1 - gamma * (eta1 - sn)
        w_new = p2 - gamma * (eta2 - sv)
        sn, sv = sn_new, sv_new
        change = _primal_change(m_new, w_new, m, w)
        m, w = m_new, w_new
        if k % cfg.record_every == 0:
            recorder.record(k, change, make_state())
        if change <= tol:
            converged = True
            break
    return _finish(problem, cfg, recorder, make_state(), k, change, converged,
                   gamma, tau, norm_xi, t0, warnings)


# ---------------------------------------------------------------------------
# Split family: constraint exposed, no linear solves, mass re-centering
# ---------------------------------------------------------------------------


def run_cp_sp(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Primal-dual iteration on the split formulation with mass projection."""
    t0 = time.perf_counter()
    gamma, tau, norm_xi, warnings = _resolve_steps(cfg, problem, split=True)
    grid, nu = problem.grid, problem.nu
    h2 = grid.h**2
    tol = _tol(cfg, problem)
    prox = ProxSpec(problem.q, tau, problem.coupling, problem.dbound)

    if init is not None and init.algorithm == "CP-SP":
        m, w = init.m.copy(), init.w.copy()
        mb, wb = init.aux["m_bar"].copy(), init.aux["w_bar"].copy()
        su, sl = init.aux["sigma_u"].copy(), init.aux["sigma_lam"]
    else:
        m, w = grid.ones(), grid.zeros_flux()
        mb, wb = m.copy(), w.copy()
        su, sl = grid.zeros(), 0.0

    def make_state():
        return PrimalDualState("CP-SP", m, w, grid.zeros(), 0.0,
                               aux=dict(sigma_u=su, sigma_lam=sl, m_bar=mb, w_bar=wb))

    recorder = _Recorder(problem, cfg, None, lambda st: recover_multipliers(st, problem))
    converged = False
    change = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        su = su + gamma * (apply_A(mb, nu) + apply_B(wb))
        sl = sl + gamma * (total_mass(mb) - 1.0)
        n1, v1 = prox_phi_field(
            m - tau * (apply_A(su, nu) + h2 * sl), w - tau * apply_Bstar(su), prox
        )
        m_new = project_mass(n1)
        w_new = v1
        mb = m_new + cfg.theta * (n1 - m)
        wb = w_new + cfg.theta * (v1 - w)
        change = _primal_change(m_new, w_new, m, w)
        m, w = m_new, w_new
        if k % cfg.record_every == 0:
            recorder.record(k, change, make_state())
        if change <= tol:
            converged = True
            break
    return _finish(problem, cfg, recorder, make_state(), k, change, converged,
                   gamma, tau, norm_xi, t0, warnings)


def run_ms_sp(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Monotone + skew splitting on the split formulation (empirical variant).

    The mass re-centering is applied after the primal prox and after the
    final correction so every stored density has exact unit mass; no
    convergence theorem covers this variant.
    """
    t0 = time.perf_counter()
    gamma, tau, norm_xi, warnings = _resolve_steps(cfg, problem, split=True)
    grid, nu = problem.grid, problem.nu
    h2 = grid.h**2
    tol = _tol(cfg, problem)
    prox = ProxSpec(problem.q, gamma, problem.coupling, problem.dbound)

    if init is not None and init.algorithm == "MS-SP":
        m, w = init.m.copy(), init.w.copy()
        su, sl = init.aux["sigma_u"].copy(), init.aux["sigma_lam"]
    else:
        m, w = grid.ones(), grid.zeros_flux()
        su, sl = grid.zeros(), 0.0

    def make_state():
        return PrimalDualState("MS-SP", m, w, grid.zeros(), 0.0,
                               aux=dict(sigma_u=su, sigma_lam=sl))

    recorder = _Recorder(problem, cfg, None, lambda st: recover_multipliers(st, problem))
    converged = False
    change = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        eta_u = su + gamma * (apply_A(m, nu) + apply_B(w))
        eta_l = sl + gamma * (total_mass(m) - 1.0)
        p1, p2 = prox_phi_field(
            m - gamma * (apply_A(su, nu) + h2 * sl), w - gamma * apply_Bstar(su), prox
        )
        p1 = project_mass(p1)
        su_new = eta_u + gamma * (apply_A(p1 - m, nu) + apply_B(p2 - w))
        sl_new = eta_l + gamma * h2 * float(np.sum(p1 - m))
        m_new = p1 - gamma * (apply_A(eta_u - su, nu) + h2 * (eta_l - sl))
        w_new = p2 - gamma * apply_Bstar(eta_u - su)
        m_new = project_mass(m_new)
        su, sl = su_new, sl_new
        change = _primal_change(m_new, w_new, m, w)
        m, w = m_new, w_new
        if k % cfg.record_every == 0:
            recorder.record(k, change, make_state())
        if change <= tol:
            converged = True
            break
    return _finish(problem, cfg, recorder, make_state(), k, change, converged,
                   gamma, tau, norm_xi, t0, warnings)


def run_pcpm_sp(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Predictor-corrector multiplier method on the split formulation
    (empirical variant with mass re-centering after the primal prox)."""
    t0 = time.perf_counter()
    gamma, tau, norm_xi, warnings = _resolve_steps(cfg, problem, split=True)
    grid, nu = problem.grid, problem.nu
    h2 = grid.h**2
    tol = _tol(cfg, problem)
    prox = ProxSpec(problem.q, gamma, problem.coupling, problem.dbound)

    if init is not None and init.algorithm == "PCPM-SP":
        m, w = init.m.copy(), init.w.copy()
        su, sl = init.aux["sigma_u"].copy(), init.aux["sigma_lam"]
        vu, vl = init.aux["v_u"].copy(), init.aux["v_lam"]
    else:
        m, w = grid.ones(), grid.zeros_flux()
        su, sl = grid.zeros(), 0.0
        vu, vl = grid.zeros(), 0.0

    def make_state():
        return PrimalDualState("PCPM-SP", m, w, grid.zeros(), 0.0,
                               aux=dict(sigma_u=su, sigma_lam=sl, v_u=vu, v_lam=vl))

    recorder = _Recorder(problem, cfg, None, lambda st: recover_multipliers(st, problem))
    converged = False
    change = np.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        pred_u = su + gamma * (apply_A(m, nu) + apply_B(w) - vu)
        pred_l = sl + gamma * (total_mass(m) - vl)
        m_new, w_new = prox_phi_field(
            m - gamma * (apply_A(pred_u, nu) + h2 * pred_l),
            w - gamma * apply_Bstar(pred_u),
            prox,
        )
        m_new = project_mass(m_new)
        # prox of the point indicator pins the auxiliary block at (0, 1)
        vu = np.zeros_like(vu)
        vl = 1.0
        su = su + gamma * (apply_A(m_new, nu) + apply_B(w_new) - vu)
        sl = sl + gamma * (total_mass(m_new) - vl)
        change = _primal_change(m_new, w_new, m, w)
        m, w = m_new, w_new
        if k % cfg.record_every == 0:
            recorder.record(k, change, make_state())
        if change <= tol:
            converged = True
            break
    return _finish(problem, cfg, recorder, make_state(), k, change, converged,
                   gamma, tau, norm_xi, t0, warnings)


_RUNNERS = {
    "ADMM": run_admm,
    "CP-U": run_cp_u,
    "PCPM-U": run_pcpm_u,
    "MS-U": run_ms_u,
    "CP-SP": run_cp_sp,
    "MS-SP": run_ms_sp,
    "PCPM-SP": run_pcpm_sp,
}


def solve(problem: ProblemSpec, cfg: SolverConfig, init: PrimalDualState = None) -> SolveReport:
    """Dispatch a solve to the configured algorithm."""
    return _RUNNERS[cfg.algorithm](problem, cfg, init=init)

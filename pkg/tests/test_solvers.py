import numpy as np
import pytest

from mfgprox.couplings import LogCoupling, QuadraticCoupling
from mfgprox.diagnostics import ExperimentSpec, kkt_residuals, l2_error, make_test_problem
from mfgprox.energies import ProxSpec, prox_phi_field
from mfgprox.grid_ops import TorusGrid, total_mass
from mfgprox.problem import ProblemSpec
from mfgprox.saddle_linear import SaddleSolver, prox_psistar_unsplit
from mfgprox.splitting_solvers import (
    ALGORITHMS,
    SolverConfig,
    solve,
    stopping_check,
)


def test_stopping_check():
    m = np.ones((4, 4))
    w = np.zeros((4, 4, 4))
    assert stopping_check((m, w), (m.copy(), w.copy()), 0.0)
    m2 = m.copy()
    m2[0, 0] += 3e-3
    assert stopping_check((m, w), (m2, w), 3e-3)  # boundary is inclusive
    assert not stopping_check((m, w), (m2, w), 2.9e-3)


def test_default_tolerance_matches_mesh_rule():
    prob = make_test_problem(ExperimentSpec(1, 20))
    rep = solve(prob, SolverConfig(algorithm="CP-U", max_iter=1, compute_diagnostics=False))
    assert rep.tol == pytest.approx((1.0 / 20) ** 3 / 5.0)
    assert rep.tol == pytest.approx(2.5e-5)


def test_uniform_problem_is_a_fixed_point():
    # x-independent entropy coupling: m == 1, u == 0, lambda == 0 solves the
    # system for any viscosity, and the solver starts there
    grid = TorusGrid(8)
    prob = ProblemSpec(grid, 0.5, 2.0, LogCoupling(0.0))
    rep = solve(prob, SolverConfig(algorithm="CP-U"))
    assert rep.converged and rep.iterations <= 3
    assert np.max(np.abs(rep.m - 1.0)) <= 1e-8
    assert np.max(np.abs(rep.u)) <= 1e-6
    assert abs(rep.lam) <= 1e-6
    res = kkt_residuals(rep.m, rep.w, rep.u, rep.lam, prob)
    assert res.max() <= 1e-8


@pytest.mark.parametrize("algo", ("CP-U", "ADMM"))
def test_tracking_problem_recovers_reference(algo):
    # nu = 0 tracking problem: exact solution m = m_bar, u = 0, lambda = 0
    prob = make_test_problem(ExperimentSpec(2, 20, nu=0.0))
    rep = solve(prob, SolverConfig(algorithm=algo, record_every=10))
    assert rep.converged
    assert rep.iterations <= 60
    assert l2_error(rep.m, prob.coupling.m_bar) <= 5e-4
    assert abs(rep.lam) <= 1e-6
    # feasibility drift stays within a small multiple of the tolerance
    from mfgprox.grid_ops import apply_A, apply_B

    drift = np.linalg.norm(apply_A(rep.m, prob.nu) + apply_B(rep.w))
    assert drift <= 50 * rep.tol
    assert abs(total_mass(rep.m) - 1.0) <= 50 * rep.tol


def test_admm_warm_start_stays_put():
    prob = make_test_problem(ExperimentSpec(2, 12, nu=0.0))
    cfg = SolverConfig(algorithm="ADMM", record_every=10)
    first = solve(prob, cfg)
    assert first.converged
    again = solve(prob, cfg, init=first.state)
    assert again.converged and again.iterations <= 2


def test_admm_rejects_bad_setups():
    grid = TorusGrid(8)
    prob_q3 = ProblemSpec(grid, 0.0, 3.0, QuadraticCoupling(1.0))
    with pytest.raises(ValueError):
        solve(prob_q3, SolverConfig(algorithm="ADMM"))
    from mfgprox.couplings import ZeroCoupling

    prob_noconj = ProblemSpec(grid, 0.0, 2.0, ZeroCoupling())
    with pytest.raises(ValueError):
        solve(prob_noconj, SolverConfig(algorithm="ADMM"))


def test_step_bound_launch_checks():
    prob = make_test_problem(ExperimentSpec(1, 8))
    with pytest.raises(ValueError):
        solve(prob, SolverConfig(algorithm="MS-U", gamma=1.5))
    with pytest.raises(ValueError):
        solve(prob, SolverConfig(algorithm="CP-U", gamma=1.2, tau=1.0))
    with pytest.raises(ValueError):
        solve(prob, SolverConfig(algorithm="PCPM-U", gamma=0.6))
    rep = solve(
        prob,
        SolverConfig(algorithm="MS-U", gamma=1.5, allow_unsafe_steps=True, max_iter=3,
                     compute_diagnostics=False),
    )
    assert rep.warnings


def test_theta_zero_still_converges():
    prob = make_test_problem(ExperimentSpec(1, 12))
    rep = solve(prob, SolverConfig(algorithm="CP-U", theta=0.0, record_every=50))
    assert rep.converged


def test_pcpm_first_iterations_stay_finite():
    for nu in (0.0, 1.0):
        grid = TorusGrid(12)
        prob = ProblemSpec(grid, nu, 2.0, LogCoupling.for_grid(grid))
        rep = solve(prob, SolverConfig(algorithm="PCPM-U", max_iter=1, compute_diagnostics=False))
        assert np.isfinite(rep.m).all() and np.isfinite(rep.w).all()


def test_ms_u_parallel_blocks_commute():
    # eta (dual prox) and p (primal prox) read only the incoming iterate,
    # so evaluating them in either order gives bitwise-identical results
    prob = make_test_problem(ExperimentSpec(1, 8))
    grid = prob.grid
    solver = SaddleSolver(grid, prob.nu)
    rng = np.random.default_rng(0)
    m, w = rng.random(grid.shape) + 0.5, rng.standard_normal(grid.shape + (4,))
    sn, sv = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape + (4,))
    gamma = 0.5
    prox = ProxSpec(prob.q, gamma, prob.coupling)

    eta1 = prox_psistar_unsplit(sn + gamma * (m - 1.0), sv + gamma * w, gamma, solver)
    p1 = prox_phi_field(m - gamma * sn, w - gamma * sv, prox)
    p2 = prox_phi_field(m - gamma * sn, w - gamma * sv, prox)
    eta2 = prox_psistar_unsplit(sn + gamma * (m - 1.0), sv + gamma * w, gamma, solver)
    assert np.array_equal(eta1[0], eta2[0]) and np.array_equal(eta1[1], eta2[1])
    assert np.array_equal(p1[0], p2[0]) and np.array_equal(p1[1], p2[1])


def test_split_variants_never_touch_the_linear_solver(monkeypatch):
    import mfgprox.saddle_linear as sl

    def boom(self, rhs):
        raise AssertionError("split variant called the saddle solver")

    monkeypatch.setattr(sl.SaddleSolver, "solve", boom)
    prob = make_test_problem(ExperimentSpec(1, 8))
    for algo in ("CP-SP", "MS-SP", "PCPM-SP"):
        rep = solve(prob, SolverConfig(algorithm=algo, max_iter=5, compute_diagnostics=False))
        assert rep.iterations == 5


def test_split_variants_keep_unit_mass_every_iteration():
    prob = make_test_problem(ExperimentSpec(1, 8))
    for algo in ("CP-SP", "MS-SP", "PCPM-SP"):
        rep = solve(prob, SolverConfig(algorithm=algo, max_iter=7, compute_diagnostics=True))
        for row in rep.history:
            assert row[4] <= 1e-13  # res_mass column


def test_prox_keeps_iterates_admissible():
    prob = make_test_problem(ExperimentSpec(3, 10, nu=0.1, constrained=True))
    rep = solve(prob, SolverConfig(algorithm="CP-U", max_iter=30, compute_diagnostics=False))
    assert np.all(rep.m >= 0.0)
    assert np.all(rep.m <= prob.dbound + 1e-12)
    assert np.all(rep.w[..., 0] >= 0) and np.all(rep.w[..., 1] <= 0)
    assert np.all(rep.w[..., 2] >= 0) and np.all(rep.w[..., 3] <= 0)


def test_determinism_bitwise():
    prob = make_test_problem(ExperimentSpec(2, 12, nu=0.1))
    cfg = SolverConfig(algorithm="CP-U", max_iter=40, record_every=5)
    a = solve(prob, cfg)
    prob2 = make_test_problem(ExperimentSpec(2, 12, nu=0.1))
    b = solve(prob2, cfg)
    assert a.iterations == b.iterations
    for ra, rb in zip(a.history, b.history):
        assert ra == rb
    assert np.array_equal(a.m, b.m)


def test_report_records_configured_steps():
    prob = make_test_problem(ExperimentSpec(2, 8, nu=0.0))
    rep = solve(prob, SolverConfig(algorithm="ADMM", gamma=0.7, max_iter=5,
                                   compute_diagnostics=False))
    assert rep.gamma == 0.7
    csv = rep.history_csv()
    assert csv.splitlines()[0] == "iter,primal_change,res_hjb,res_fp,res_mass,res_compl,gap,lambda"


def test_all_algorithms_listed():
    assert set(ALGORITHMS) == {"ADMM", "CP-U", "PCPM-U", "MS-U", "CP-SP", "MS-SP", "PCPM-SP"}

import numpy as np
import pytest
import scipy.integrate
import scipy.special

from mfgprox.couplings import CubicCoupling, LogCoupling, QuadraticCoupling
from mfgprox.diagnostics import (
    ExperimentSpec,
    dual_objective,
    duality_gap,
    exact_test1,
    fit_rate,
    kkt_residuals,
    l2_error,
    make_test_problem,
    summary_lines,
)
from mfgprox.grid_ops import TorusGrid, total_mass
from mfgprox.problem import ProblemSpec


def test_uniform_solution_has_zero_residuals():
    for nu in (0.0, 0.7):
        grid = TorusGrid(8)
        prob = ProblemSpec(grid, nu, 2.0, LogCoupling(0.0))
        res = kkt_residuals(grid.ones(), grid.zeros_flux(), grid.zeros(), 0.0, prob)
        assert res.max() == 0.0


def test_constant_shift_of_u_leaves_stencil_rows_unchanged():
    prob = make_test_problem(ExperimentSpec(3, 10, nu=0.5))
    rng = np.random.default_rng(0)
    m = rng.random(prob.grid.shape) + 0.5
    w = rng.standard_normal(prob.grid.shape + (4,))
    u = rng.standard_normal(prob.grid.shape)
    a = kkt_residuals(m, w, u, 0.3, prob)
    b = kkt_residuals(m, w, u + 5.0, 0.3, prob)
    # both rows see u only through differences; undo the report scaling
    sa = 1.0 + 0.3 + np.max(np.abs(u))
    sb = 1.0 + 0.3 + np.max(np.abs(u + 5.0))
    assert a.res_fp * sa == pytest.approx(b.res_fp * sb, rel=1e-12)
    assert a.res_hjb * sa == pytest.approx(b.res_hjb * sb, rel=1e-12)


def test_injected_exact_solution_is_discrete_exact():
    # the closed-form benchmark has a vanishing value function, so every
    # stencil term drops out and the sampled solution satisfies the
    # discrete system at roundoff on any grid
    vals = {}
    for n in (20, 40):
        prob = make_test_problem(ExperimentSpec(1, n))
        m, u, lam = exact_test1(prob.grid)
        w = np.zeros(prob.grid.shape + (4,))
        vals[n] = kkt_residuals(m, w, u, lam, prob).max()
        assert vals[n] <= 1e-12
    assert vals[40] <= vals[20] + 1e-15


def test_dual_objective_closed_form_and_monotone():
    grid = TorusGrid(10)
    prob = make_test_problem(ExperimentSpec(2, 10, nu=0.0))
    # u = 0, lam = 0, p = 0: value is sum of F*(x, 0) = 0 for the tracker
    assert dual_objective(grid.zeros(), 0.0, None, prob) == pytest.approx(0.0, abs=1e-12)
    # the reference density with u = 0 is primal-dual optimal: gap vanishes
    gap = duality_gap(prob.coupling.m_bar, grid.zeros_flux(), grid.zeros(), 0.0, prob)
    assert abs(gap) <= 1e-10
    # random perturbations of u can only increase the dual value
    rng = np.random.default_rng(1)
    base = dual_objective(grid.zeros(), 0.0, None, prob)
    for _ in range(5):
        du = rng.standard_normal(grid.shape) * 0.05
        assert dual_objective(du - du.mean(), 0.0, None, prob) >= base - 1e-12


def test_exact_test1_values():
    grid = TorusGrid(40)
    m, u, lam = exact_test1(grid)
    # separable integral: lambda = 2 log I0(1) with the Bessel value
    assert lam == pytest.approx(2.0 * np.log(scipy.special.i0(1.0)), abs=1e-10)
    one_d, _ = scipy.integrate.quad(lambda t: np.exp(np.sin(2 * np.pi * t)), 0, 1)
    assert lam == pytest.approx(2.0 * np.log(one_d), abs=1e-12)
    assert not u.any()
    assert np.all(m > 0.0)
    assert total_mass(m) == pytest.approx(1.0, abs=1e-10)
    # level recomputed from the sampled field agrees to quadrature accuracy
    x, y = grid.coords()
    s = np.sin(2 * np.pi * x) + np.sin(2 * np.pi * y)
    lam_grid = np.log(total_mass(np.exp(s)))
    assert lam_grid == pytest.approx(lam, abs=1e-10)


def test_make_test_problem_wiring():
    p1 = make_test_problem(ExperimentSpec(1, 12))
    assert isinstance(p1.coupling, LogCoupling) and p1.nu == 0.0 and p1.q == 2.0
    p2 = make_test_problem(ExperimentSpec(2, 12, nu=0.3))
    assert isinstance(p2.coupling, QuadraticCoupling)
    assert total_mass(p2.coupling.m_bar) == pytest.approx(1.0, abs=1e-12)
    p3 = make_test_problem(ExperimentSpec(3, 12, nu=0.1, constrained=True))
    assert isinstance(p3.coupling, CubicCoupling)
    x, y = p3.grid.coords()
    inside = x * x + y * y <= 0.25**2
    assert np.all(p3.dbound[inside] == 1.0)
    assert np.all(p3.dbound[~inside] == 1.3)
    p4 = make_test_problem(ExperimentSpec(4, 12, nu=1.0, q=3.0))
    assert p4.q == 3.0 and p4.dbound is None
    with pytest.raises(ValueError):
        make_test_problem(ExperimentSpec(5, 12))


def test_error_metrics():
    a = np.ones((4, 4))
    assert l2_error(a, a) == 0.0
    with pytest.raises(ValueError):
        l2_error(a, np.ones((5, 5)))
    hs = [0.1, 0.05, 0.025]
    assert fit_rate([(h, 3.0 * h) for h in hs]) == pytest.approx(1.0, abs=1e-12)
    assert fit_rate([(h, 2.0 * h * h) for h in hs]) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0)])


def test_summary_lines_round_trip():
    text = summary_lines({"n": 20, "nu": 0.5, "lambda_": 0.25})
    entries = dict(line.split("=", 1) for line in text.strip().splitlines())
    assert entries["n"] == "20"
    assert float(entries["lambda_"]) == 0.25

import numpy as np
import pytest

from mfgprox.grid_ops import TorusGrid, apply_A, apply_B, apply_Bstar, total_mass
from mfgprox.saddle_linear import (
    SaddleSolver,
    apply_G,
    apply_Gstar,
    estimate_norm,
    norm_G_exact,
    project_V,
    prox_psistar_unsplit,
)


def random_pair(seed, n):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)), rng.standard_normal((n, n, 4))


def test_constraint_map_values():
    g = TorusGrid(5)
    gm, gs = apply_G(g.ones(), g.zeros_flux(), nu=0.7)
    assert not gm.any() and gs == pytest.approx(1.0)
    gu, gw = apply_Gstar(np.full(g.shape, 2.0), 3.0, nu=0.7)
    assert np.allclose(gu, 3.0 * g.h**2)
    assert not gw.any()


@pytest.mark.parametrize("seed", range(5))
def test_constraint_adjointness(seed):
    n = 8
    m, w = random_pair(seed, n)
    u, _ = random_pair(seed + 50, n)
    lam = 1.234
    gm, gs = apply_G(m, w, nu=0.4)
    gu, gw = apply_Gstar(u, lam, nu=0.4)
    lhs = np.sum(gm * u) + gs * lam
    rhs = np.sum(m * gu) + np.sum(w * gw)
    scale = np.linalg.norm(m) * np.linalg.norm(u) + abs(lam)
    assert abs(lhs - rhs) <= 1e-11 * scale


@pytest.mark.parametrize("nu", (0.0, 1.0))
@pytest.mark.parametrize("method", ("dense", "cg"))
def test_solve_matches_dense_pseudoinverse(nu, method):
    n = 4
    solver = SaddleSolver(TorusGrid(n), nu, method=method)
    rng = np.random.default_rng(2)
    rhs = rng.standard_normal((n, n))
    rhs -= rhs.mean()
    # dense oracle: assemble M column by column, pseudo-inverse on zero-mean space
    cols = []
    for k in range(n * n):
        e = np.zeros(n * n)
        e[k] = 1.0
        cols.append(solver.apply(e.reshape(n, n)).ravel())
    mat = np.column_stack(cols)
    x_ref = (np.linalg.pinv(mat) @ rhs.ravel()).reshape(n, n)
    x = solver.solve(rhs)
    assert np.max(np.abs(x - x_ref)) <= 1e-9
    assert abs(x.sum()) <= 1e-12 * (1.0 + np.linalg.norm(x)) * n * n
    assert np.max(np.abs(solver.apply(x) - rhs)) <= 1e-8
    assert not solver.solve(np.zeros((n, n))).any()


def test_operator_symmetry():
    n = 8
    solver = SaddleSolver(TorusGrid(n), 0.5)
    rng = np.random.default_rng(3)
    x = rng.standard_normal((n, n))
    y = rng.standard_normal((n, n))
    x -= x.mean()
    y -= y.mean()
    assert np.sum(solver.apply(x) * y) == pytest.approx(
        np.sum(x * solver.apply(y)), rel=1e-12
    )


@pytest.mark.parametrize("nu", (0.0, 0.3))
def test_project_V(nu):
    n = 8
    grid = TorusGrid(n)
    solver = SaddleSolver(grid, nu)
    # feasible point is untouched
    pm, pw = project_V(grid.ones(), grid.zeros_flux(), solver)
    assert np.allclose(pm, 1.0, atol=1e-10) and np.max(np.abs(pw)) <= 1e-10
    m, w = random_pair(7, n)
    pm, pw = project_V(m, w, solver)
    gm, gs = apply_G(pm, pw, nu)
    assert np.max(np.abs(gm)) <= 1e-7
    assert gs == pytest.approx(1.0, abs=1e-10)
    pm2, pw2 = project_V(pm, pw, solver)
    assert np.max(np.abs(pm2 - pm)) <= 1e-10
    assert np.max(np.abs(pw2 - pw)) <= 1e-10


def test_prox_psistar_moreau():
    n = 6
    grid = TorusGrid(n)
    solver = SaddleSolver(grid, 0.2)
    m, w = random_pair(9, n)
    gamma = 0.7
    am, aw = prox_psistar_unsplit(m, w, gamma, solver)
    bm, bw = project_V(m / gamma, w / gamma, solver)
    assert np.allclose(am + gamma * bm, m, atol=1e-12)
    assert np.allclose(aw + gamma * bw, w, atol=1e-12)
    # the prox of the conjugate of a feasible-scaled point vanishes
    fm, fw = project_V(m, w, solver)
    zm, zw = prox_psistar_unsplit(gamma * fm, gamma * fw, gamma, solver)
    assert np.max(np.abs(zm)) <= 1e-8 and np.max(np.abs(zw)) <= 1e-8


def test_estimate_norm_identity_and_svd():
    grid = TorusGrid(8)
    assert estimate_norm("identity", grid) == 1.0
    # dense SVD oracle for the constraint operator at N=8, nu=0
    n = 8
    nu = 0.0
    cols = []
    for k in range(5 * n * n):
        x = np.zeros(5 * n * n)
        x[k] = 1.0
        m = x[: n * n].reshape(n, n)
        w = x[n * n :].reshape(n, n, 4)
        gm, gs = apply_G(m, w, nu)
        cols.append(np.concatenate([gm.ravel(), [gs]]))
    mat = np.column_stack(cols)
    svd_norm = np.linalg.svd(mat, compute_uv=False)[0]
    est = estimate_norm("G", grid, nu)
    assert est == pytest.approx(svd_norm, rel=0.01)
    assert est == pytest.approx(norm_G_exact(grid, nu), rel=0.01)
    assert estimate_norm("B", grid) <= est * (1.0 + 1e-6)


def test_norm_seed_is_deterministic():
    grid = TorusGrid(12)
    a = estimate_norm("G", grid, 0.5, seed=123)
    b = estimate_norm("G", grid, 0.5, seed=123)
    assert a == b

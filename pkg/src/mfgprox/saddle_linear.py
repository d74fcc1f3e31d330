"""Constraint operator, saddle-point linear solves, and operator norms.

The affine constraint couples diffusion, divergence, and total mass:

    G(m, w) = (A m + B w, h^2 sum m),      G*(u, lam) = (A u + h^2 lam, B* u).

Its Gram matrix is block diagonal, diag(M, h^2) with M = A A* + B B*, so
projecting onto {G = (0, 1)} costs one solve with M on the zero-mean
subspace.  M annihilates constants, hence every solve deflates the mean
from the right-hand side and the iterate.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .grid_ops import TorusGrid, apply_A, apply_B, apply_Bstar, laplacian, total_mass

__all__ = [
    "SaddleSolver",
    "apply_G",
    "apply_Gstar",
    "project_V",
    "prox_psistar_unsplit",
    "estimate_norm",
    "norm_G_exact",
]

DENSE_LIMIT = 64  # side length up to which a cached Cholesky factor is cheapest

_factor_cache: "OrderedDict[tuple, tuple]" = OrderedDict()
_FACTOR_CACHE_MAX = 3


def apply_G(m: np.ndarray, w: np.ndarray, nu: float):
    """Constraint map (A m + B w, h^2 sum m)."""
    return apply_A(m, nu) + apply_B(w), total_mass(m)


def apply_Gstar(u: np.ndarray, lam: float, nu: float):
    """Adjoint (A u + h^2 lam * 1, B* u)."""
    h2 = 1.0 / (u.shape[0] * u.shape[0])
    return apply_A(u, nu) + h2 * lam, apply_Bstar(u)


class SaddleSolver:
    """Solver for M x = r, M = A A* + B B*, on zero-mean fields.

    ``method`` is "dense" (cached Cholesky of the deflated matrix),
    "cg" (matrix-free conjugate gradients), or "auto" (dense up to
    DENSE_LIMIT nodes per side).  M is symmetric positive definite on the
    zero-mean subspace for every nu >= 0.
    """

    def __init__(
        self,
        grid: TorusGrid,
        nu: float,
        method: str = "auto",
        cg_tol: float = 1e-10,
        cg_maxit: int = 20000,
    ):
        self.grid = grid
        self.nu = float(nu)
        if method == "auto":
            method = "dense" if grid.n_nodes <= DENSE_LIMIT else "cg"
        if method not in ("dense", "cg"):
            raise ValueError(f"unknown linear solver method '{method}'")
        self.method = method
        self.cg_tol = cg_tol
        self.cg_maxit = cg_maxit
        self._factor = self._get_factor() if method == "dense" else None

    # -- matrix-free application ---------------------------------------
    def apply(self, y: np.ndarray) -> np.ndarray:
        """M y = nu^2 * lap(lap y) - 2 * lap y."""
        ly = laplacian(y)
        out = -2.0 * ly
        if self.nu != 0.0:
            out += self.nu**2 * laplacian(ly)
        return out

    # -- dense factorization, cached per (N, nu) ------------------------
    def _get_factor(self):
        key = (self.grid.n_nodes, self.nu)
        if key in _factor_cache:
            _factor_cache.move_to_end(key)
            return _factor_cache[key]
        n = self.grid.n_nodes
        eye = scipy.sparse.identity(n, format="csr")
        ring = scipy.sparse.diags([1.0, 1.0, 1.0, 1.0], [-1, 1, n - 1, -(n - 1)], shape=(n, n))
        lap1d = (ring - 2.0 * eye) * n * n
        lap2d = scipy.sparse.kron(lap1d, eye) + scipy.sparse.kron(eye, lap1d)
        mat = (-2.0) * lap2d
        if self.nu != 0.0:
            mat = mat + self.nu**2 * (lap2d @ lap2d)
        dense = mat.toarray()
        # rank-one shift of the constant kernel; keeps zero-mean solutions
        dense += (8.0 * n * n) / dense.shape[0]
        factor = scipy.linalg.cho_factor(dense, overwrite_a=True, check_finite=False)
        _factor_cache[key] = factor
        while len(_factor_cache) > _FACTOR_CACHE_MAX:
            _factor_cache.popitem(last=False)
        return factor

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Zero-mean x with M x = rhs (rhs mean subtracted defensively)."""
        shape = rhs.shape
        rhs = rhs - np.mean(rhs)
        if self.method == "dense":
            # Dense form flattens j-fastest (C order); consistent both ways.
            x = scipy.linalg.cho_solve(self._factor, rhs.ravel(), check_finite=False)
            x = x.reshape(shape)
            return x - np.mean(x)
        op = scipy.sparse.linalg.LinearOperator(
            (rhs.size, rhs.size),
            matvec=lambda v: self.apply(v.reshape(shape)).ravel(),
            dtype=float,
        )
        x, info = scipy.sparse.linalg.cg(
            op, rhs.ravel(), rtol=self.cg_tol, atol=0.0, maxiter=self.cg_maxit
        )
        if info > 0:
            res = np.linalg.norm(self.apply(x.reshape(shape)) - rhs)
            raise RuntimeError(
                f"CG did not reach rtol={self.cg_tol} in {self.cg_maxit} iterations "
                f"(residual {res:.3e})"
            )
        x = x.reshape(shape)
        return x - np.mean(x)


def project_V(m: np.ndarray, w: np.ndarray, solver: SaddleSolver):
    """Orthogonal projection onto {G(m, w) = (0, 1)}."""
    nu = solver.nu
    ysol = solver.solve(apply_A(m, nu) + apply_B(w))
    mass_defect = total_mass(m) - 1.0
    return m - apply_A(ysol, nu) - mass_defect, w - apply_Bstar(ysol)


def prox_psistar_unsplit(sig_m: np.ndarray, sig_w: np.ndarray, gamma: float, solver: SaddleSolver):
    """Moreau complement of the projection: sigma - gamma * P_V(sigma/gamma)."""
    pm, pw = project_V(sig_m / gamma, sig_w / gamma, solver)
    return sig_m - gamma * pm, sig_w - gamma * pw


def norm_G_exact(grid: TorusGrid, nu: float) -> float:
    """Spectral norm of G from the Fourier symbol of M = A A* + B B*."""
    n = grid.n_nodes
    k = np.arange(n)
    lam1 = 4.0 * np.sin(np.pi * k / n) ** 2 * n * n
    lam = lam1[:, None] + lam1[None, :]
    top = float(np.max(nu**2 * lam**2 + 2.0 * lam))
    return float(np.sqrt(max(top, grid.h**2)))


def estimate_norm(
    kind: str,
    grid: TorusGrid,
    nu: float = 0.0,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> float:
    """Power-iteration estimate of an operator's spectral norm.

    ``kind`` is one of "G", "B", "A", or "identity".  A fixed seed keeps
    step-size selection reproducible across runs.
    """
    if kind == "identity":
        return 1.0
    rng = np.random.default_rng(seed)
    n = grid.n_nodes
    if kind == "G":
        x_m = rng.standard_normal((n, n))
        x_w = rng.standard_normal((n, n, 4))

        def step(xm, xw):
            gm, gs = apply_G(xm, xw, nu)
            return apply_Gstar(gm, gs, nu)

        val = 0.0
        for _ in range(max_iter):
            ym, yw = step(x_m, x_w)
            new = np.sqrt(np.sum(ym * ym) + np.sum(yw * yw))
            if new == 0.0:
                return 0.0
            x_m, x_w = ym / new, yw / new
            if abs(new - val) <= tol * new:
                val = new
                break
            val = new
        return float(np.sqrt(val))
    if kind == "B":
        op = lambda x: apply_B(apply_Bstar(x))
    elif kind == "A":
        op = lambda x: apply_A(apply_A(x, nu), nu)
    else:
        raise ValueError(f"unknown operator kind '{kind}'")
    x = rng.standard_normal((n, n))
    val = 0.0
    for _ in range(max_iter):
        y = op(x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        x = y / new
        if abs(new - val) <= tol * new:
            val = new
            break
        val = new
    return float(np.sqrt(val))

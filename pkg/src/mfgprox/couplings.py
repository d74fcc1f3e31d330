"""Local coupling costs F(x, m) and their conjugate data.

A coupling bundles, per grid node, the convex cost F (extended by +inf to
m < 0), its derivative f = F', the scalar resolvent z solving
z + gamma*f(z) = m, and (when available) the Fenchel conjugate F* and its
derivative, which drive the dual/multiplier path of the solvers.  Node
data (reference densities, potentials) are stored as arrays broadcastable
against whatever field shape the caller passes, so the same object works
for scalar probing and for whole-grid sweeps.
"""

from __future__ import annotations

import numpy as np

from .grid_ops import TorusGrid
from .numerics import grow_upper_bracket, solve_monotone_root

__all__ = [
    "Coupling",
    "ZeroCoupling",
    "LogCoupling",
    "QuadraticCoupling",
    "CubicCoupling",
    "make_coupling",
]


class Coupling:
    """Base class; subclasses fill in the nodewise callables.

    ``f0_finite`` says whether f(x, 0+) is a real number; when it is not
    (entropy-type costs) the proximity operators never return a zero
    density.  ``has_conj`` advertises F*, needed for dual objectives and
    the multiplier-side solver path.
    """

    f0_finite: bool = True
    has_conj: bool = False
    has_conj_deriv: bool = False
    name: str = "coupling"

    def F(self, m):
        raise NotImplementedError

    def f(self, m):
        """Derivative of F in m, defined for m > 0 (and m = 0 when finite)."""
        raise NotImplementedError

    def fpp(self, m):
        """Second derivative of F where defined; None disables Newton steps."""
        return None

    def f0(self):
        """f(x, 0) per node; only meaningful when f0_finite."""
        raise NotImplementedError

    def conj(self, eta):
        """F*(x, eta) per node."""
        raise NotImplementedError(f"{self.name} has no conjugate data")

    def conj_deriv(self, eta):
        """(F*)'(x, eta) = argmax of eta*m - F(x, m), clipped at 0."""
        raise NotImplementedError(f"{self.name} has no conjugate derivative")

    def prox_f(self, m, gamma: float):
        """Unique z >= 0 with z + gamma*f(z) = m (0 when m <= gamma*f(0))."""
        m = np.asarray(m, dtype=float)
        if self.f0_finite:
            shape = np.broadcast_shapes(m.shape, np.shape(self.f0()))
            lo = np.zeros(shape)
            g = lambda z: z + gamma * self.f(z) - m
            active = np.broadcast_to(m > gamma * self.f0(), shape).copy()
            hi = grow_upper_bracket(g, lo, np.maximum(np.abs(m), 1.0), active=active)
            return solve_monotone_root(g, lo, hi, active=active)
        # f(0+) = -inf: the resolvent is strictly positive; shrink a lower
        # bracket geometrically until the residual goes negative.
        shape = np.broadcast_shapes(m.shape, np.shape(self.f(np.ones(1))))
        g = lambda z: z + gamma * self.f(z) - m
        hi = grow_upper_bracket(g, np.full(shape, 1e-8), np.maximum(np.abs(m), 1.0))
        lo = np.full(shape, 1.0)
        for _ in range(400):
            with np.errstate(all="ignore"):
                need = ~(g(lo) < 0.0)
            if not need.any():
                break
            lo = np.where(need, lo / 16.0, lo)
        return solve_monotone_root(g, lo, hi)


class ZeroCoupling(Coupling):
    """F == 0 on m >= 0; handy for probing the kinetic term alone."""

    name = "zero"
    f0_finite = True
    has_conj = True

    def F(self, m):
        m = np.asarray(m, dtype=float)
        return np.where(m >= 0.0, 0.0, np.inf)

    def f(self, m):
        return np.zeros_like(np.asarray(m, dtype=float))

    def fpp(self, m):
        return np.zeros_like(np.asarray(m, dtype=float))

    def f0(self):
        return 0.0

    def conj(self, eta):
        eta = np.asarray(eta, dtype=float)
        return np.where(eta <= 0.0, 0.0, np.inf)

    def prox_f(self, m, gamma: float):
        return np.maximum(np.asarray(m, dtype=float), 0.0)


class LogCoupling(Coupling):
    """Entropy cost F = m log m - m - m*S(x) with f = log m - S(x).

    The default potential is S(x, y) = sin(2 pi x) + sin(2 pi y).
    f(0+) = -inf, so densities stay strictly positive.
    """

    name = "log"
    f0_finite = False
    has_conj = True
    has_conj_deriv = True

    def __init__(self, potential=0.0):
        self.potential = np.asarray(potential, dtype=float)

    @classmethod
    def for_grid(cls, grid: TorusGrid) -> "LogCoupling":
        x, y = grid.coords()
        return cls(np.sin(2 * np.pi * x) + np.sin(2 * np.pi * y))

    def F(self, m):
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = np.where(m > 0.0, m * np.log(np.where(m > 0.0, m, 1.0)) - m, 0.0)
        return np.where(m >= 0.0, ent - m * self.potential, np.inf)

    def f(self, m):
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(m) - self.potential

    def fpp(self, m):
        return 1.0 / np.asarray(m, dtype=float)

    def conj(self, eta):
        return np.exp(np.asarray(eta, dtype=float) + self.potential)

    def conj_deriv(self, eta):
        return np.exp(np.asarray(eta, dtype=float) + self.potential)

    def prox_f(self, m, gamma: float):
        # z + gamma*log z = m + gamma*S, solved with a Newton iteration on
        # the bracket [exp((a - hi)/gamma), hi].
        a = np.asarray(m, dtype=float) + gamma * self.potential
        g = lambda z: z + gamma * np.log(z) - a
        dg = lambda z: 1.0 + gamma / z
        hi = grow_upper_bracket(g, np.maximum(a, 1.0), np.ones(np.shape(a + 0.0)))
        lo = np.maximum(np.exp((a - hi) / gamma), 1e-300)
        return solve_monotone_root(g, lo, hi, dfun=dg)


class QuadraticCoupling(Coupling):
    """Tracking cost F = r*(m - mbar(x))^2 / 2 around a reference density."""

    name = "quadratic"
    f0_finite = True
    has_conj = True
    has_conj_deriv = True

    def __init__(self, m_bar, r: float = 1.0):
        self.m_bar = np.asarray(m_bar, dtype=float)
        if r <= 0:
            raise ValueError("quadratic coupling needs r > 0")
        self.r = float(r)

    @classmethod
    def gaussian(cls, grid: TorusGrid, sigma: float = 0.1, r: float = 1.0) -> "QuadraticCoupling":
        """Reference bump exp(-((x-1/2)^2+(y-1/2)^2)/(2 sigma^2)) scaled to unit mass."""
        x, y = grid.coords()
        bump = np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / (2.0 * sigma**2))
        bump /= grid.h**2 * np.sum(bump)
        return cls(bump, r=r)

    def F(self, m):
        m = np.asarray(m, dtype=float)
        return np.where(m >= 0.0, 0.5 * self.r * (m - self.m_bar) ** 2, np.inf)

    def f(self, m):
        return self.r * (np.asarray(m, dtype=float) - self.m_bar)

    def fpp(self, m):
        return np.full_like(np.asarray(m, dtype=float), self.r)

    def f0(self):
        return -self.r * self.m_bar

    def conj(self, eta):
        eta = np.asarray(eta, dtype=float)
        lo = -self.r * self.m_bar
        return np.where(
            eta >= lo,
            eta * eta / (2.0 * self.r) + eta * self.m_bar,
            -0.5 * self.r * self.m_bar**2,
        )

    def conj_deriv(self, eta):
        return np.maximum(self.m_bar + np.asarray(eta, dtype=float) / self.r, 0.0)

    def prox_f(self, m, gamma: float):
        m = np.asarray(m, dtype=float)
        return np.maximum((m + gamma * self.r * self.m_bar) / (1.0 + gamma * self.r), 0.0)


class CubicCoupling(Coupling):
    """Congestion cost F = m^3/3 - m*Hbar(x) with f = m^2 - Hbar(x).

    The default potential is Hbar(x, y) = sin(2 pi y) + sin(2 pi x) + cos(4 pi x).
    """

    name = "cubic"
    f0_finite = True
    has_conj = True
    has_conj_deriv = True

    def __init__(self, h_bar=0.0):
        self.h_bar = np.asarray(h_bar, dtype=float)

    @classmethod
    def for_grid(cls, grid: TorusGrid) -> "CubicCoupling":
        x, y = grid.coords()
        return cls(np.sin(2 * np.pi * y) + np.sin(2 * np.pi * x) + np.cos(4 * np.pi * x))

    def F(self, m):
        m = np.asarray(m, dtype=float)
        return np.where(m >= 0.0, m**3 / 3.0 - m * self.h_bar, np.inf)

    def f(self, m):
        m = np.asarray(m, dtype=float)
        return m * m - self.h_bar

    def fpp(self, m):
        return 2.0 * np.asarray(m, dtype=float)

    def f0(self):
        return -self.h_bar

    def conj(self, eta):
        s = np.maximum(np.asarray(eta, dtype=float) + self.h_bar, 0.0)
        return (2.0 / 3.0) * s**1.5

    def conj_deriv(self, eta):
        return np.sqrt(np.maximum(np.asarray(eta, dtype=float) + self.h_bar, 0.0))

    def prox_f(self, m, gamma: float):
        # gamma*z^2 + z = m + gamma*Hbar, positive root or 0.
        m = np.asarray(m, dtype=float)
        rhs = m + gamma * self.h_bar
        disc = np.maximum(1.0 + 4.0 * gamma * rhs, 1.0)
        z = (np.sqrt(disc) - 1.0) / (2.0 * gamma)
        return np.where(rhs > 0.0, z, 0.0)


def make_coupling(name: str, grid: TorusGrid, **params) -> Coupling:
    """Build a named coupling with its standard node data on a grid."""
    name = name.lower()
    if name == "log":
        return LogCoupling.for_grid(grid)
    if name == "quadratic":
        return QuadraticCoupling.gaussian(
            grid, sigma=params.get("sigma", 0.1), r=params.get("r", 1.0)
        )
    if name == "cubic":
        return CubicCoupling.for_grid(grid)
    if name == "zero":
        return ZeroCoupling()
    raise ValueError(f"unknown coupling '{name}' (expected log, quadratic, cubic or zero)")

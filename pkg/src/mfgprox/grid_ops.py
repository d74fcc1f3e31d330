"""Periodic grid container and the discrete operators on the unit 2-torus.

Scalar fields are (N, N) float arrays indexed [i, j] with node coordinates
x_ij = (i*h, j*h), h = 1/N.  Flux fields carry four upwind components per
node, stored as (N, N, 4) arrays ordered to match the four slots of the
one-sided difference stencil

    D_h y = (D1 y)_{i,j}, (D1 y)_{i-1,j}, (D2 y)_{i,j}, (D2 y)_{i,j-1}.

Admissible fluxes live in the cone K = R+ x R- x R+ x R- nodewise.  All
index arithmetic wraps modulo N (np.roll); reductions use numpy's
deterministic pairwise summation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TorusGrid",
    "d1",
    "d2",
    "dh_stencil",
    "hat_dh",
    "laplacian",
    "apply_A",
    "apply_B",
    "apply_Bstar",
    "transport",
    "flux_from_value",
    "project_K",
    "project_mass",
    "in_cone",
    "total_mass",
    "save_gf1",
    "load_gf1",
]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform N x N periodic grid with step h = 1/N (N >= 3)."""

    n_nodes: int

    def __post_init__(self) -> None:
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise ValueError(f"grid needs an integer N >= 3 nodes per side, got {self.n_nodes}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_nodes

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_nodes, self.n_nodes)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays (X, Y), each (N, N), X[i,j] = i*h."""
        t = np.arange(self.n_nodes) * self.h
        return np.meshgrid(t, t, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def ones(self) -> np.ndarray:
        return np.ones(self.shape)

    def zeros_flux(self) -> np.ndarray:
        return np.zeros(self.shape + (4,))


def _side(y: np.ndarray) -> int:
    n = y.shape[0]
    if y.shape[:2] != (n, n):
        raise ValueError(f"expected a square field, got shape {y.shape}")
    return n


def d1(y: np.ndarray) -> np.ndarray:
    """Forward difference in the first index: (y[i+1,j] - y[i,j]) / h."""
    return (np.roll(y, -1, axis=0) - y) * _side(y)


def d2(y: np.ndarray) -> np.ndarray:
    """Forward difference in the second index: (y[i,j+1] - y[i,j]) / h."""
    return (np.roll(y, -1, axis=1) - y) * _side(y)


def dh_stencil(y: np.ndarray) -> np.ndarray:
    """Four-slot one-sided difference stencil of a scalar field."""
    a = d1(y)
    c = d2(y)
    return np.stack([a, np.roll(a, 1, axis=0), c, np.roll(c, 1, axis=1)], axis=-1)


def hat_dh(y: np.ndarray) -> np.ndarray:
    """Upwind (Godunov) gradient; identical to project_K(-dh_stencil(y))."""
    a = d1(y)
    c = d2(y)
    return np.stack(
        [
            np.maximum(-a, 0.0),
            -np.maximum(np.roll(a, 1, axis=0), 0.0),
            np.maximum(-c, 0.0),
            -np.maximum(np.roll(c, 1, axis=1), 0.0),
        ],
        axis=-1,
    )


def laplacian(y: np.ndarray) -> np.ndarray:
    """Five-point periodic Laplacian -(4y - sum of neighbours)/h^2."""
    n = _side(y)
    return (
        np.roll(y, -1, axis=0)
        + np.roll(y, 1, axis=0)
        + np.roll(y, -1, axis=1)
        + np.roll(y, 1, axis=1)
        - 4.0 * y
    ) * (n * n)


def apply_A(m: np.ndarray, nu: float) -> np.ndarray:
    """Diffusion block A m = -nu * laplacian(m); self-adjoint, zero-sum range."""
    if nu < 0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    if nu == 0.0:
        return np.zeros_like(m)
    return -nu * laplacian(m)


def apply_B(w: np.ndarray) -> np.ndarray:
    """Discrete divergence of a four-component flux field."""
    return (
        np.roll(d1(w[..., 0]), 1, axis=0)
        + d1(w[..., 1])
        + np.roll(d2(w[..., 2]), 1, axis=1)
        + d2(w[..., 3])
    )


def apply_Bstar(y: np.ndarray) -> np.ndarray:
    """Adjoint of the divergence: B* y = -dh_stencil(y)."""
    return -dh_stencil(y)


def _upwind_factor(u: np.ndarray, m: np.ndarray, q: float) -> tuple[np.ndarray, np.ndarray]:
    """m * |hat_dh(u)|^((2-q)/(q-1)) with the zero-gradient convention.

    Wherever the upwind gradient vanishes the factor is set to 0 for every
    q > 1: the vector it multiplies vanishes there as well, and for q > 2
    the bare power would be singular.
    """
    if q <= 1:
        raise ValueError(f"exponent q must exceed 1, got {q}")
    hat = hat_dh(u)
    norm = np.sqrt(np.sum(hat * hat, axis=-1))
    expo = (2.0 - q) / (q - 1.0)
    with np.errstate(divide="ignore"):
        fac = np.where(norm > 0.0, m * np.where(norm > 0.0, norm, 1.0) ** expo, 0.0)
    return fac, hat


def transport(u: np.ndarray, m: np.ndarray, q: float) -> np.ndarray:
    """Upwind transport term of the discrete continuity equation.

    Eight-term Godunov flux balance; satisfies
    apply_A(m, nu) + apply_B(flux_from_value(u, m, q)) ==
    -nu*laplacian(m) - transport(u, m, q) up to roundoff.
    """
    fac, hat = _upwind_factor(u, np.broadcast_to(m, u.shape), q)
    g1 = fac * hat[..., 0]
    g2 = -fac * hat[..., 1]
    g3 = fac * hat[..., 2]
    g4 = -fac * hat[..., 3]
    h_t = (
        -g1
        + np.roll(g1, 1, axis=0)
        + np.roll(g2, -1, axis=0)
        - g2
        - g3
        + np.roll(g3, 1, axis=1)
        + np.roll(g4, -1, axis=1)
        - g4
    )
    return h_t * _side(u)


def flux_from_value(u: np.ndarray, m: np.ndarray, q: float) -> np.ndarray:
    """Feedback flux m * |hat_dh(u)|^((2-q)/(q-1)) * hat_dh(u); requires m >= 0."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 0.0):
        raise ValueError("flux_from_value needs a nonnegative density")
    fac, hat = _upwind_factor(u, np.broadcast_to(m, u.shape), q)
    return fac[..., None] * hat


def project_K(w: np.ndarray) -> np.ndarray:
    """Componentwise projection onto the cone K = R+ x R- x R+ x R-."""
    return np.stack(
        [
            np.maximum(w[..., 0], 0.0),
            np.minimum(w[..., 1], 0.0),
            np.maximum(w[..., 2], 0.0),
            np.minimum(w[..., 3], 0.0),
        ],
        axis=-1,
    )


def project_Kpolar(w: np.ndarray) -> np.ndarray:
    """Projection onto the polar cone of K (the componentwise complement)."""
    return w - project_K(w)


def in_cone(w: np.ndarray) -> bool:
    """True if every node's flux lies in K."""
    return bool(
        np.all(w[..., 0] >= 0.0)
        and np.all(w[..., 1] <= 0.0)
        and np.all(w[..., 2] >= 0.0)
        and np.all(w[..., 3] <= 0.0)
    )


def total_mass(m: np.ndarray) -> float:
    """h^2 * sum of the field (the discrete integral over the torus)."""
    n = _side(m)
    return float(np.sum(m) / (n * n))


def project_mass(m: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto {h^2 sum(m) = 1}; exact since h^2 N^2 = 1."""
    return m + (1.0 - total_mass(m))


# ---------------------------------------------------------------------------
# GF1 text dump format: header "GF1 <N> <components>", then for each
# component N lines of N values (index i ascending within a line, j
# ascending across lines), 17 significant digits for a bit-exact round trip.
# ---------------------------------------------------------------------------


def save_gf1(path, field: np.ndarray) -> None:
    field = np.asarray(field, dtype=float)
    n = field.shape[0]
    if field.ndim == 2:
        comps = [field]
    elif field.ndim == 3 and field.shape[2] == 4:
        comps = [field[..., k] for k in range(4)]
    else:
        raise ValueError(f"expected an (N,N) or (N,N,4) field, got shape {field.shape}")
    lines = [f"GF1 {n} {len(comps)}"]
    for comp in comps:
        for j in range(n):
            lines.append(" ".join(f"{comp[i, j]:.17g}" for i in range(n)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gf1(path) -> np.ndarray:
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3 or tokens[0] != "GF1":
        raise ValueError(f"{path}: not a GF1 field dump")
    n, ncomp = int(tokens[1]), int(tokens[2])
    if ncomp not in (1, 4):
        raise ValueError(f"{path}: component count must be 1 or 4, got {ncomp}")
    vals = np.array([float(t) for t in tokens[3:]])
    if vals.size != ncomp * n * n:
        raise ValueError(f"{path}: expected {ncomp * n * n} values, found {vals.size}")
    comps = []
    for k in range(ncomp):
        block = vals[k * n * n : (k + 1) * n * n].reshape(n, n)  # rows are j, columns i
        comps.append(block.T)
    if ncomp == 1:
        return comps[0]
    return np.stack(comps, axis=-1)

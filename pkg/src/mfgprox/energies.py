"""Kinetic integrand, objective evaluation, and exact proximity operators.

The per-node convex cost is

    phi(p, v) = F(x, p) + bhat(p, v) [+ indicator of p <= d],

where bhat(p, v) = |v|^q / (q p^(q-1)) on {p > 0, v in K}, 0 at the
origin, +inf elsewhere.  Its prox reduces to one scalar monotone equation
per node, Q_{m,w}(p, delta) = 0, solved either in p (interior branch) or
in the bound multiplier delta (density-cap branch).  The solves are
vectorized over all nodes; the paper-facing scalar entry points wrap the
same code on one-element arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .couplings import Coupling
from .grid_ops import project_K
from .numerics import grow_upper_bracket, solve_monotone_root

__all__ = [
    "ProxSpec",
    "bhat",
    "bhat_field",
    "in_conjugate_set",
    "q_eval",
    "prox_phi",
    "prox_phi_field",
    "prox_gamma_F_scalar",
    "prox_psi_admm",
    "prox_psi_admm_field",
    "primal_objective",
]

_BASE_FLOOR = 1e-300


@dataclass
class ProxSpec:
    """Per-node prox parameters: exponent q > 1, step gamma > 0, optional cap."""

    q: float
    gamma: float
    coupling: Coupling
    dbound: Optional[Union[float, np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.q <= 1.0:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.dbound is not None and np.any(np.asarray(self.dbound) <= 0.0):
            raise ValueError("density bound must be positive where finite")

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)


def bhat(m: float, w, q: float) -> float:
    """Kinetic integrand |w|^q/(q m^(q-1)) on {m>0, w in K}; extended reals."""
    w = np.asarray(w, dtype=float)
    if m > 0.0:
        if np.any(w[0::2] < 0.0) or np.any(w[1::2] > 0.0):
            return np.inf
        return float(np.sum(w * w) ** (q / 2.0) / (q * m ** (q - 1.0)))
    if m == 0.0 and not w.any():
        return 0.0
    return np.inf


def bhat_field(m: np.ndarray, w: np.ndarray, q: float) -> np.ndarray:
    """Vectorized bhat over nodes; returns +inf entries where undefined."""
    m = np.asarray(m, dtype=float)
    w = np.asarray(w, dtype=float)
    norm = np.sqrt(np.sum(w * w, axis=-1))
    admissible = (
        (w[..., 0] >= 0.0) & (w[..., 1] <= 0.0) & (w[..., 2] >= 0.0) & (w[..., 3] <= 0.0)
    )
    with np.errstate(all="ignore"):
        pos = norm**q / (q * np.where(m > 0.0, m, 1.0) ** (q - 1.0))
    out = np.where((m > 0.0) & admissible, pos, np.inf)
    return np.where((m == 0.0) & (norm == 0.0), 0.0, out)


def in_conjugate_set(alpha: float, beta, q: float) -> bool:
    """Membership test alpha + |P_K beta|^q' / q' <= 0 for the conjugate domain."""
    qp = q / (q - 1.0)
    pk = np.sqrt(np.sum(project_K(np.asarray(beta, dtype=float)) ** 2))
    return bool(alpha + pk**qp / qp <= 0.0)


def _q_value(p, base, pk, q: float, gamma: float):
    """Q(p, base) = base*(p + C*base^e)^q - (gamma/q')*|P_K w|^q, with the
    base <= 0 limit -(gamma/q')*pk^q (exact for base == 0 at every q)."""
    qp = q / (q - 1.0)
    e = 1.0 - 2.0 / q
    c = gamma ** (2.0 / q) * qp**e
    rhs = (gamma / qp) * pk**q
    with np.errstate(all="ignore"):
        safe = np.where(base > _BASE_FLOOR, base, 1.0)
        val = base * (p + c * safe**e) ** q - rhs
    return np.where(base > _BASE_FLOOR, val, -rhs)


def _q_slope(p, base, dp, dbase, pk, q: float, gamma: float):
    """Directional derivative of Q along (dp, dbase); may return inf/nan,
    which the safeguarded solver treats as 'use bisection'."""
    qp = q / (q - 1.0)
    e = 1.0 - 2.0 / q
    c = gamma ** (2.0 / q) * qp**e
    with np.errstate(all="ignore"):
        safe = np.where(base > _BASE_FLOOR, base, np.nan)
        inner = p + c * safe**e
        d_inner = dp + c * e * safe ** (e - 1.0) * dbase
        return dbase * inner**q + base * q * inner ** (q - 1.0) * d_inner


def q_eval(p: float, delta: float, m: float, w, spec: ProxSpec) -> float:
    """Scalar Q_{m,w}(p, delta); errors outside the admissible set."""
    if p < 0.0:
        raise ValueError(f"p must be nonnegative, got {p}")
    fp = float(np.asarray(spec.coupling.f(np.asarray([p], dtype=float)))[0])
    base = p + spec.gamma * fp - m + delta
    if base < 0.0:
        raise ValueError(f"(p, delta) outside the admissible set: base {base} < 0")
    pk = float(np.sqrt(np.sum(project_K(np.asarray(w, dtype=float)) ** 2)))
    return float(_q_value(p, base, pk, spec.q, spec.gamma))


def prox_gamma_F_scalar(m: float, gamma: float, coupling: Coupling) -> float:
    """Resolvent of the coupling alone: z >= 0 with z + gamma*F'(z) = m."""
    return float(np.asarray(coupling.prox_f(np.asarray([m], dtype=float), gamma))[0])


def prox_phi_field(m: np.ndarray, w: np.ndarray, spec: ProxSpec):
    """Nodewise prox of gamma*phi at (m, w); returns (p, v).

    Outputs satisfy 0 <= p <= d, v = t * P_K w with t in [0, 1], and the
    defining inclusion (m - p, w - v) in gamma * subdiff phi(p, v) to the
    root solver's tolerance.
    """
    m = np.asarray(m, dtype=float)
    w = np.asarray(w, dtype=float)
    q, gamma, cpl = spec.q, spec.gamma, spec.coupling
    pkw = project_K(w)
    pk_data = np.sqrt(np.sum(pkw * pkw, axis=-1))
    shape = np.broadcast_shapes(m.shape, pk_data.shape, np.shape(cpl.f(np.ones(1) * 0 + 1.0)))
    mm = np.broadcast_to(m, shape).astype(float)
    pk = np.broadcast_to(pk_data, shape).astype(float)

    if spec.dbound is None:
        d = np.full(shape, np.inf)
    else:
        d = np.broadcast_to(np.asarray(spec.dbound, dtype=float), shape).astype(float)
    capped = np.isfinite(d)

    fpp_probe = cpl.fpp(np.ones(shape))
    have_newton = fpp_probe is not None

    # Branch selection -------------------------------------------------
    if cpl.f0_finite:
        f0 = np.broadcast_to(np.asarray(cpl.f0(), dtype=float), shape)
        at_zero = mm <= gamma * f0
        q00 = _q_value(0.0, gamma * f0 - mm, pk, q, gamma)
        zero_mask = at_zero & (q00 >= 0.0)
    else:
        zero_mask = np.zeros(shape, dtype=bool)

    d_safe = np.where(capped, d, 1.0)
    fd = np.asarray(cpl.f(d_safe), dtype=float)
    base_d0 = d_safe + gamma * fd - mm
    qd0 = _q_value(d_safe, base_d0, pk, q, gamma)
    cap_mask = capped & ~zero_mask & ((base_d0 <= 0.0) | (qd0 <= 0.0))
    int_mask = ~zero_mask & ~cap_mask

    # Interior branch: root of Q(p, 0) on [prox_{gamma F}(m), hi] -------
    p_lo = np.asarray(cpl.prox_f(mm, gamma), dtype=float)

    def q_of_p(p):
        base = p + gamma * np.asarray(cpl.f(np.maximum(p, _BASE_FLOOR)), dtype=float) - mm
        return _q_value(p, base, pk, q, gamma)

    dq_of_p = None
    if have_newton:

        def dq_of_p(p):
            pc = np.maximum(p, _BASE_FLOOR)
            base = pc + gamma * np.asarray(cpl.f(pc), dtype=float) - mm
            dbase = 1.0 + gamma * np.asarray(cpl.fpp(pc), dtype=float)
            return _q_slope(pc, base, 1.0, dbase, pk, q, gamma)

    hi = np.where(capped, d_safe, p_lo)
    need_growth = int_mask & ~capped
    if need_growth.any():
        hi = np.where(
            need_growth,
            grow_upper_bracket(q_of_p, p_lo, np.maximum(np.abs(mm) + 1.0, 1.0), active=need_growth),
            hi,
        )
    p_star = solve_monotone_root(q_of_p, p_lo, hi, dfun=dq_of_p, active=int_mask)

    # Cap branch: p = d, root of Q(d, delta) on [max(0, -base_d0), hi] --
    delta = np.zeros(shape)
    if cap_mask.any():
        d_lo = np.maximum(0.0, -base_d0)

        def q_of_delta(dl):
            return _q_value(d_safe, base_d0 + dl, pk, q, gamma)

        def dq_of_delta(dl):
            return _q_slope(d_safe, base_d0 + dl, 0.0, 1.0, pk, q, gamma)

        d_hi = grow_upper_bracket(
            q_of_delta, d_lo, np.maximum(np.abs(mm) + 1.0, 1.0), active=cap_mask
        )
        delta_star = solve_monotone_root(q_of_delta, d_lo, d_hi, dfun=dq_of_delta, active=cap_mask)
        delta = np.where(cap_mask, delta_star, 0.0)

    p = np.where(zero_mask, 0.0, np.where(cap_mask, d_safe, p_star))

    # Flux part v = t * P_K w per the optimality system ------------------
    qp = q / (q - 1.0)
    e = 1.0 - 2.0 / q
    c = gamma ** (2.0 / q) * qp**e
    with np.errstate(all="ignore"):
        pc = np.maximum(p, _BASE_FLOOR)
        base = pc + gamma * np.asarray(cpl.f(pc), dtype=float) - mm + delta
        t = p / (p + c * np.where(base > 0.0, base, 1.0) ** e)
    t = np.where(zero_mask | (pk == 0.0) | (p == 0.0), 0.0, t)
    v = t[..., None] * np.broadcast_to(pkw, shape + (4,))
    return p, v


def prox_phi(m: float, w, spec: ProxSpec):
    """Scalar prox of gamma*phi; returns (p, v) with v a length-4 vector."""
    p, v = prox_phi_field(np.asarray([m], dtype=float), np.asarray(w, dtype=float).reshape(1, 4), spec)
    return float(p[0]), v[0]


def prox_psi_admm_field(a0, b0, c0, gamma: float, coupling: Coupling):
    """Nodewise prox of psi/gamma on the multiplier-side triple (a, b, c).

    psi(a, b, c) = F*(x, a + |P_K b|^2/2 + c) per node; requires the
    coupling's conjugate derivative.  Off the active branch the input is
    returned unchanged.
    """
    if not coupling.has_conj_deriv:
        raise ValueError(f"coupling '{coupling.name}' provides no conjugate derivative")
    a0 = np.asarray(a0, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    pkb = project_K(b0)
    pk2 = np.sum(pkb * pkb, axis=-1)
    shape = np.broadcast_shapes(a0.shape, c0.shape, pk2.shape)
    arg0 = a0 + 0.5 * pk2 + c0
    if coupling.f0_finite:
        active = arg0 > np.broadcast_to(np.asarray(coupling.f0(), dtype=float), shape)
    else:
        active = np.ones(shape, dtype=bool)

    def resid(s):
        arg = a0 + c0 - 2.0 * s + pk2 / (2.0 * (1.0 + s) ** 2)
        return gamma * s - np.asarray(coupling.conj_deriv(arg), dtype=float)

    lo = np.zeros(shape)
    if active.any():
        inc = np.maximum(np.asarray(coupling.conj_deriv(arg0), dtype=float) / gamma, 1.0)
        hi = grow_upper_bracket(resid, lo, inc, active=active)
        s = solve_monotone_root(resid, lo, hi, active=active)
    else:
        s = lo
    s = np.where(active, s, 0.0)
    a = a0 - s
    c = c0 - s
    b = pkb / (1.0 + s)[..., None] + (b0 - pkb)
    return a, b, c


def prox_psi_admm(a0: float, b0, c0: float, gamma: float, coupling: Coupling):
    """Scalar wrapper around prox_psi_admm_field."""
    a, b, c = prox_psi_admm_field(
        np.asarray([a0], dtype=float),
        np.asarray(b0, dtype=float).reshape(1, 4),
        np.asarray([c0], dtype=float),
        gamma,
        coupling,
    )
    return float(a[0]), b[0], float(c[0])


def primal_objective(m: np.ndarray, w: np.ndarray, q: float, coupling: Coupling, dbound=None) -> float:
    """sum of bhat + F over nodes, +inf on any constraint violation."""
    m = np.asarray(m, dtype=float)
    kin = bhat_field(m, w, q)
    if np.any(np.isinf(kin)):
        return np.inf
    if np.any(m < 0.0):
        return np.inf
    if dbound is not None and np.any(m > np.asarray(dbound, dtype=float)):
        return np.inf
    cost = np.asarray(coupling.F(m), dtype=float)
    if np.any(np.isinf(cost)):
        return np.inf
    return float(np.sum(kin) + np.sum(cost))

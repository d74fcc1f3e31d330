"""Vectorized scalar root-finding used by the proximity operators.

All nonlinear equations in this package are of the form g(x) = 0 with g
continuous and strictly increasing on a bracket [lo, hi] such that
g(lo) <= 0 <= g(hi).  They are solved lane-by-lane over numpy arrays with
a safeguarded Newton iteration that falls back to bisection whenever the
Newton proposal leaves the current bracket (or the derivative is
unusable).  Lanes where ``active`` is False are left untouched at ``lo``.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

__all__ = ["solve_monotone_root", "grow_upper_bracket", "RootFindingError"]


class RootFindingError(RuntimeError):
    """A bracketed scalar solve did not converge within the iteration cap."""


def solve_monotone_root(
    fun: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    dfun: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    active: Optional[np.ndarray] = None,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> np.ndarray:
    """Solve fun(x) = 0 on [lo, hi] for every active lane.

    ``fun`` (and ``dfun`` when given) must accept and return arrays of the
    bracket's shape.  Convergence is declared when the bracket width drops
    below ``tol * (1 + |x|)``.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    if active is None:
        active = np.ones(lo.shape, dtype=bool)
    else:
        active = np.asarray(active, dtype=bool)
        hi = np.where(active, hi, lo)

    x = np.where(active, 0.5 * (lo + hi), lo)
    for _ in range(max_iter):
        width = hi - lo
        open_ = active & (width > tol * (1.0 + np.abs(x)))
        if not open_.any():
            return np.where(active, 0.5 * (lo + hi), lo)
        with np.errstate(all="ignore"):
            fx = np.asarray(fun(x))
            neg = fx < 0.0
            lo = np.where(open_ & neg, x, lo)
            hi = np.where(open_ & ~neg, x, hi)
            exact = open_ & (fx == 0.0)
            lo = np.where(exact, x, lo)
            hi = np.where(exact, x, hi)
            mid = 0.5 * (lo + hi)
            if dfun is not None:
                dfx = np.asarray(dfun(x))
                step = x - fx / dfx
                ok = np.isfinite(step) & (step > lo) & (step < hi)
                x = np.where(ok, step, mid)
            else:
                x = mid
        x = np.where(open_, x, lo)
    bad = active & ((hi - lo) > tol * (1.0 + np.abs(x)))
    if bad.any():
        raise RootFindingError(
            f"bracketed solve stalled on {int(bad.sum())} lanes, "
            f"max residual width {float(np.max((hi - lo)[bad])):.3e}"
        )
    return np.where(active, 0.5 * (lo + hi), lo)


def grow_upper_bracket(
    fun: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    increment: np.ndarray,
    active: Optional[np.ndarray] = None,
    max_doublings: int = 200,
) -> np.ndarray:
    """Return hi >= lo with fun(hi) > 0 on active lanes, doubling the offset.

    Assumes fun is increasing and eventually positive (so the loop
    terminates for well-posed inputs).
    """
    lo = np.asarray(lo, dtype=float)
    if active is None:
        active = np.ones(lo.shape, dtype=bool)
    inc = np.broadcast_to(np.asarray(increment, dtype=float), lo.shape).copy()
    inc = np.where(inc > 0, inc, 1.0)
    hi = lo + inc
    for _ in range(max_doublings):
        with np.errstate(all="ignore"):
            need = active & ~(np.asarray(fun(hi)) > 0.0)
        if not need.any():
            return hi
        inc = np.where(need, 2.0 * inc, inc)
        hi = np.where(need, lo + inc, hi)
    raise RootFindingError("could not bracket a sign change while growing the upper bound")

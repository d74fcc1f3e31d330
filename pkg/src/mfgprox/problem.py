"""Problem container tying grid, viscosity, exponent, coupling, and bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .couplings import Coupling
from .grid_ops import TorusGrid

__all__ = ["ProblemSpec"]


@dataclass
class ProblemSpec:
    """A discrete stationary mean-field-game instance on the unit torus.

    ``dbound`` is an optional nodewise upper bound on the density (None
    means unconstrained).  ``meta`` carries descriptive key/value pairs
    echoed into summaries so a run can be reconstructed from its output.
    """

    grid: TorusGrid
    nu: float
    q: float
    coupling: Coupling
    dbound: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.nu < 0:
            raise ValueError(f"viscosity must be nonnegative, got {self.nu}")
        if self.q <= 1:
            raise ValueError(f"exponent q must exceed 1, got {self.q}")
        if self.dbound is not None:
            self.dbound = np.broadcast_to(
                np.asarray(self.dbound, dtype=float), self.grid.shape
            ).copy()
            if np.any(self.dbound <= 0):
                raise ValueError("density bound must be positive")
            if self.grid.h**2 * np.sum(self.dbound) <= 1.0:
                raise ValueError("density bound leaves no feasible mass-one field")

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

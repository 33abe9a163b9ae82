"""Nonnegative factor models on open chains and closed cycles.

A chain over sites 1..n carries n-1 pairwise factors F_l(x_l, x_{l+1});
a cycle adds the wrap factor F_n(x_n, x_1).  Factors are plain ndarrays;
``weight`` is the quadrature weight attached to every summed-over state
(grid spacing for discretized continuous chains, 1 for discrete ones).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import FactorError

__all__ = ["FactorChain", "FactorCycle", "ROLE_LABELS"]

# factor role vocabulary for experiment-style cycles
ROLE_LABELS = frozenset({"prep", "ext", "meas", "dec", "sim", "plain"})


def _as_factor(f, name):
    f = np.asarray(f, dtype=float)
    if f.ndim != 2:
        raise FactorError(f"{name} must be a 2-d array, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise FactorError(f"{name} contains non-finite entries")
    if np.any(f < 0):
        raise FactorError(f"{name} has negative entries")
    return f


@dataclass(frozen=True)
class FactorChain:
    """Open chain of pairwise factors, with optional unary end weights.

    ``boundary_left``/``boundary_right`` multiply the first/last site and
    double as the initial messages of a sweep (delta vectors of a clamp,
    boundary wave profiles, ...).  ``meta`` carries provenance such as the
    caliber parameters a chain was built from; it takes no part in the math.
    """

    factors: tuple
    weight: float = 1.0
    boundary_left: Any = None
    boundary_right: Any = None
    meta: Any = field(default=None, compare=False)

    def __post_init__(self):
        fs = tuple(_as_factor(f, f"factor {i}") for i, f in enumerate(self.factors))
        if not fs:
            raise FactorError("chain needs at least one factor")
        for i in range(len(fs) - 1):
            if fs[i].shape[1] != fs[i + 1].shape[0]:
                raise FactorError(
                    f"factor {i} couples {fs[i].shape[1]} states to site {i + 1} "
                    f"but factor {i + 1} expects {fs[i + 1].shape[0]}"
                )
        if self.weight <= 0:
            raise FactorError("weight must be positive")
        object.__setattr__(self, "factors", fs)
        for side, idx in (("boundary_left", 0), ("boundary_right", -1)):
            b = getattr(self, side)
            if b is None:
                continue
            b = np.asarray(b, dtype=float)
            want = fs[0].shape[0] if idx == 0 else fs[-1].shape[1]
            if b.shape != (want,):
                raise FactorError(f"{side} has shape {b.shape}, wanted ({want},)")
            if np.any(b < 0) or not np.all(np.isfinite(b)):
                raise FactorError(f"{side} must be finite and nonnegative")
            object.__setattr__(self, side, b)

    @property
    def n_sites(self) -> int:
        return len(self.factors) + 1

    @property
    def state_counts(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors) + (self.factors[-1].shape[1],)

    def boundary(self, side: str) -> np.ndarray:
        """End weight vector, defaulting to all-ones."""
        b = self.boundary_left if side == "left" else self.boundary_right
        if b is not None:
            return b
        n = self.state_counts[0] if side == "left" else self.state_counts[-1]
        return np.ones(n)


@dataclass(frozen=True)
class FactorCycle:
    """Closed cycle of n square factors; F_l couples site l to site l+1 and
    the last factor wraps back to site 1.  Optional ``roles`` label factors
    (prep / ext / meas / dec / sim / plain) for experiment-style cycles."""

    factors: tuple
    roles: Any = None

    def __post_init__(self):
        fs = tuple(_as_factor(f, f"factor {i}") for i, f in enumerate(self.factors))
        if len(fs) < 2:
            raise FactorError("cycle needs at least two factors")
        q = fs[0].shape[0]
        for i, f in enumerate(fs):
            if f.shape != (q, q):
                raise FactorError(
                    f"cycle factors must all be {q}x{q}; factor {i} is {f.shape}"
                )
        object.__setattr__(self, "factors", fs)
        if self.roles is not None:
            roles = tuple(str(r) for r in self.roles)
            if len(roles) != len(fs):
                raise FactorError("roles must label every factor")
            unknown = sorted(set(roles) - ROLE_LABELS)
            if unknown:
                raise FactorError(
                    f"unknown roles {unknown}; allowed: {sorted(ROLE_LABELS)}"
                )
            object.__setattr__(self, "roles", roles)

    @property
    def n_sites(self) -> int:
        return len(self.factors)

    @property
    def state_counts(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

"""Dual-observer stepping: two sub-observers whose mutual views close.

One observer's state P_A changes by watching the other's P_B and vice
versa.  Reversible (symmetric J_s) influence enters with opposite signs
for the two directions of observation, irreversible (antisymmetric J_a)
influence is external and enters both the same way:

    dP_A = dt [J_a, P_A] - dt [J_s, P_B]
    dP_B = dt [J_a, P_B] + dt [J_s, P_A]

From a common diagonal start this keeps P_B = P_A^T, and the half-sum /
half-difference (P_s, P_a) obey the coupled real equations whose complex
packaging rho = P_s + i P_a, H = hbar (J_s + i J_a) is the von Neumann
equation.  The explicit Euler reading of the delta equations is kept
deliberately; the pair integrator supplies the accurate reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .densitydual import (
    DualPair,
    DynamicalMatrix,
    PairTrajectory,
    evolve_pair,
    join_real,
    pair_rhs,
)
from .errors import NonHermitianError, StateError

__all__ = [
    "DualObserver",
    "third_person_delta",
    "symmetric_first_person_step",
    "first_person_step",
    "split_step_residuals",
    "reconstruct_von_neumann",
]


def _commutator(a, b):
    return a @ b - b @ a


def _as_generator(j) -> DynamicalMatrix:
    return j if isinstance(j, DynamicalMatrix) else DynamicalMatrix(np.asarray(j))


def _require_common_diagonal(p_a, p_b, what="initial pair"):
    scale = max(np.abs(p_a).max(), 1e-300)
    if np.abs(p_a - p_b).max() > 1e-12 * scale:
        raise StateError(f"{what} must share one state, P_A,0 == P_B,0")
    off = p_a - np.diag(np.diag(p_a))
    if np.abs(off).max() > 1e-12 * scale:
        raise StateError(
            f"{what} must be diagonal; the shared start is classical "
            "information and carries no off-diagonal structure"
        )


@dataclass(frozen=True)
class DualObserver:
    """A mutually-observing pair plus the generator driving it.

    Construction enforces the common diagonal start; ``evolve`` hands the
    pair to the integrator and is the object most callers want.
    """

    pair: DualPair
    j: DynamicalMatrix

    def __post_init__(self):
        _require_common_diagonal(self.pair.p_a, self.pair.p_b)
        if self.j.j.shape != self.pair.p_a.shape:
            raise StateError(
                f"generator shape {self.j.j.shape} does not match "
                f"state shape {self.pair.p_a.shape}"
            )

    @property
    def dim(self) -> int:
        return self.pair.p_a.shape[0]

    def evolve(self, t: float, steps: int, method: str = "rk4") -> PairTrajectory:
        return evolve_pair(self.pair.p_a, self.j, t, steps, method=method)


def third_person_delta(p_o, j, dt: float) -> np.ndarray:
    """External-view change of a single observer state: dt [J, P_O]."""
    jm = np.asarray(getattr(j, "j", j), dtype=float)
    p = np.asarray(p_o, dtype=float)
    if jm.shape != p.shape:
        raise StateError(f"shape mismatch: J {jm.shape} vs P {p.shape}")
    return dt * _commutator(jm, p)


def symmetric_first_person_step(pair: DualPair, j_s, dt: float) -> DualPair:
    """One reversible-only step: each observer sees the other change.

    dP_A = -dt [J_s, P_B] and dP_B = +dt [J_s, P_A]; the sign flips
    because A's view of B runs opposite to B's view of A.  Given P_B = P_A^T
    the two deltas are transposes of each other, so the relation
    persists.  Refuses an asymmetric generator.
    """
    js = np.asarray(getattr(j_s, "j", j_s), dtype=float)
    if np.abs(js - js.T).max() > 1e-12 * max(np.abs(js).max(), 1e-300):
        raise NonHermitianError("reversible-only stepping needs symmetric J")
    return DualPair(
        p_a=pair.p_a - dt * _commutator(js, pair.p_b),
        p_b=pair.p_b + dt * _commutator(js, pair.p_a),
        time=pair.time + dt,
    )


def first_person_step(pair: DualPair, j, dt: float) -> DualPair:
    """One full step with both reversible and irreversible parts.

    Exactly the Euler step of the coupled pair equations: the deltas are
    dt times densitydual.pair_rhs, nothing more.
    """
    gen = _as_generator(j)
    da, db = pair_rhs(pair.p_a, pair.p_b, gen)
    return DualPair(
        p_a=pair.p_a + dt * da,
        p_b=pair.p_b + dt * db,
        time=pair.time + dt,
    )


def split_step_residuals(pair: DualPair, j) -> tuple:
    """Term-for-term check of the half-sum / half-difference equations.

    Returns the two residual matrices

        (dA + dB)/2 - ([J_a, P_s] + [J_s, P_a])
        (dA - dB)/2 - ([J_a, P_a] - [J_s, P_s])

    which vanish identically (the commutator is linear), so anything
    beyond roundoff means the implementations drifted apart.
    """
    gen = _as_generator(j)
    da, db = pair_rhs(pair.p_a, pair.p_b, gen)
    p_s = (pair.p_a + pair.p_b) / 2
    p_a = (pair.p_a - pair.p_b) / 2
    j_s, j_a = gen.j_s, gen.j_a
    res_s = (da + db) / 2 - (_commutator(j_a, p_s) + _commutator(j_s, p_a))
    res_a = (da - db) / 2 - (_commutator(j_a, p_a) - _commutator(j_s, p_s))
    return res_s, res_a


def reconstruct_von_neumann(trajectory: PairTrajectory, j,
                            hbar: float = 1.0) -> float:
    """Worst gap between the packaged pair and the exact complex flow.

    Rebuilds rho(t) = join_real(P_A(t)) at every sampled time and
    compares with the eigendecomposition propagator for
    H = hbar (J_s + i J_a); also verifies the split equations at each
    sample, raising if that algebraic identity is broken.
    """
    gen = _as_generator(j)
    _require_common_diagonal(trajectory.p_a[0], trajectory.p_b[0],
                             what="trajectory start")
    h = gen.hamiltonian(hbar)
    rho0 = join_real(trajectory.p_a[0])
    worst = 0.0
    for k, t in enumerate(np.asarray(trajectory.times, dtype=float)):
        pair_k = trajectory.state(k)
        res_s, res_a = split_step_residuals(pair_k, gen)
        tol = 1e-12 * max(1.0, np.abs(gen.j).max() * np.abs(pair_k.p_a).max())
        if max(np.abs(res_s).max(), np.abs(res_a).max()) > tol:
            raise StateError(f"split equations violated at t={t:g}")
        exact = oracle.evolve_density_exact(h, rho0, t, hbar=hbar).rho
        worst = max(worst, np.abs(join_real(pair_k.p_a) - exact).max())
    return worst

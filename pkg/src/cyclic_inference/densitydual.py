"""Real probability-matrix pairs equivalent to density-matrix evolution.

A Hermitian density matrix splits into a real symmetric part and a real
antisymmetric part; their sum is a single real matrix P whose transpose
carries the conjugate information.  Evolving the pair (P_A, P_B) with

    dP_A/dt = [J_a, P_A] - [J_s, P_B]
    dP_B/dt = [J_a, P_B] + [J_s, P_A]

from equal diagonal starts reproduces unitary density-matrix dynamics with
generator H = hbar*(J_s + i*J_a), and keeps P_B = P_A^T along the way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonHermitianError, StateError

__all__ = [
    "HermitianState",
    "DynamicalMatrix",
    "DualPair",
    "PairTrajectory",
    "split_hermitian",
    "join_real",
    "pair_rhs",
    "evolve_pair",
    "second_order_residual",
]


def _commutator(a, b):
    return a @ b - b @ a


@dataclass(frozen=True)
class HermitianState:
    """Unit-trace positive-semidefinite Hermitian matrix."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise StateError(f"state must be square, got {rho.shape}")
        scale = max(np.abs(rho).max(), 1e-300)
        if np.abs(rho - rho.conj().T).max() > 1e-10 * scale:
            raise NonHermitianError("state is not Hermitian")
        tr = np.trace(rho)
        if abs(tr - 1.0) > 1e-12:
            raise StateError(f"state trace {tr!r} is not 1")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise StateError("state has a negative eigenvalue")
        object.__setattr__(self, "rho", rho)

    @property
    def symmetric_part(self) -> np.ndarray:
        return self.rho.real.copy()

    @property
    def antisymmetric_part(self) -> np.ndarray:
        return self.rho.imag.copy()

    @property
    def real_matrix(self) -> np.ndarray:
        """P = P_s + P_a; the transpose is the conjugate partner."""
        return self.rho.real + self.rho.imag


@dataclass(frozen=True)
class DynamicalMatrix:
    """Real generator J; H = hbar*(J_s + i*J_a) with the symmetric and
    antisymmetric pieces J_s, J_a."""

    j: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.j, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise StateError(f"generator must be square, got {j.shape}")
        if not np.all(np.isfinite(j)):
            raise StateError("generator has non-finite entries")
        object.__setattr__(self, "j", j)

    @property
    def j_s(self) -> np.ndarray:
        return (self.j + self.j.T) / 2

    @property
    def j_a(self) -> np.ndarray:
        return (self.j - self.j.T) / 2

    def hamiltonian(self, hbar: float = 1.0) -> np.ndarray:
        return hbar * (self.j_s + 1j * self.j_a)


@dataclass(frozen=True)
class DualPair:
    """The two real matrices of the pair picture at one time."""

    p_a: np.ndarray
    p_b: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        pa = np.asarray(self.p_a, dtype=float)
        pb = np.asarray(self.p_b, dtype=float)
        if pa.shape != pb.shape or pa.ndim != 2 or pa.shape[0] != pa.shape[1]:
            raise StateError("pair members must be square and same shape")
        for name, m in (("P_A", pa), ("P_B", pb)):
            if abs(np.trace(m) - 1.0) > 1e-10:
                raise StateError(f"{name} trace {np.trace(m)!r} is not 1")
        object.__setattr__(self, "p_a", pa)
        object.__setattr__(self, "p_b", pb)


@dataclass(frozen=True)
class PairTrajectory:
    """Sampled pair evolution: times[k] goes with p_a[k], p_b[k]."""

    times: np.ndarray
    p_a: np.ndarray
    p_b: np.ndarray

    def state(self, k: int) -> DualPair:
        return DualPair(p_a=self.p_a[k], p_b=self.p_b[k], time=float(self.times[k]))

    @property
    def final(self) -> DualPair:
        return self.state(len(self.times) - 1)


def split_hermitian(m) -> tuple:
    """Split a Hermitian matrix into (real symmetric, real antisymmetric)."""
    m = np.asarray(m, dtype=complex)
    scale = max(np.abs(m).max(), 1e-300)
    if np.abs(m - m.conj().T).max() > 1e-10 * scale:
        raise NonHermitianError("cannot split a non-Hermitian matrix")
    return m.real.copy(), m.imag.copy()


def join_real(p) -> np.ndarray:
    """Rebuild the Hermitian matrix from a single real P = P_s + P_a."""
    p = np.asarray(p, dtype=float)
    return (p + p.T) / 2 + 1j * (p - p.T) / 2


def pair_rhs(p_a, p_b, j: DynamicalMatrix) -> tuple:
    """Coupled time derivatives of the pair under generator J."""
    j_s, j_a = j.j_s, j.j_a
    da = _commutator(j_a, p_a) - _commutator(j_s, p_b)
    db = _commutator(j_a, p_b) + _commutator(j_s, p_a)
    return da, db


def _check_diagonal_start(p0):
    p0 = np.asarray(p0, dtype=float)
    off = p0 - np.diag(np.diag(p0))
    if np.abs(off).max() > 1e-12 * max(np.abs(p0).max(), 1e-300):
        raise StateError(
            "pair evolution is only defined from a diagonal start; "
            "off-diagonal initial data has no dual reading here"
        )
    d = np.diag(p0)
    if np.any(d < -1e-12):
        raise StateError("diagonal start has negative probabilities")
    if abs(d.sum() - 1.0) > 1e-10:
        raise StateError(f"diagonal start sums to {d.sum()!r}, not 1")
    return np.diag(d)


def evolve_pair(p0, j: DynamicalMatrix, t: float, steps: int,
                method: str = "rk4") -> PairTrajectory:
    """Integrate the pair equations from the shared diagonal start p0.

    Parameters
    ----------
    p0 : diagonal real matrix, the common initial P_A = P_B
    j : generator
    t : final time (may be negative)
    steps : number of fixed integrator steps
    method : "rk4" or "euler"
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    p0 = _check_diagonal_start(p0)
    n = p0.shape[0]
    if j.j.shape != (n, n):
        raise StateError("generator and state dimensions differ")

    dt = t / steps
    times = np.linspace(0.0, t, steps + 1)
    p_a = np.empty((steps + 1, n, n))
    p_b = np.empty((steps + 1, n, n))
    p_a[0] = p0
    p_b[0] = p0
    a, b = p0.copy(), p0.copy()
    for k in range(steps):
        if method == "euler":
            da, db = pair_rhs(a, b, j)
            a = a + dt * da
            b = b + dt * db
        else:
            ka1, kb1 = pair_rhs(a, b, j)
            ka2, kb2 = pair_rhs(a + 0.5 * dt * ka1, b + 0.5 * dt * kb1, j)
            ka3, kb3 = pair_rhs(a + 0.5 * dt * ka2, b + 0.5 * dt * kb2, j)
            ka4, kb4 = pair_rhs(a + dt * ka3, b + dt * kb3, j)
            a = a + dt / 6.0 * (ka1 + 2 * ka2 + 2 * ka3 + ka4)
            b = b + dt / 6.0 * (kb1 + 2 * kb2 + 2 * kb3 + kb4)
        p_a[k + 1] = a
        p_b[k + 1] = b
    return PairTrajectory(times=times, p_a=p_a, p_b=p_b)


def second_order_residual(pair: DualPair, j_s) -> np.ndarray:
    """Residual of the second-order form for symmetric generators.

    Differentiates dP_A/dt = -[J_s, P_B] once more, reading dP_B/dt off the
    transpose of the first derivative, and adds [J_s, [J_s, P_A]].  The
    result vanishes exactly when P_B = P_A^T, so along an integrated pair it
    is bounded by the transpose-coupling error of the integrator.
    """
    j_s = np.asarray(j_s, dtype=float)
    if np.abs(j_s - j_s.T).max() > 1e-12 * max(np.abs(j_s).max(), 1e-300):
        raise NonHermitianError("second-order form needs a symmetric generator")
    da = -_commutator(j_s, pair.p_b)
    ddt_pa_transpose = da.T
    dda = -_commutator(j_s, ddt_pa_transpose)
    return dda + _commutator(j_s, _commutator(j_s, pair.p_a))

"""Brute-force and closed-form references used to validate everything else.

Nothing here is clever: joints are enumerated configuration by
configuration, and density matrices are propagated through an
eigendecomposition of the generator.  The fast paths elsewhere in the
package are tested against these routines, so they must stay independent
of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationOverflowError,
    NonHermitianError,
    StateError,
    ZeroPartitionError,
)
from .factors import FactorChain, FactorCycle

MAX_CONFIGURATIONS = 10_000_000


@dataclass(frozen=True)
class JointTable:
    """Dense normalized joint over all site configurations.

    ``probabilities`` has one axis per site, C-ordered, so flattening walks
    configurations in mixed-radix order with site 1 most significant.  ``z``
    is the partition function of the unnormalized product including the
    ``weight**n_sites`` quadrature volume.
    """

    probabilities: np.ndarray
    z: float
    cyclic: bool = False
    weight: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if abs(p.sum() - 1.0) > 1e-12:
            raise StateError(f"joint table sums to {p.sum()!r}, not 1")
        if np.any(p < 0):
            raise StateError("joint table has negative entries")
        object.__setattr__(self, "probabilities", p)

    @property
    def states_per_site(self) -> tuple:
        return self.probabilities.shape

    @property
    def n_sites(self) -> int:
        return self.probabilities.ndim


@dataclass(frozen=True)
class PropagatedDensity:
    """Density matrix at a single time, from the closed-form propagator."""

    rho: np.ndarray
    time: float


def _broadcast_shape(mat, axis_a, axis_b, ndim):
    shape = [1] * ndim
    shape[axis_a] = mat.shape[0]
    shape[axis_b] = mat.shape[1]
    # align the matrix axes with the requested tensor axes
    order = np.argsort([axis_a, axis_b])
    return np.transpose(mat, order).reshape(shape)


def enumerate_joint(model) -> JointTable:
    """Exact joint of a FactorChain or FactorCycle by full enumeration.

    Raises ConfigurationOverflowError beyond MAX_CONFIGURATIONS states and
    ZeroPartitionError when the product vanishes everywhere.
    """
    counts = model.state_counts
    total = 1
    for q in counts:
        total *= q
        if total > MAX_CONFIGURATIONS:
            raise ConfigurationOverflowError(
                f"{total}+ configurations exceed cap {MAX_CONFIGURATIONS}"
            )
    n = len(counts)
    cyclic = isinstance(model, FactorCycle)

    w = np.ones(counts)
    for ell, f in enumerate(model.factors):
        a, b = ell, (ell + 1) % n
        w = w * _broadcast_shape(f, a, b, n)
    if not cyclic:
        left = model.boundary("left")
        right = model.boundary("right")
        w = w * left.reshape((-1,) + (1,) * (n - 1))
        w = w * right.reshape((1,) * (n - 1) + (-1,))

    raw = w.sum()
    if raw <= 0.0:
        raise ZeroPartitionError("factor product vanishes on every configuration")
    weight = 1.0 if cyclic else model.weight
    return JointTable(
        probabilities=w / raw,
        z=raw * weight ** n,
        cyclic=cyclic,
        weight=weight,
    )


def marginal(joint: JointTable, site: int) -> np.ndarray:
    """Single-site marginal p_site, summed over every other axis."""
    n = joint.n_sites
    if not 0 <= site < n:
        raise IndexError(f"site {site} outside 0..{n - 1}")
    axes = tuple(i for i in range(n) if i != site)
    return joint.probabilities.sum(axis=axes)


def pairwise_marginal(joint: JointTable, site: int) -> np.ndarray:
    """Marginal over (x_site, x_{site+1}); the pair wraps on cycles."""
    n = joint.n_sites
    if not 0 <= site < n:
        raise IndexError(f"site {site} outside 0..{n - 1}")
    if site == n - 1 and not joint.cyclic:
        raise IndexError("last site of an open chain has no successor")
    nxt = (site + 1) % n
    axes = tuple(i for i in range(n) if i not in (site, nxt))
    pair = joint.probabilities.sum(axis=axes)
    if nxt < site:  # wrap pair comes out transposed
        pair = pair.T
    return pair


def _require_hermitian(m, what):
    m = np.asarray(m)
    scale = np.abs(m).max()
    dev = np.abs(m - m.conj().T).max()
    if dev > 1e-10 * max(scale, 1e-300):
        raise NonHermitianError(f"{what} deviates from Hermitian by {dev:g}")
    return m


def evolve_commutator_rk4(generator, p0, dt: float, steps: int) -> np.ndarray:
    """Reference integration of dP/dt = [J, P] with classic Runge-Kutta.

    Returns the whole trajectory, shape (steps+1, q, q), with [0] = P0.
    The local error is O(dt^5), far below the O(dt) effects this is used
    to measure.  Accepts a plain matrix or an object with a ``j``/``matrix``
    attribute for the generator/state.
    """
    j = np.asarray(getattr(generator, "j", generator), dtype=float)
    p = np.asarray(getattr(p0, "matrix", p0), dtype=float)
    if j.shape != p.shape or j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise StateError(f"shape mismatch: J {j.shape} vs P {p.shape}")

    def rhs(m):
        return j @ m - m @ j

    out = np.empty((steps + 1,) + p.shape)
    out[0] = p
    for k in range(steps):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * dt * k1)
        k3 = rhs(p + 0.5 * dt * k2)
        k4 = rhs(p + dt * k3)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = p
    return out


def evolve_density_exact(hamiltonian, rho0, t: float, hbar: float = 1.0):
    """Propagate rho0 for time t under a constant Hermitian generator.

    Uses the eigendecomposition H = V diag(E) V* to build the exact
    propagator, independently of any time stepper.  Accepts a plain
    matrix or any object with a ``rho`` attribute.
    """
    h = _require_hermitian(hamiltonian, "hamiltonian")
    rho = np.asarray(getattr(rho0, "rho", rho0), dtype=complex)
    rho = _require_hermitian(rho, "density matrix")
    if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > 1e-10:
        raise StateError(f"density matrix trace {np.trace(rho)!r} is not 1")
    energies, modes = np.linalg.eigh(h)
    u = (modes * np.exp(-1j * energies * t / hbar)) @ modes.conj().T
    rho_t = u @ rho @ u.conj().T
    if abs(np.trace(rho_t).real - 1.0) > 1e-12 * max(1.0, abs(t)):
        raise StateError("propagation failed to conserve trace")
    return PropagatedDensity(rho=rho_t, time=t)

"""Real Gaussian kernels that propagate wave profiles on a periodic grid.

One short-time kernel application reproduces the unitary half-step

    K*psi = psi - (eps/hbar) V psi + (hbar eps / 2m) psi'' + O(eps^2)

so (i/eps)(K*psi - psi) converges to the generator action as eps -> 0.
With a vector potential the kernel picks up a phase linear in the
displacement; the Hermitian complex kernel and its real cos/sin split are
built here, together with the purely real variance-substituted variant.

Row convention: kernel[x, x'] weights a move from column state x' into row
state x, and the scalar potential enters through the first (row) argument
for the plain kernel and through the midpoint for the gauge kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    NonHermitianError,
    PhaseBoundError,
    StateError,
    UnresolvedGaussianError,
)

__all__ = [
    "Grid1D",
    "KernelSpec",
    "WaveVector",
    "zero_potential",
    "discretize_hamiltonian",
    "gaussian_kernel",
    "normalization_defect",
    "convolve_step",
    "schrodinger_rhs_via_kernel",
    "kernel_commutator_rhs",
    "em_complex_kernel",
    "em_real_kernel",
    "em_hamiltonian",
    "EMRealKernel",
]


def zero_potential(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid: n points spaced delta, starting at origin."""

    delta: float
    n: int
    origin: float = 0.0

    def __post_init__(self):
        if self.delta <= 0:
            raise StateError("grid spacing must be positive")
        if self.n < 3:
            raise StateError("grid needs at least 3 points")

    @property
    def length(self) -> float:
        return self.n * self.delta

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.delta * np.arange(self.n)

    def wrap(self, disp):
        """Minimum-image displacement.  np.round is odd, so the result is
        exactly antisymmetric under argument exchange."""
        disp = np.asarray(disp, dtype=float)
        return disp - self.length * np.round(disp / self.length)

    def displacement_matrix(self) -> np.ndarray:
        x = self.points
        return self.wrap(x[:, None] - x[None, :])

    def midpoint_matrix(self) -> np.ndarray:
        """Midpoint along the minimum-image path between grid points.

        For pairs that couple across the periodic seam the arithmetic mean
        sits on the wrong side of the domain, so shift it by half a period
        and fold back.  Both corrections are symmetric in (i, j), keeping
        midpoint-sampled kernels exactly Hermitian.
        """
        x = self.points
        raw = x[:, None] - x[None, :]
        mean = (x[:, None] + x[None, :]) / 2.0
        mid = mean + (self.length / 2.0) * np.abs(np.round(raw / self.length))
        return self.origin + np.mod(mid - self.origin, self.length)


@dataclass(frozen=True)
class KernelSpec:
    """Physical parameters of a short-time kernel.

    ``potential`` and ``vector_potential`` are callables of position so the
    gauge kernels can sample them halfway between grid points.
    """

    mass: float
    epsilon: float
    hbar: float = 1.0
    potential: Callable = zero_potential
    vector_potential: Callable = zero_potential
    e_over_c: float = 1.0

    def __post_init__(self):
        for name in ("mass", "epsilon", "hbar"):
            if getattr(self, name) <= 0:
                raise StateError(f"{name} must be positive")

    @property
    def width(self) -> float:
        """Gaussian standard deviation sqrt(hbar*eps/m)."""
        return np.sqrt(self.hbar * self.epsilon / self.mass)

    @property
    def amplitude_norm(self) -> float:
        """|A| = sqrt(2 pi hbar eps / m), the kinetic normalization."""
        return np.sqrt(2.0 * np.pi * self.hbar * self.epsilon / self.mass)


@dataclass(frozen=True)
class WaveVector:
    """Complex wave profile sampled on a grid."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim != 1:
            raise StateError("wave profile must be a vector")
        if not np.all(np.isfinite(psi)):
            raise StateError("wave profile has non-finite entries")
        if np.vdot(psi, psi).real <= 0:
            raise StateError("wave profile has zero norm")
        object.__setattr__(self, "psi", psi)


def _psi_array(psi):
    return np.asarray(getattr(psi, "psi", psi), dtype=complex)


def _check_resolvable(spec: KernelSpec, grid: Grid1D):
    if grid.n < 8:
        raise UnresolvedGaussianError("kernels need a grid of at least 8 points")
    if spec.width < 2.0 * grid.delta:
        raise UnresolvedGaussianError(
            f"kernel width {spec.width:g} under-resolved by spacing "
            f"{grid.delta:g}; need width >= 2*delta"
        )


def discretize_hamiltonian(grid: Grid1D, spec: KernelSpec) -> np.ndarray:
    """Periodic second-order finite-difference generator.

    Off-diagonal -hbar^2/(2 m delta^2) with wraparound corners, diagonal
    hbar^2/(m delta^2) + V(x_k).
    """
    t = spec.hbar**2 / (2.0 * spec.mass * grid.delta**2)
    h = np.zeros((grid.n, grid.n))
    idx = np.arange(grid.n)
    h[idx, idx] = 2.0 * t + spec.potential(grid.points)
    h[idx, (idx + 1) % grid.n] -= t
    h[idx, (idx - 1) % grid.n] -= t
    return h


def gaussian_kernel(spec: KernelSpec, grid: Grid1D) -> np.ndarray:
    """Short-time kernel exp(-eps*H(x,x')/hbar)/|A| with
    H(x,x') = m(x-x')^2/(2 eps^2) + V(x)."""
    _check_resolvable(spec, grid)
    d = grid.displacement_matrix()
    kinetic = spec.mass * d**2 / (2.0 * spec.epsilon**2)
    v_row = spec.potential(grid.points)[:, None]
    return np.exp(-spec.epsilon * (kinetic + v_row) / spec.hbar) / spec.amplitude_norm


def normalization_defect(kernel, grid: Grid1D) -> np.ndarray:
    """delta-weighted row sums minus one.  Per row this approaches
    -eps*V(x)/hbar at first order in eps."""
    kernel = np.asarray(kernel)
    return grid.delta * kernel.sum(axis=1) - 1.0


def convolve_step(kernel, psi, grid: Grid1D) -> np.ndarray:
    """One kernel application (K*psi)(x) = delta * sum_x' K(x,x') psi(x')."""
    return grid.delta * (np.asarray(kernel) @ _psi_array(psi))


def schrodinger_rhs_via_kernel(spec: KernelSpec, psi, grid: Grid1D) -> np.ndarray:
    """(i/eps) * (K*psi - psi), the kernel reading of the time derivative."""
    psi = _psi_array(psi)
    k = gaussian_kernel(spec, grid)
    return 1j / spec.epsilon * (convolve_step(k, psi, grid) - psi)


def kernel_commutator_rhs(kernel, rho, grid: Grid1D, epsilon: float) -> np.ndarray:
    """(i/eps) * (K*rho - rho*K) with the two convolutions acting on the
    first and second argument of rho.

    The second convolution conjugates the kernel, so the output is exactly
    Hermitian for Hermitian rho whether or not the kernel is symmetric.
    """
    kernel = np.asarray(kernel)
    rho = np.asarray(getattr(rho, "rho", rho), dtype=complex)
    scale = max(np.abs(rho).max(), 1e-300)
    if np.abs(rho - rho.conj().T).max() > 1e-10 * scale:
        raise NonHermitianError("kernel commutator needs a Hermitian rho")
    left = kernel @ rho
    right = rho @ kernel.conj().T
    return 1j / epsilon * grid.delta * (left - right)


def em_complex_kernel(spec: KernelSpec, grid: Grid1D) -> np.ndarray:
    """Hermitian gauge kernel: midpoint potential plus an imaginary term
    -i (e/c) ((x-x')/eps) A((x+x')/2) inside the exponent."""
    _check_resolvable(spec, grid)
    d = grid.displacement_matrix()
    mid = grid.midpoint_matrix()
    exponent = (
        spec.mass * d**2 / (2.0 * spec.epsilon**2)
        + spec.potential(mid)
        - 1j * spec.e_over_c * (d / spec.epsilon) * spec.vector_potential(mid)
    )
    return np.exp(-spec.epsilon * exponent / spec.hbar) / spec.amplitude_norm


class EMRealKernel(NamedTuple):
    """Real gauge kernels: variance-substituted k_em and the cos/sin split."""

    k_em: np.ndarray
    k_s: np.ndarray
    k_a: np.ndarray


# Gaussian support floor for the phase-bound check: entries this far into
# the tails carry no weight and may violate the small-z expansion freely.
SUPPORT_FLOOR = 1e-12
Z_BOUND = 0.3


def em_real_kernel(spec: KernelSpec, grid: Grid1D) -> EMRealKernel:
    """Split of the gauge kernel into real symmetric/antisymmetric parts.

    k_s, k_a carry cos(z) and sin(z) of the gauge phase
    z = (e/(hbar c)) (x-x') A((x+x')/2); k_em replaces the linear-z term by
    its Gaussian variance, adding (e^2/(m c^2)) A^2 to the exponent.
    Requires |z| <= 0.3 wherever the kinetic Gaussian is resolved.
    """
    _check_resolvable(spec, grid)
    d = grid.displacement_matrix()
    mid = grid.midpoint_matrix()
    a_mid = spec.vector_potential(mid)
    gauss = np.exp(
        -(spec.mass * d**2 / (2.0 * spec.epsilon**2) + spec.potential(mid))
        * spec.epsilon / spec.hbar
    )
    z = spec.e_over_c * d * a_mid / spec.hbar
    support = gauss >= SUPPORT_FLOOR * gauss.max()
    worst = np.abs(z[support]).max() if support.any() else 0.0
    if worst > Z_BOUND:
        raise PhaseBoundError(
            f"gauge phase reaches |z| = {worst:g} on resolved support; "
            f"the real splitting is only valid for |z| <= {Z_BOUND}"
        )
    norm = spec.amplitude_norm
    k_s = gauss * np.cos(z) / norm
    k_a = gauss * np.sin(z) / norm
    variance_term = (
        spec.e_over_c**2 * a_mid**2 / (spec.mass * spec.hbar) * spec.epsilon
    )
    k_em = gauss * np.exp(z - variance_term) / norm
    return EMRealKernel(k_em=k_em, k_s=k_s, k_a=k_a)


def em_hamiltonian(spec: KernelSpec, grid: Grid1D) -> np.ndarray:
    """Finite-difference gauge generator, independent of any kernel:

        -(hbar^2/2m) D2 + i (hbar e / 2mc) (A D1 + D1 A)
        + (e^2/2mc^2) A^2 + V

    with periodic central first/second differences D1, D2 and A, V sampled
    on the grid points.  Hermitian by construction.
    """
    n, delta = grid.n, grid.delta
    idx = np.arange(n)
    d1 = np.zeros((n, n))
    d1[idx, (idx + 1) % n] = 1.0 / (2.0 * delta)
    d1[idx, (idx - 1) % n] = -1.0 / (2.0 * delta)
    d2 = np.zeros((n, n))
    d2[idx, idx] = -2.0 / delta**2
    d2[idx, (idx + 1) % n] = 1.0 / delta**2
    d2[idx, (idx - 1) % n] = 1.0 / delta**2

    a = np.diag(spec.vector_potential(grid.points))
    v = np.diag(spec.potential(grid.points))
    h = (
        -(spec.hbar**2) / (2.0 * spec.mass) * d2
        + 1j * spec.hbar * spec.e_over_c / (2.0 * spec.mass) * (a @ d1 + d1 @ a)
        + spec.e_over_c**2 / (2.0 * spec.mass) * a @ a
        + v
    ).astype(complex)
    return h

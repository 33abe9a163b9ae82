"""Maximum-caliber chain distributions and their Markov decompositions.

A path distribution over n steps is built from identical pairwise factors
exp(-(lambda/T) H(x, x') eps) / |A|, the least-biased distribution with a
fixed average path energy.  Every pairwise marginal of such a chain can be
written three equivalent ways -- forward transitions times the left
marginal, backward transitions times the right marginal, or symmetrically
as theta K theta' -- and the continuum limit of the symmetric form carries
drift and diffusion coefficients that this module estimates by quadrature.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional

import numpy as np

from .errors import (
    FactorError,
    QuadratureWindowError,
    StateError,
    SupportError,
    ZeroPartitionError,
)
from .factors import FactorChain

MAX_EXP_ARGUMENT = 700.0
_TAIL_MASS = 1e-8
_QUAD_POINTS = 4097


@dataclass(frozen=True)
class CaliberSpec:
    """Parameters of a maximum-caliber path ensemble.

    ``hamiltonian`` is either a pairwise energy callable H(x, x') broadcast
    over state arrays or a precomputed square matrix.  ``lam`` is the
    Lagrange multiplier of the average-energy constraint (written lambda in
    the usual notation; renamed because of the Python keyword).  ``T`` is
    the total path duration, ``epsilon`` the step, ``n`` the number of
    steps, tied together by T = n * epsilon.  ``mass`` only feeds the
    Gaussian amplitude normalization; leave it None for abstract state
    spaces, which get |A| = 1.
    """

    hamiltonian: Any
    lam: float
    epsilon: float
    n: int
    T: Optional[float] = None
    mass: Optional[float] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise StateError("lagrange multiplier must be positive")
        if not self.epsilon > 0:
            raise StateError("step must be positive")
        if self.n < 1 or int(self.n) != self.n:
            raise StateError("path length must be a positive integer")
        if self.T is None:
            object.__setattr__(self, "T", self.n * self.epsilon)
        elif abs(self.T - self.n * self.epsilon) > 1e-12 * self.T:
            raise StateError("duration must equal n * epsilon")
        if self.mass is not None and not self.mass > 0:
            raise StateError("mass must be positive when given")

    @property
    def hbar_eff(self) -> float:
        """Effective quantum of action T / lambda of the path ensemble."""
        return self.T / self.lam

    @property
    def amplitude_norm(self) -> float:
        """Per-step amplitude |A| = sqrt(2 pi hbar_eff eps / m), or 1."""
        if self.mass is None:
            return 1.0
        return float(np.sqrt(2 * np.pi * self.hbar_eff * self.epsilon / self.mass))


@dataclass(frozen=True)
class TransitionPair:
    """Forward and backward conditionals sharing one pairwise marginal.

    ``forward`` is row-stochastic P+(x'|x) indexed [x, x']; ``backward`` is
    column-stochastic P-(x|x') with the same [x, x'] indexing, so Bayes
    consistency reads forward * p = backward * p' entrywise.  Rows/columns
    of states excluded for zero marginal are identically zero.  Both fields
    may also hold density callables for continuous processes, in which case
    no numeric validation applies.
    """

    forward: Any
    backward: Any
    excluded_left: tuple = ()
    excluded_right: tuple = ()

    def __post_init__(self):
        if callable(self.forward) and callable(self.backward):
            return
        fwd = np.asarray(self.forward, dtype=float)
        bwd = np.asarray(self.backward, dtype=float)
        if fwd.shape != bwd.shape or fwd.ndim != 2:
            raise StateError("transition matrices must share a 2-d shape")
        if np.any(fwd < 0) or np.any(bwd < 0):
            raise StateError("transition matrices must be nonnegative")
        rows = fwd.sum(axis=1)
        rows[list(self.excluded_left)] = 1.0
        cols = bwd.sum(axis=0)
        cols[list(self.excluded_right)] = 1.0
        if np.abs(rows - 1.0).max() > 1e-12:
            raise StateError("forward rows must sum to one on the support")
        if np.abs(cols - 1.0).max() > 1e-12:
            raise StateError("backward columns must sum to one on the support")
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "backward", bwd)


@dataclass(frozen=True)
class SymmetricDecomposition:
    """Pairwise marginal written as theta(x) K(x,x') theta'(x')."""

    theta: tuple
    k: np.ndarray

    def __post_init__(self):
        left, right = (np.asarray(t, dtype=float) for t in self.theta)
        k = np.asarray(self.k, dtype=float)
        if np.any(left < 0) or np.any(right < 0) or np.any(k < 0):
            raise StateError("symmetric decomposition must be nonnegative")
        if k.shape != (left.size, right.size):
            raise StateError("K shape must match the theta vectors")
        object.__setattr__(self, "theta", (left, right))
        object.__setattr__(self, "k", k)

    def reconstruct(self) -> np.ndarray:
        left, right = self.theta
        return left[:, None] * self.k * right[None, :]


@dataclass(frozen=True)
class DriftDiffusion:
    """Quadrature-sampled drift and diffusion of a transition density."""

    points: np.ndarray
    b_plus: np.ndarray
    d_plus: np.ndarray
    epsilon: float
    b_minus: Any = None
    c_plus: Any = None
    c_minus: Any = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        b = np.asarray(self.b_plus, dtype=float)
        d = np.asarray(self.d_plus, dtype=float)
        if not (pts.shape == b.shape == d.shape):
            raise StateError("drift/diffusion samples must match the points")
        if np.any(d <= 0):
            raise StateError("diffusion estimate must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "b_plus", b)
        object.__setattr__(self, "d_plus", d)


class DefectSample(NamedTuple):
    """Row-integral shortfall of the normalized kernel, with its target."""

    points: np.ndarray
    defect: np.ndarray
    analytic: np.ndarray


def _pairwise_energy(hamiltonian, states: np.ndarray) -> np.ndarray:
    if callable(hamiltonian):
        h = np.asarray(hamiltonian(states[:, None], states[None, :]), dtype=float)
    else:
        h = np.asarray(hamiltonian, dtype=float)
    if h.shape != (states.size, states.size):
        raise FactorError("pairwise energy must be square over the state space")
    if not np.all(np.isfinite(h)):
        raise FactorError("pairwise energy has non-finite entries")
    return h


def maxcal_chain(spec: CaliberSpec, state_space) -> FactorChain:
    """Chain of identical Boltzmann-like step factors over a state space."""
    states = np.asarray(state_space, dtype=float)
    if states.ndim != 1 or states.size < 1:
        raise StateError("state space must be a non-empty vector")
    h = _pairwise_energy(spec.hamiltonian, states)
    arg = (spec.lam / spec.T) * h * spec.epsilon
    # deep *positive* arguments only underflow the factor to zero, which is
    # harmless; negative ones would overflow exp to inf and must be rejected
    if arg.min() < -MAX_EXP_ARGUMENT:
        raise FactorError(
            f"step weight exponent reaches {-arg.min():.3g}, "
            f"beyond the representable range {MAX_EXP_ARGUMENT}"
        )
    factor = np.exp(-arg) / spec.amplitude_norm
    meta = {
        "amplitude_norm": spec.amplitude_norm,
        "hbar_eff": spec.hbar_eff,
        "states": states,
        "spec": spec,
    }
    return FactorChain(factors=(factor,) * spec.n, meta=meta)


def markov_decompose(pairwise, p_l, p_lp1, *, atol: float = 1e-10):
    """Split one pairwise marginal into its three equivalent factorizations.

    Returns (TransitionPair, SymmetricDecomposition).  States with zero
    marginal are excluded from the division and reported; a state with zero
    marginal but visible pairwise mass is an inconsistency.
    """
    pair = np.asarray(pairwise, dtype=float)
    left = np.asarray(p_l, dtype=float)
    right = np.asarray(p_lp1, dtype=float)
    if pair.ndim != 2 or pair.shape != (left.size, right.size):
        raise StateError("pairwise marginal shape must match the marginals")
    if np.any(pair < 0):
        raise StateError("pairwise marginal must be nonnegative")
    rows = pair.sum(axis=1)
    cols = pair.sum(axis=0)
    on_l = left > 0
    on_r = right > 0
    if np.any(rows[~on_l] > atol) or np.any(cols[~on_r] > atol):
        raise ZeroPartitionError("pairwise mass at a zero-marginal state")
    if np.abs(rows - left).max() > atol:
        raise StateError("pairwise rows do not sum to the left marginal")
    if np.abs(cols - right).max() > atol:
        raise StateError("pairwise columns do not sum to the right marginal")

    forward = np.divide(pair, left[:, None],
                        out=np.zeros_like(pair), where=on_l[:, None])
    backward = np.divide(pair, right[None, :],
                         out=np.zeros_like(pair), where=on_r[None, :])
    # renormalize away the O(atol) slack the marginals are allowed to carry
    fr = forward.sum(axis=1)
    forward[on_l] /= fr[on_l, None]
    bc = backward.sum(axis=0)
    backward[:, on_r] /= bc[None, on_r]

    theta_l = np.sqrt(left)
    theta_r = np.sqrt(right)
    denom = theta_l[:, None] * theta_r[None, :]
    k = np.divide(pair, denom, out=np.zeros_like(pair), where=denom > 0)

    pair_out = TransitionPair(
        forward=forward,
        backward=backward,
        excluded_left=tuple(np.flatnonzero(~on_l)),
        excluded_right=tuple(np.flatnonzero(~on_r)),
    )
    return pair_out, SymmetricDecomposition(theta=(theta_l, theta_r), k=k)


def chain_joint_from_marginals(pairwise, singles):
    """Rebuild the full chain joint from pairwise and single-site marginals.

    The joint is the product of the pairwise marginals divided by the
    interior singles; adjacent marginals must agree to 1e-8.
    """
    pairs = [np.asarray(p, dtype=float) for p in pairwise]
    sing = [np.asarray(s, dtype=float) for s in singles]
    if not pairs:
        raise StateError("need at least one pairwise marginal")
    if len(sing) != len(pairs) + 1:
        raise StateError("need one single-site marginal per site")
    for i, p in enumerate(pairs):
        if p.ndim != 2 or p.shape != (sing[i].size, sing[i + 1].size):
            raise StateError(f"pairwise {i} shape does not match the singles")
        if np.abs(p.sum(axis=1) - sing[i]).max() > 1e-8:
            raise StateError(f"pairwise {i} rows disagree with single {i}")
        if np.abs(p.sum(axis=0) - sing[i + 1]).max() > 1e-8:
            raise StateError(f"pairwise {i} columns disagree with single {i + 1}")

    from .oracle import JointTable

    joint = pairs[0]
    for i in range(1, len(pairs)):
        s = sing[i]
        cond = np.divide(pairs[i], s[:, None],
                         out=np.zeros_like(pairs[i]), where=(s > 0)[:, None])
        joint = joint[..., None] * cond.reshape((1,) * (joint.ndim - 1) + cond.shape)
    total = joint.sum()
    return JointTable(probabilities=joint / total, z=float(total), cyclic=False)


def _window_stats(density: Callable, x: float, w: float):
    xs = np.linspace(x - w, x + w, _QUAD_POINTS)
    p = np.asarray(density(xs), dtype=float)
    mass = float(np.trapezoid(p, xs))
    if mass <= 0:
        return xs, p, mass, 0.0, 0.0, np.inf
    m1 = float(np.trapezoid((xs - x) * p, xs)) / mass
    m2 = float(np.trapezoid((xs - x) ** 2 * p, xs)) / mass
    sigma = np.sqrt(max(m2 - m1 * m1, 0.0))
    tail = (p[0] + p[-1]) * max(sigma, xs[1] - xs[0])
    return xs, p, mass, m1, sigma, tail


def _quadrature_grid(density: Callable, x: float, epsilon: float,
                     window: Optional[float]):
    """Grid capturing a short-time transition density around ``x``.

    Capture means the estimated tail mass is below 1e-8 of the total and
    the window spans at least eight standard deviations around the mean;
    normalization is deliberately not required, so O(eps) defects pass
    through to the moments.
    """
    if window is not None:
        xs, p, mass, m1, sigma, tail = _window_stats(density, x, window)
        if mass <= 0 or tail > _TAIL_MASS * mass or window < 8.0 * sigma + abs(m1):
            raise QuadratureWindowError(
                f"window {window:.3g} around {x:.3g} misses transition mass"
            )
        return xs, p, mass
    w = 8.0 * np.sqrt(epsilon)
    for _ in range(60):
        xs, p, mass, m1, sigma, tail = _window_stats(density, x, w)
        if mass > 0 and tail <= _TAIL_MASS * mass and w >= 8.0 * sigma + abs(m1):
            # recenter on the drifted mean so the final pass resolves the
            # bulk instead of the empty flanks of an overgrown window
            w_fit = 10.0 * sigma + 2.0 * abs(m1)
            if 0 < w_fit < w / 2:
                xs = np.linspace(x + m1 - w_fit, x + m1 + w_fit, _QUAD_POINTS)
                p = np.asarray(density(xs), dtype=float)
                mass = float(np.trapezoid(p, xs))
            return xs, p, mass
        w *= 1.6
    raise QuadratureWindowError(
        f"no window up to half-width {w:.3g} captures the transition mass"
    )


def estimate_drift_diffusion(transition_density: Callable, epsilon: float,
                             points, window: Optional[float] = None) -> DriftDiffusion:
    """First two displacement moments of a short-time transition density.

    ``transition_density(x_next, x)`` must be vectorized in its first
    argument.  b+(x) = E[xi]/eps and D+(x) = E[xi^2]/eps with xi the
    displacement.  The quadrature window is widened automatically until it
    captures the density (assumes an O(1) diffusion scale); pass ``window``
    (a half-width) to pin it instead, which raises QuadratureWindowError
    when too narrow.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    b_out = np.empty_like(pts)
    d_out = np.empty_like(pts)
    for i, x in enumerate(pts):
        xs, p, mass = _quadrature_grid(
            lambda y: transition_density(y, x), float(x), epsilon, window)
        xi = xs - x
        b_out[i] = np.trapezoid(xi * p, xs) / epsilon / mass
        d_out[i] = np.trapezoid(xi * xi * p, xs) / epsilon / mass
    return DriftDiffusion(points=pts, b_plus=b_out, d_plus=d_out, epsilon=epsilon)


def _second_derivative(f: Callable, x: float) -> float:
    h = 1e-4 * (1.0 + abs(x))
    return (float(f(x + h)) - 2.0 * float(f(x)) + float(f(x - h))) / (h * h)


def kernel_integral_defect(theta: Callable, theta_dot: Callable, d: float,
                           b_plus: Callable, epsilon: float, points) -> DefectSample:
    """Row-integral shortfall of K(x'|x) = P+(x'|x) theta_t(x)/theta_t+eps(x').

    With the drift locked to b+ = D theta'/theta, (1 - int K dx')/eps tends
    to theta_dot/theta + (D/2) theta''/theta as eps -> 0; the sample carries
    both the measured defect and that analytic target.
    """
    if not d > 0:
        raise StateError("diffusion coefficient must be positive")
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    defect = np.empty_like(pts)
    analytic = np.empty_like(pts)
    sigma = np.sqrt(d * epsilon)
    for i, x in enumerate(pts):
        th_x = float(theta(x))
        if th_x <= 0:
            raise SupportError(f"theta vanishes at the sample point {x:.3g}")
        drift = float(b_plus(x))
        center = x + drift * epsilon
        half = 10.0 * sigma + abs(drift) * epsilon
        xs = np.linspace(center - half, center + half, _QUAD_POINTS)
        th_next = np.asarray(theta(xs), dtype=float) + epsilon * np.asarray(
            theta_dot(xs), dtype=float)
        if np.any(th_next <= 0):
            raise SupportError("theta vanishes inside the quadrature window")
        gauss = np.exp(-((xs - center) ** 2) / (2 * sigma * sigma))
        gauss /= np.sqrt(2 * np.pi) * sigma
        k_row = gauss * th_x / th_next
        defect[i] = (1.0 - np.trapezoid(k_row, xs)) / epsilon
        analytic[i] = (float(theta_dot(x)) / th_x
                       + 0.5 * d * _second_derivative(theta, x) / th_x)
    return DefectSample(points=pts, defect=defect, analytic=analytic)


def symmetrize_process(q_plus: Callable, q_minus: Callable, q: Callable,
                       epsilon: float, probe=None) -> TransitionPair:
    """Average a generic process with its time reverse.

    ``q_plus(x_next, x)`` and ``q_minus(x_prev, x_later)`` are forward and
    backward transition densities, ``q`` the current marginal; all three
    must broadcast over numpy arguments.  The backward density has to agree
    with the Bayes inversion of the forward one through ``q`` to O(eps);
    the symmetrized process P+ = (Q+ + Q-)/2 is returned with ``backward``
    literally the same object as ``forward``.
    """
    pts = (np.atleast_1d(np.asarray(probe, dtype=float)) if probe is not None
           else np.linspace(-1.0, 1.0, 9))
    worst = 0.0
    for x in pts:
        x = float(x)
        xs, fwd, _ = _quadrature_grid(lambda y: q_plus(y, x), x, epsilon, None)
        # joint mass both ways; the backward factor uses the marginal one
        # step late, which costs O(eps) and sets the tolerance scale
        lhs = fwd * float(q(x))
        rhs = np.asarray(q_minus(x, xs), dtype=float) * np.asarray(q(xs), dtype=float)
        scale = max(lhs.max(), rhs.max())
        if scale > 0:
            worst = max(worst, np.abs(lhs - rhs).max() / scale)
    if worst > 50.0 * epsilon:
        raise StateError(
            f"backward density off Bayes inversion by {worst:.3g} "
            f"(allowed {50.0 * epsilon:.3g})"
        )

    def symmetric(x_next, x):
        return 0.5 * (np.asarray(q_plus(x_next, x), dtype=float)
                      + np.asarray(q_minus(x_next, x), dtype=float))

    return TransitionPair(forward=symmetric, backward=symmetric)

"""Chain belief propagation with square-root-of-Z message normalization.

Partial partition functions are swept once in each direction (chains are
trees, so this is exact) and normalized by sqrt(Z) instead of per step.
The resulting messages multiply to the site marginals, their log-ratio is
a real per-site phase, and for kernel-built chains the forward recursion
is a discrete imaginary-time Schrodinger evolution.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .caliber import TransitionPair, markov_decompose
from .errors import StateError, UnresolvedGaussianError, ZeroPartitionError
from .factors import FactorChain


@dataclass(frozen=True)
class CavityMessages:
    """Both message sweeps of one chain, sqrt(Z)-normalized.

    ``mu_forward[l]``/``mu_backward[l]`` are the partial partition
    functions into site l from the left/right, divided by sqrt(Z).  Their
    product, weighted by the chain's quadrature weight, is the single-site
    marginal.  Z, and with it the end-site messages, is typically
    exponentially large, so each message is stored as a unit-sum vector
    (``nu_forward``/``nu_backward`` -- also the conventionally normalized
    messages kept for comparison) plus a log magnitude, and the linear-
    scale views are derived; marginals and phases are always computed in
    log space and stay finite even when a raw message would not.
    """

    nu_forward: tuple
    nu_backward: tuple
    log_forward: tuple
    log_backward: tuple
    log_z: float
    weight: float = 1.0

    def __post_init__(self):
        if not (len(self.nu_forward) == len(self.nu_backward)
                == len(self.log_forward) == len(self.log_backward)):
            raise StateError("sweeps disagree on the number of sites")
        for site, (fwd, bwd) in enumerate(zip(self.nu_forward,
                                              self.nu_backward)):
            if fwd.shape != bwd.shape:
                raise StateError("sweeps disagree on a site dimension")
            total = self.weight * float(fwd @ bwd) * np.exp(
                self.log_forward[site] + self.log_backward[site] - self.log_z)
            if abs(total - 1.0) > 1e-9:
                raise StateError(f"message product sums to {total!r}, not 1")

    @property
    def z(self) -> float:
        if self.log_z > 709.0:  # too large for a float; the log is the API
            return float("inf")
        return float(np.exp(self.log_z))

    @property
    def n_sites(self) -> int:
        return len(self.nu_forward)

    @property
    def mu_forward(self) -> tuple:
        return tuple(v * np.exp(s - self.log_z / 2)
                     for v, s in zip(self.nu_forward, self.log_forward))

    @property
    def mu_backward(self) -> tuple:
        return tuple(v * np.exp(s - self.log_z / 2)
                     for v, s in zip(self.nu_backward, self.log_backward))

    def marginal(self, site: int) -> np.ndarray:
        """Single-site probability mass w * mu_fwd * mu_bwd."""
        scale = np.exp(self.log_forward[site] + self.log_backward[site]
                       - self.log_z)
        return self.weight * scale * self.nu_forward[site] \
            * self.nu_backward[site]


@dataclass(frozen=True)
class PhaseField:
    """Per-site marginal densities and phases carried by the messages.

    ``p[l]`` is mu_fwd * mu_bwd at site l (a density: its weight-ed sum is
    one) and ``phi[l]`` the half log-ratio, NaN wherever p vanishes since
    the ratio is undefined there.
    """

    p: tuple
    phi: tuple


class ResidualPair(NamedTuple):
    forward: np.ndarray
    backward: np.ndarray


def _sweep(factors, start, weight, reverse: bool):
    """L1-scaled message recursion with the magnitude kept in log space."""
    v = np.asarray(start, dtype=float)
    total = v.sum()
    if total <= 0:
        raise ZeroPartitionError("boundary message has no mass")
    v = v / total
    log_scale = float(np.log(total))
    out = [(v, log_scale)]
    seq = reversed(factors) if reverse else factors
    for f in seq:
        v = weight * (f @ v) if reverse else weight * (v @ f)
        total = v.sum()
        if total <= 0:
            raise ZeroPartitionError("message annihilated mid-chain")
        v = v / total
        log_scale += float(np.log(total))
        out.append((v, log_scale))
    if reverse:
        out.reverse()
    return out


def bp_sweep(chain: FactorChain) -> CavityMessages:
    """Exact forward/backward message passing over an open chain."""
    fwd = _sweep(chain.factors, chain.boundary("left"), chain.weight, False)
    bwd = _sweep(chain.factors, chain.boundary("right"), chain.weight, True)
    # Z = w * sum_x Zfwd_l(x) Zbwd_l(x), the same at every site
    v0, s0 = fwd[0]
    w0, t0 = bwd[0]
    overlap = float(v0 @ w0)
    if overlap <= 0 or chain.weight <= 0:
        raise ZeroPartitionError("chain has zero partition function")
    log_z = np.log(chain.weight) + np.log(overlap) + s0 + t0
    return CavityMessages(
        nu_forward=tuple(v for v, _ in fwd),
        nu_backward=tuple(v for v, _ in bwd),
        log_forward=tuple(s for _, s in fwd),
        log_backward=tuple(s for _, s in bwd),
        log_z=float(log_z), weight=chain.weight,
    )


def phase_decompose(messages: CavityMessages) -> PhaseField:
    """Split the message pairs into marginal densities p and phases phi.

    p = mu_fwd * mu_bwd and phi = log(mu_fwd / mu_bwd) / 2 per site, so
    that mu_fwd = sqrt(p) e^phi and mu_bwd = sqrt(p) e^-phi.
    """
    ps, phis = [], []
    for s in range(messages.n_sites):
        fwd = messages.nu_forward[s]
        bwd = messages.nu_backward[s]
        log_gap = messages.log_forward[s] - messages.log_backward[s]
        p = fwd * bwd * np.exp(messages.log_forward[s]
                               + messages.log_backward[s] - messages.log_z)
        on = p > 0
        phi = np.full_like(p, np.nan)
        phi[on] = 0.5 * (np.log(fwd[on]) - np.log(bwd[on]) + log_gap)
        ps.append(p)
        phis.append(phi)
    return PhaseField(p=tuple(ps), phi=tuple(phis))


def pairwise_from_messages(messages: CavityMessages, chain: FactorChain,
                           site: int) -> np.ndarray:
    """Edge marginal w^2 * mu_fwd(x) F(x,x') mu_bwd(x')."""
    f = chain.factors[site]
    scale = np.exp(messages.log_forward[site]
                   + messages.log_backward[site + 1] - messages.log_z)
    return (messages.weight ** 2 * scale
            * messages.nu_forward[site][:, None] * f
            * messages.nu_backward[site + 1][None, :])


def transitions_from_messages(messages: CavityMessages, chain: FactorChain):
    """Per-edge forward/backward conditionals straight from the messages.

    P+(x'|x) = w F(x,x') mu_bwd_{l+1}(x') / mu_bwd_l(x) and its backward
    mirror; zero-marginal states are excluded like in markov_decompose.
    """
    out = []
    w = messages.weight
    for site, f in enumerate(chain.factors):
        bwd_here = messages.nu_backward[site]
        fwd_next = messages.nu_forward[site + 1]
        gap_b = np.exp(messages.log_backward[site + 1]
                       - messages.log_backward[site])
        gap_f = np.exp(messages.log_forward[site]
                       - messages.log_forward[site + 1])
        num_f = w * gap_b * f * messages.nu_backward[site + 1][None, :]
        num_b = w * gap_f * messages.nu_forward[site][:, None] * f
        on_l = messages.marginal(site) > 0
        on_r = messages.marginal(site + 1) > 0
        forward = np.divide(num_f, bwd_here[:, None],
                            out=np.zeros_like(num_f),
                            where=on_l[:, None] & (bwd_here > 0)[:, None])
        backward = np.divide(num_b, fwd_next[None, :],
                             out=np.zeros_like(num_b),
                             where=on_r[None, :] & (fwd_next > 0)[None, :])
        out.append(TransitionPair(
            forward=forward, backward=backward,
            excluded_left=tuple(np.flatnonzero(~on_l)),
            excluded_right=tuple(np.flatnonzero(~on_r)),
        ))
    return out


def phase_free_chain(chain: FactorChain) -> FactorChain:
    """Rewrite a discrete chain so every phase vanishes.

    Replaces each factor by the symmetric K of its exact pairwise marginal
    and the boundaries by the square roots of the end marginals; all
    marginals are preserved and bp_sweep yields mu_fwd = mu_bwd = sqrt(p)
    site by site.
    """
    if chain.weight != 1.0:
        raise StateError("phase removal is defined for unit-weight chains")
    from . import oracle

    table = oracle.enumerate_joint(chain)
    ks = []
    for site in range(len(chain.factors)):
        pair = oracle.pairwise_marginal(table, site)
        _, sym = markov_decompose(pair, oracle.marginal(table, site),
                                  oracle.marginal(table, site + 1),
                                  atol=1e-8)
        ks.append(sym.k)
    theta_first = np.sqrt(oracle.marginal(table, 0))
    theta_last = np.sqrt(oracle.marginal(table, table.n_sites - 1))
    return FactorChain(factors=tuple(ks), boundary_left=theta_first,
                       boundary_right=theta_last, meta=chain.meta)


def continuum_residual(chain: FactorChain, site: int, grid=None,
                       potential=None) -> ResidualPair:
    """Discrete imaginary-time Schrodinger defect of both messages.

    For a chain of kinetic-plus-potential step kernels on a grid, checks
    -hbar_eff d_t mu + (hbar_eff^2/2m) mu'' - V mu at ``site`` with the
    one-sided time difference the recursion provides; the backward message
    satisfies the time-reversed analogue.  Both vectors shrink at first
    order in the step.  ``grid`` and ``potential`` fall back to the
    chain's meta entries of the same names.
    """
    meta = chain.meta if isinstance(chain.meta, dict) else {}
    grid = grid if grid is not None else meta.get("grid")
    potential = potential if potential is not None else meta.get("potential")
    spec = meta.get("spec")
    if grid is None or potential is None or spec is None:
        raise StateError("need the grid, potential and caliber spec")
    if site < 1 or site > len(chain.factors) - 1:
        raise StateError("residual needs both neighbors of the site")
    hbar = spec.hbar_eff
    mass = spec.mass if spec.mass is not None else 1.0
    eps = spec.epsilon
    if np.sqrt(hbar * eps / mass) < 2 * grid.delta:
        raise UnresolvedGaussianError(
            "step kernel is narrower than two grid spacings")
    v = np.asarray(potential(grid.points), dtype=float)

    def lap(u):
        return (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / grid.delta ** 2

    messages = bp_sweep(chain)
    mf_here = messages.mu_forward[site]
    mf_prev = messages.mu_forward[site - 1]
    mb_here = messages.mu_backward[site]
    mb_next = messages.mu_backward[site + 1]
    forward = (-hbar * (mf_here - mf_prev) / eps
               + hbar ** 2 / (2 * mass) * lap(mf_here) - v * mf_here)
    backward = (-hbar * (mb_here - mb_next) / eps
                + hbar ** 2 / (2 * mass) * lap(mb_here) - v * mb_here)
    return ResidualPair(forward=forward, backward=backward)

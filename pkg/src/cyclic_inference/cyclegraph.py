"""Probability matrices on factor cycles and their non-commutative update.

The joint over a cycle is the trace of a matrix product, so single-site
marginals sit on the diagonal of the cyclically permuted product
P_site = F_site ... F_n F_1 ... (trace-normalized).  Advancing one site is
the similarity transform P -> F^{-1} P F, whose small-step limit is the
commutator equation dP/dt = [J, P].  The remaining pieces make the cycle
tractable: the Bernstein decomposition conditions every interior site on
the endpoint pair, clamping the endpoints turns the cycle into an exact
chain, and experiment cycles reduce their observer path to a single
effective wrap factor.

Conventions: sites are labelled 1..n as in the factor-product notation;
states are 0-based array indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import oracle
from .errors import (
    FactorError,
    IllConditionedFactorError,
    StateError,
    ZeroPartitionError,
)
from .factors import FactorChain, FactorCycle

__all__ = [
    "CONDITION_CAP",
    "STEP_BOUND",
    "ProbabilityMatrix",
    "BernsteinDecomposition",
    "cycle_probability_matrix",
    "cycle_update",
    "continuum_commutator_check",
    "eigenstate_matrix",
    "pure_state_factors",
    "bernstein_decompose",
    "clamp_cycle",
    "experiment_cycle",
    "observer_reduced_cycle",
    "same_topology",
]

CONDITION_CAP = 1e8
STEP_BOUND = 0.1


@dataclass(frozen=True)
class ProbabilityMatrix:
    """Real square matrix whose diagonal carries the site marginal.

    ``site`` is the 1-based label of the site the product starts at; it
    keeps counting upward under updates (site n+1 is site 1 again).  The
    diagonal must be nonnegative up to similarity-update roundoff and,
    when ``normalized``, sum to 1 within 1e-12.
    """

    matrix: np.ndarray
    site: int
    normalized: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if np.iscomplexobj(m):
            raise StateError("probability matrices are real")
        m = m.astype(float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError(f"matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise StateError("matrix has non-finite entries")
        scale = max(1.0, np.abs(m).max())
        diag = np.diag(m)
        if diag.min() < -1e-9 * scale:
            raise StateError(
                f"diagonal entry {diag.min():g} is negative beyond roundoff"
            )
        if self.normalized and abs(diag.sum() - 1.0) > 1e-12:
            raise StateError(
                f"normalized matrix has trace {diag.sum()!r}, expected 1"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def marginal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))


@dataclass(frozen=True)
class BernsteinDecomposition:
    """Cycle joint as endpoint pair times interior one-step conditionals.

    ``endpoint_marginal[x_1, x_n]`` is the joint of the first and last
    site.  ``conditionals[l-1][x_l, x_n, x_next]`` is
    P(x_{l+1} | x_l, x_n) for l = 1..n-2, row-stochastic over the last
    axis wherever the conditioning pair has mass (rows of excluded pairs
    are all-zero).
    """

    endpoint_marginal: np.ndarray
    conditionals: tuple

    def __post_init__(self):
        end = np.asarray(self.endpoint_marginal, dtype=float)
        if end.ndim != 2 or np.any(end < 0):
            raise StateError("endpoint marginal must be a nonnegative matrix")
        if abs(end.sum() - 1.0) > 1e-12:
            raise StateError(f"endpoint marginal sums to {end.sum()!r}")
        conds = tuple(np.asarray(c, dtype=float) for c in self.conditionals)
        for i, c in enumerate(conds):
            if c.ndim != 3 or np.any(c < 0):
                raise StateError(f"conditional {i} must be a nonnegative 3-tensor")
            sums = c.sum(axis=-1)
            bad = np.abs(sums - 1.0) > 1e-9
            if np.any(bad & (sums > 0)):
                raise StateError(f"conditional {i} has a non-stochastic row")
        object.__setattr__(self, "endpoint_marginal", end)
        object.__setattr__(self, "conditionals", conds)

    @property
    def n_sites(self) -> int:
        return len(self.conditionals) + 2

    def reconstruct(self) -> np.ndarray:
        """Multiply the decomposition back into the full joint tensor."""
        # work with x_n as the leading axis so each conditional broadcasts
        s = self.endpoint_marginal.T
        for c in self.conditionals:
            ct = np.moveaxis(c, 1, 0)  # (q_n, q_l, q_{l+1})
            expand = (slice(None),) + (None,) * (s.ndim - 2)
            s = s[..., None] * ct[expand]
        return np.moveaxis(s, 0, -1)


def _product(mats):
    """Left-to-right product with power-of-two rescaling far from 1.

    Rescaling by powers of two is exact, so moderate products are
    bit-identical to the naive matmul chain while extreme ones cannot
    overflow before the final trace normalization cancels the scale.
    """
    prod = mats[0]
    for m in mats[1:]:
        prod = prod @ m
        peak = np.abs(prod).max()
        if peak == 0.0:
            raise ZeroPartitionError("factor product vanished identically")
        if peak > 2.0 ** 256 or peak < 2.0 ** -256:
            prod = prod * 2.0 ** -np.floor(np.log2(peak))
    return prod


def cycle_probability_matrix(cycle: FactorCycle, site: int) -> ProbabilityMatrix:
    """Trace-normalized cyclic product starting at ``site`` (1-based).

    The diagonal of the result is the marginal of that site under the
    cycle joint; the trace of the unnormalized product is the partition
    function, and a zero trace is an error.
    """
    n = cycle.n_sites
    if not 1 <= site <= n:
        raise StateError(f"site {site} outside 1..{n}")
    order = cycle.factors[site - 1:] + cycle.factors[:site - 1]
    prod = _product(order)
    tr = np.trace(prod)
    if tr <= 0.0:
        raise ZeroPartitionError(
            f"cyclic product starting at site {site} has trace {tr!r}"
        )
    return ProbabilityMatrix(matrix=prod / tr, site=site, normalized=True)


def cycle_update(p: ProbabilityMatrix, factor) -> ProbabilityMatrix:
    """One-site advance P -> F^{-1} P F of the probability matrix.

    Refuses singular or ill-conditioned factors (2-norm condition number
    above CONDITION_CAP); the trace is invariant under the similarity.
    """
    f = np.asarray(factor, dtype=float)
    if f.shape != p.matrix.shape:
        raise FactorError(f"factor shape {f.shape} does not match {p.matrix.shape}")
    if not np.all(np.isfinite(f)):
        raise FactorError("factor has non-finite entries")
    cond = np.linalg.cond(f)
    if not np.isfinite(cond) or cond > CONDITION_CAP:
        raise IllConditionedFactorError(
            f"factor condition number {cond:.3g} exceeds {CONDITION_CAP:g}"
        )
    updated = np.linalg.solve(f, p.matrix) @ f
    return ProbabilityMatrix(matrix=updated, site=p.site + 1,
                             normalized=p.normalized)


def continuum_commutator_check(j, dt: float, steps: int, p0) -> float:
    """Worst deviation of iterated updates from the commutator flow.

    Iterates cycle_update with the near-identity factor F = I - J*dt and
    compares every step against a high-order integration of
    dP/dt = [J, P]; the gap shrinks linearly in dt.  Accepts the
    generator as a plain matrix or a DynamicalMatrix.
    """
    jm = np.asarray(getattr(j, "j", j), dtype=float)
    if jm.ndim != 2 or jm.shape[0] != jm.shape[1]:
        raise StateError(f"generator must be square, got {jm.shape}")
    if steps < 1:
        raise StateError("need at least one step")
    jnorm = np.linalg.norm(jm, 2)
    if dt <= 0 or dt * jnorm > STEP_BOUND * (1 + 1e-12):
        raise StateError(
            f"step too large: dt*|J| = {dt * jnorm:.3g} exceeds {STEP_BOUND}"
        )
    if isinstance(p0, ProbabilityMatrix):
        p = p0
    else:
        m = np.asarray(p0, dtype=float)
        p = ProbabilityMatrix(m, site=1,
                              normalized=abs(np.trace(m) - 1.0) <= 1e-12)
    f = np.eye(jm.shape[0]) - jm * dt
    reference = oracle.evolve_commutator_rk4(jm, p.matrix, dt, steps)
    worst = 0.0
    for k in range(1, steps + 1):
        p = cycle_update(p, f)
        worst = max(worst, np.abs(p.matrix - reference[k]).max())
    return worst


def eigenstate_matrix(v: int, dim: int) -> ProbabilityMatrix:
    """Probability matrix of the definite state v: one 1 at (v, v)."""
    if not 0 <= v < dim:
        raise StateError(f"state {v} outside 0..{dim - 1}")
    m = np.zeros((dim, dim))
    m[v, v] = 1.0
    return ProbabilityMatrix(matrix=m, site=1, normalized=True)


def pure_state_factors(v: int, p_n, phi_n) -> tuple:
    """Single-row / single-column factor pair generating a pure state.

    Returns (F_ext, F_n) with F_ext(v, .) = sqrt(p_n) e^{-phi_n} its only
    nonzero row and F_n(., v) = sqrt(p_n) e^{phi_n} its only nonzero
    column.  Then F_ext @ F_n is exactly the eigenstate matrix at v while
    the permuted product F_n @ F_ext has diagonal p_n and off-diagonals
    sqrt(p p') e^{phi - phi'}.
    """
    p = np.asarray(p_n, dtype=float)
    phi = np.asarray(phi_n, dtype=float)
    if p.ndim != 1 or phi.shape != p.shape:
        raise StateError(
            f"p_n and phi_n must be matching vectors, got {p.shape}/{phi.shape}"
        )
    if np.any(p < 0) or not np.all(np.isfinite(p)) or abs(p.sum() - 1.0) > 1e-12:
        raise StateError("p_n is not a probability distribution")
    support = p > 0
    if not np.all(np.isfinite(phi[support])):
        raise StateError("phi_n must be finite wherever p_n is positive")
    if not 0 <= v < p.size:
        raise StateError(f"state {v} outside 0..{p.size - 1}")
    q = p.size
    amp = np.sqrt(p)
    f_ext = np.zeros((q, q))
    f_n = np.zeros((q, q))
    f_ext[v, support] = amp[support] * np.exp(-phi[support])
    f_n[support, v] = amp[support] * np.exp(phi[support])
    return f_ext, f_n


def bernstein_decompose(cycle: FactorCycle) -> BernsteinDecomposition:
    """Endpoint marginal plus interior conditionals of the cycle joint.

    Conditioned on the pair (x_1, x_n) the interior of the cycle is an
    exact Markov chain, so P(x_1..x_n) = P(x_1, x_n) * prod_l
    P(x_{l+1} | x_l, x_n); the factors here come straight from the
    enumerated joint.  Conditioning pairs with zero mass get all-zero
    rows (they contribute nothing to the reconstruction).
    """
    joint = oracle.enumerate_joint(cycle).probabilities
    n = joint.ndim
    if n < 3:
        return BernsteinDecomposition(endpoint_marginal=joint, conditionals=())
    endpoint = joint.sum(axis=tuple(range(1, n - 1)))
    conds = []
    for ell in range(1, n - 1):  # 0-based axis of x_{l+1}
        keep = (ell - 1, ell, n - 1)
        m3 = joint.sum(axis=tuple(a for a in range(n) if a not in keep))
        m2 = m3.sum(axis=1)  # over x_{l+1} -> (x_l, x_n)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.where(m2[:, None, :] > 0, m3 / m2[:, None, :], 0.0)
        conds.append(np.moveaxis(c, 1, 2))  # -> (x_l, x_n, x_{l+1})
    return BernsteinDecomposition(endpoint_marginal=endpoint,
                                  conditionals=tuple(conds))


def clamp_cycle(cycle: FactorCycle, x1_star: int, xn_star: int) -> FactorChain:
    """Open the cycle by pinning its endpoints to definite states.

    Drops the wrap factor F_n and installs delta boundary messages at
    x1_star / xn_star; sweeping the resulting chain reproduces the
    cycle's conditional marginals given (x_1, x_n) exactly.  A clamped
    configuration the cycle gives zero probability is refused.
    """
    counts = cycle.state_counts
    if not 0 <= x1_star < counts[0]:
        raise StateError(f"x1 clamp {x1_star} outside 0..{counts[0] - 1}")
    if not 0 <= xn_star < counts[-1]:
        raise StateError(f"xn clamp {xn_star} outside 0..{counts[-1] - 1}")
    interior = cycle.factors[:-1]
    wrap = cycle.factors[-1]
    through = reduce(np.matmul, interior)
    mass = through[x1_star, xn_star] * wrap[xn_star, x1_star]
    if mass <= 0.0:
        raise ZeroPartitionError(
            f"clamped configuration ({x1_star}, {xn_star}) has zero probability"
        )
    left = np.zeros(counts[0])
    left[x1_star] = 1.0
    right = np.zeros(counts[-1])
    right[xn_star] = 1.0
    return FactorChain(interior, boundary_left=left, boundary_right=right,
                       meta={"clamped": (x1_star, xn_star)})


def experiment_cycle(prep, ext, meas, dec, view: str = "ideomotor") -> FactorCycle:
    """Four-factor cycle of an observer running an experiment.

    Sites are (intent, initial state, final state, reading); the tables
    couple intent->initial (prep), initial->final (ext), final->reading
    (meas) and reading->intent (dec).  ``view`` only relabels the closing
    factor: "ideomotor" marks it dec (the reading drives the next
    intent), "simulation" marks it sim (the observer's model mirrors the
    external step); the induced graph is the same either way.
    """
    if view == "ideomotor":
        closing = "dec"
    elif view == "simulation":
        closing = "sim"
    else:
        raise ValueError(f"view must be 'ideomotor' or 'simulation', got {view!r}")
    return FactorCycle(factors=(prep, ext, meas, dec),
                       roles=("prep", "ext", "meas", closing))


def observer_reduced_cycle(cycle: FactorCycle) -> FactorCycle:
    """Collapse the observer path of a 4-site experiment cycle.

    Marginalizing the intent and reading sites chains meas, the closing
    factor and prep into one effective wrap factor coupling the final
    state back to the initial one; the reduced 2-site cycle has the same
    (initial, final) marginals as the full cycle.
    """
    if cycle.roles is None or cycle.n_sites != 4:
        raise FactorError("need a 4-site cycle with role labels")
    if cycle.roles[:3] != ("prep", "ext", "meas") or \
            cycle.roles[3] not in ("dec", "sim"):
        raise FactorError(f"unexpected role layout {cycle.roles}")
    prep, ext, meas, closing = cycle.factors
    effective = meas @ closing @ prep
    return FactorCycle(factors=(ext, effective), roles=("ext", "plain"))


def same_topology(a: FactorCycle, b: FactorCycle) -> bool:
    """Whether two cycles induce the same graph: site count and state
    counts agree position by position (factor values and roles do not
    enter)."""
    return a.n_sites == b.n_sites and a.state_counts == b.state_counts

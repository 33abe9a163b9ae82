"""Checks for the brute-force reference module itself.

enumerate_joint is validated against a second, deliberately naive
implementation (itertools over explicit python loops) so the two can only
agree by computing the same thing.
"""

import itertools

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from cyclic_inference import oracle
from cyclic_inference.errors import (
    ConfigurationOverflowError,
    NonHermitianError,
    StateError,
    ZeroPartitionError,
)
from cyclic_inference.factors import FactorChain, FactorCycle


def loop_joint(factors, cyclic, left=None, right=None):
    """Independent re-implementation: explicit python product loop."""
    counts = [f.shape[0] for f in factors]
    counts.append(factors[0].shape[0] if cyclic else factors[-1].shape[1])
    if cyclic:
        counts.pop()
    table = np.zeros(tuple(counts))
    for config in itertools.product(*[range(q) for q in counts]):
        w = 1.0
        for ell, f in enumerate(factors):
            w *= f[config[ell], config[(ell + 1) % len(counts)]]
        if not cyclic:
            if left is not None:
                w *= left[config[0]]
            if right is not None:
                w *= right[config[-1]]
        table[config] = w
    return table / table.sum()


def test_single_factor_chain_is_normalized_factor():
    f = np.array([[3.0, 1.0], [2.0, 2.0]])
    joint = oracle.enumerate_joint(FactorChain(factors=(f,)))
    assert_allclose(joint.probabilities, f / f.sum(), rtol=0, atol=1e-15)
    assert joint.z == pytest.approx(f.sum())


def test_identity_chain_concentrates_on_diagonal():
    eye = np.eye(2)
    joint = oracle.enumerate_joint(FactorChain(factors=(eye, eye)))
    expect = np.zeros((2, 2, 2))
    expect[0, 0, 0] = expect[1, 1, 1] = 0.5
    assert_allclose(joint.probabilities, expect, atol=0)


def test_random_chain_matches_loop_reimplementation():
    rng = np.random.default_rng(101)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        counts = [int(rng.integers(2, 5)) for _ in range(n)]
        factors = tuple(
            rng.uniform(0.1, 1.0, size=(counts[i], counts[i + 1]))
            for i in range(n - 1)
        )
        joint = oracle.enumerate_joint(FactorChain(factors=factors))
        assert_allclose(joint.probabilities, loop_joint(factors, cyclic=False),
                        rtol=0, atol=1e-14)


def test_random_cycle_matches_loop_reimplementation():
    rng = np.random.default_rng(202)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        q = int(rng.integers(2, 5))
        factors = tuple(rng.uniform(0.1, 1.0, size=(q, q)) for _ in range(n))
        joint = oracle.enumerate_joint(FactorCycle(factors=factors))
        assert joint.cyclic
        assert_allclose(joint.probabilities, loop_joint(factors, cyclic=True),
                        rtol=0, atol=1e-14)


def test_chain_boundaries_multiply_end_sites():
    rng = np.random.default_rng(7)
    factors = (rng.uniform(0.1, 1.0, (3, 2)), rng.uniform(0.1, 1.0, (2, 3)))
    left = np.array([1.0, 0.5, 0.0])
    right = np.array([0.2, 1.0, 3.0])
    chain = FactorChain(factors=factors, boundary_left=left, boundary_right=right)
    got = oracle.enumerate_joint(chain).probabilities
    assert_allclose(got, loop_joint(factors, False, left, right), rtol=0, atol=1e-14)
    assert got[2].sum() == 0.0  # boundary zero kills the state


def test_configuration_cap_enforced():
    f = np.ones((100, 100))
    with pytest.raises(ConfigurationOverflowError):
        oracle.enumerate_joint(FactorChain(factors=(f,) * 4))


def test_zero_product_raises():
    f = np.zeros((2, 2))
    with pytest.raises(ZeroPartitionError):
        oracle.enumerate_joint(FactorChain(factors=(f,)))


def test_marginals_sum_to_one_and_match_loop():
    rng = np.random.default_rng(33)
    factors = tuple(rng.uniform(0.1, 1.0, (3, 3)) for _ in range(4))
    joint = oracle.enumerate_joint(FactorCycle(factors=factors))
    for site in range(4):
        m = oracle.marginal(joint, site)
        assert m.sum() == pytest.approx(1.0, abs=1e-12)
        pair = oracle.pairwise_marginal(joint, site)
        assert_allclose(pair.sum(axis=1), m, atol=1e-14)
        assert_allclose(pair.sum(axis=0), oracle.marginal(joint, (site + 1) % 4),
                        atol=1e-14)


def test_wrap_pair_orientation():
    # cycle pair (last, first) must be indexed [x_last, x_first]
    rng = np.random.default_rng(44)
    factors = tuple(rng.uniform(0.1, 1.0, (2, 2)) for _ in range(3))
    joint = oracle.enumerate_joint(FactorCycle(factors=factors))
    pair = oracle.pairwise_marginal(joint, 2)
    p = joint.probabilities
    manual = np.einsum("abc->ca", p)
    assert_allclose(pair, manual, atol=1e-15)


def test_open_chain_last_site_has_no_successor():
    joint = oracle.enumerate_joint(FactorChain(factors=(np.ones((2, 2)),)))
    with pytest.raises(IndexError):
        oracle.pairwise_marginal(joint, 1)


# --- closed-form density propagation ---------------------------------------


def test_dephasing_quarter_period():
    # diag(1,-1) generator flips the coherence sign after t = pi/2
    h = np.array([[1.0, 0.0], [0.0, -1.0]])
    rho0 = 0.5 * np.ones((2, 2))
    out = oracle.evolve_density_exact(h, rho0, np.pi / 2)
    assert_allclose(out.rho, 0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-14)


def test_matches_expm_propagator():
    rng = np.random.default_rng(55)
    for n in (2, 3, 5):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        h = (a + a.conj().T) / 2
        p = rng.uniform(0.1, 1.0, n)
        rho0 = np.diag(p / p.sum()).astype(complex)
        t = 0.7
        got = oracle.evolve_density_exact(h, rho0, t, hbar=1.3).rho
        u = scipy.linalg.expm(-1j * h * t / 1.3)
        assert_allclose(got, u @ rho0 @ u.conj().T, atol=1e-12)


def test_spectrum_and_trace_preserved():
    rng = np.random.default_rng(66)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (a + a.conj().T) / 2
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = b @ b.conj().T
    rho0 = m / np.trace(m).real
    out = oracle.evolve_density_exact(h, rho0, 3.1)
    assert np.trace(out.rho) == pytest.approx(1.0, abs=1e-12)
    assert_allclose(np.linalg.eigvalsh(out.rho), np.linalg.eigvalsh(rho0),
                    atol=1e-12)


def test_rejects_non_hermitian_and_bad_trace():
    with pytest.raises(NonHermitianError):
        oracle.evolve_density_exact(np.array([[0.0, 1.0], [0.0, 0.0]]),
                                    np.eye(2) / 2, 1.0)
    with pytest.raises(NonHermitianError):
        oracle.evolve_density_exact(np.eye(2), np.array([[0.5, 0.3], [0.0, 0.5]]),
                                    1.0)
    with pytest.raises(StateError):
        oracle.evolve_density_exact(np.eye(2), np.eye(2), 1.0)


def test_joint_table_rejects_unnormalized():
    with pytest.raises(StateError):
        oracle.JointTable(probabilities=np.array([0.5, 0.4]), z=1.0)

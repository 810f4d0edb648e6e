import numpy as np
import pytest
import scipy.linalg
import scipy.stats
from hypothesis import given, seed, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sbscv_lab.numerics.numkit import (DensityMatrix, fidelity, herm_expm, herm_expm_batch, kron, kron_all,
                                       operator_norm, partial_trace, psd_sqrt, purity, random_density_matrix,
                                       random_hermitian, random_unit_vector, trace_distance, trace_norm)
from sbscv_lab.utils.errors import InvalidInputError, ResourceError

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


def test_trace_norm_of_diagonal():
    assert trace_norm(np.diag([1.0, -2.0, 3j])) == pytest.approx(6.0)
    assert operator_norm(np.diag([1.0, -2.0, 3j])) == pytest.approx(3.0)


def test_trace_distance_of_orthogonal_pure_states():
    a = DensityMatrix.from_pure([1, 0])
    b = DensityMatrix.from_pure([0, 1])
    assert trace_distance(a, b) == pytest.approx(1.0)
    assert fidelity(a, b) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(a, a) == pytest.approx(1.0)


def test_fidelity_of_pure_states_is_squared_overlap(rng):
    psi, phi = random_unit_vector(5, rng), random_unit_vector(5, rng)
    expected = abs(np.vdot(psi, phi)) ** 2
    assert fidelity(np.outer(psi, psi.conj()), np.outer(phi, phi.conj())) == pytest.approx(expected, abs=1e-8)


def test_partial_trace_recovers_product_factors(rng):
    a, b = random_density_matrix(2, rng), random_density_matrix(3, rng)
    joint = DensityMatrix(np.kron(a, b), (2, 3))
    assert np.allclose(partial_trace(joint, [0]).mat, a)
    assert np.allclose(partial_trace(joint, [1]).mat, b)
    assert partial_trace(joint, [1, 0]).dims == (2, 3)


def test_partial_trace_rejects_bad_index(rng):
    joint = DensityMatrix(random_density_matrix(4, rng), (2, 2))
    with pytest.raises(InvalidInputError):
        partial_trace(joint, [2])
    with pytest.raises(InvalidInputError, match="at least one"):
        partial_trace(joint, [])


def test_kron_respects_cap():
    with pytest.raises(ResourceError):
        kron(np.eye(4), np.eye(4), cap=8)
    assert kron(np.eye(2), np.eye(4), cap=8).shape == (8, 8)


def test_empty_kron_is_one():
    assert np.array_equal(kron_all([]), np.ones((1, 1)))


def test_herm_expm_matches_scipy(rng):
    h = random_hermitian(6, rng)
    assert np.allclose(herm_expm(h, 0.7), scipy.linalg.expm(-0.7j * h))
    stack = herm_expm_batch(h, [0.0, 0.7, -1.3])
    assert np.allclose(stack[0], np.eye(6))
    assert np.allclose(stack[1], herm_expm(h, 0.7))
    assert np.allclose(stack[2] @ stack[2].conj().T, np.eye(6))


def test_herm_expm_rejects_non_hermitian():
    with pytest.raises(InvalidInputError):
        herm_expm(np.array([[0, 1], [0, 0]]), 1.0)


def test_psd_sqrt(rng):
    rho = random_density_matrix(5, rng)
    root = psd_sqrt(rho)
    assert np.allclose(root @ root, rho)
    with pytest.raises(InvalidInputError):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_density_matrix_validation():
    with pytest.raises(InvalidInputError, match="trace"):
        DensityMatrix(np.eye(2), (2,))
    with pytest.raises(InvalidInputError, match="negative"):
        DensityMatrix(np.diag([1.5, -0.5]), (2,))
    with pytest.raises(InvalidInputError):
        DensityMatrix(np.eye(4) / 4, (3,))
    assert purity(DensityMatrix.maximally_mixed(4)) == pytest.approx(0.25)


def test_random_density_matrix_rank(rng):
    rho = random_density_matrix(6, rng, rank=2)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.sum(scipy.linalg.eigvalsh(rho) > 1e-10) == 2


@seed(1)
@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite), arrays(np.float64, (4, 4), elements=finite))
def test_trace_norm_triangle_inequality(a, b):
    assert trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-9 * (1 + trace_norm(a) + trace_norm(b))


@seed(1)
@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.integers(min_value=2, max_value=8))
def test_fidelity_is_symmetric(state, dim):
    rng = np.random.default_rng(state)
    rho, sigma = random_density_matrix(dim, rng), random_density_matrix(dim, rng)
    forward, backward = fidelity(rho, sigma), fidelity(sigma, rho)
    assert forward == pytest.approx(backward, abs=1e-10)
    assert -1e-12 <= forward <= 1.0 + 1e-10


@seed(1)
@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite), arrays(np.float64, (4, 4), elements=finite))
def test_trace_norm_holder_inequality(a, c):
    bound = operator_norm(a) * trace_norm(c)
    assert trace_norm(a @ c) <= bound + 1e-9 * (1.0 + bound)


@seed(1)
@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite), st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_trace_norm_is_unitarily_invariant(a, state):
    u = scipy.stats.unitary_group.rvs(4, random_state=state)
    assert np.isclose(trace_norm(u @ a @ u.conj().T), trace_norm(a), rtol=1e-9, atol=1e-9)

import numpy as np
import pytest

from sbscv_lab.numerics.numkit import fidelity
from sbscv_lab.physics.envmodel import (EnvEnsemble, GaussianDecoherence, branch_state, characteristic_decay,
                                        characteristic_derivative, characteristic_function, check_truncation,
                                        joint_generator, joint_initial_state, make_oscillator_env, make_qubit_env,
                                        thermal_weights, used_s_range)
from sbscv_lab.utils.errors import ConfigurationError, InvalidInputError, TruncationError


def test_characteristic_function_at_zero():
    for env in (make_oscillator_env(8, "position", thermal_occupation=0.4), make_qubit_env(0.7, 0.2)):
        assert characteristic_function(env, 0.0) == pytest.approx(1.0)


def test_vacuum_position_oscillator_is_gaussian():
    env = make_oscillator_env(40, "position")
    s = np.linspace(-2.0, 2.0, 9)
    assert np.allclose(characteristic_function(env, s), np.exp(-s ** 2 / 4.0), atol=1e-8)
    assert np.allclose(characteristic_decay(env, s), np.exp(-s ** 2 / 4.0), atol=1e-8)


def test_qubit_characteristic_function():
    p = 0.3
    env = make_qubit_env(1.0, p)
    s = np.array([0.0, 0.5, np.pi])
    assert np.allclose(characteristic_function(env, s), (1 - p) + p * np.exp(-1j * s))
    assert np.allclose(characteristic_derivative(env, s), -1j * p * np.exp(-1j * s))


def test_derivative_matches_finite_difference():
    env = make_oscillator_env(10, "momentum", thermal_occupation=0.2)
    h = 1e-5
    numeric = (characteristic_function(env, 0.8 + h) - characteristic_function(env, 0.8 - h)) / (2 * h)
    assert characteristic_derivative(env, 0.8) == pytest.approx(numeric, abs=1e-8)


def test_thermal_weights():
    assert thermal_weights(5, 0.0)[0] == 1.0
    weights = thermal_weights(20, 1.0)
    assert weights.sum() == pytest.approx(1.0)
    assert np.all(np.diff(weights) < 0)


def test_truncation_check():
    converged = make_oscillator_env(40, "position")
    assert check_truncation(converged, used_s_range(2.0, 1.0, 1.0)) < 1e-6
    coarse = make_oscillator_env(4, "position")
    with pytest.raises(TruncationError):
        check_truncation(coarse, used_s_range(12.0, 1.0, 1.0))
    # qubits have no truncation to check
    assert check_truncation(make_qubit_env(), used_s_range(12.0, 5.0, 1.0)) == 0.0


def test_used_s_range():
    s = used_s_range(12.0, 0.5, 2.0)
    assert s.max() == pytest.approx(12.0)
    assert s.min() == pytest.approx(-12.0)


def test_environment_validation():
    with pytest.raises(ConfigurationError):
        make_oscillator_env(3, "position")
    with pytest.raises(ConfigurationError):
        make_oscillator_env(6, "qubit")
    with pytest.raises(ConfigurationError):
        make_qubit_env(excited_population=1.5)
    with pytest.raises(ConfigurationError):
        EnvEnsemble()
    with pytest.raises(InvalidInputError):
        GaussianDecoherence(0.0, 1.0)


def test_gaussian_decoherence_tau():
    assert GaussianDecoherence(0.5, 2.0).tau(3.0) == pytest.approx(4.5)
    assert GaussianDecoherence(1.0, 1.0).tau(0.0) == 0.0


def test_branch_state_is_pure_for_pure_env(position_env):
    rho = branch_state(position_env, 1.0, 0.7)
    assert np.trace(rho.mat).real == pytest.approx(1.0)
    assert np.trace(rho.mat @ rho.mat).real == pytest.approx(1.0)


def test_joint_generator_and_state(position_env):
    qubit = make_qubit_env(0.5, 0.25)
    S = joint_generator([position_env, qubit])
    assert S.shape == (12, 12)
    expected = np.kron(position_env.B, np.eye(2)) + 0.5 * np.kron(np.eye(6), qubit.B)
    assert np.allclose(S, expected)
    rho = joint_initial_state([position_env, qubit])
    assert rho.dims == (6, 2)
    assert joint_initial_state([]).dims == (1,)


def test_characteristic_function_symmetry_and_bound():
    s = np.linspace(-6.0, 6.0, 41)
    for env in (make_oscillator_env(12, "position", thermal_occupation=0.3), make_oscillator_env(12, "momentum"),
                make_qubit_env(0.7, 0.2)):
        chi = characteristic_function(env, s)
        assert np.allclose(characteristic_function(env, -s), np.conj(chi), atol=1e-12)
        assert np.all(np.abs(chi) <= 1.0 + 1e-12)


def test_branch_state_keeps_the_initial_spectrum():
    env = make_oscillator_env(10, "position", thermal_occupation=0.4)
    expected = np.linalg.eigvalsh(env.rho0.mat)
    for t, x in ((0.5, -1.2), (2.0, 0.3), (1.0, 2.5)):
        assert np.allclose(np.linalg.eigvalsh(branch_state(env, t, x).mat), expected, atol=1e-10)


def test_branches_separate_over_time():
    env = make_oscillator_env(40, "position")
    overlaps = [fidelity(branch_state(env, t, 1.0), branch_state(env, t, -1.0)) for t in np.linspace(0.0, 2.0, 9)]
    assert overlaps[0] == pytest.approx(1.0)
    assert np.all(np.diff(overlaps) <= 1e-10)

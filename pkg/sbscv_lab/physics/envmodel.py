"""
Finite-dimensional environments coupled to the system position.

An environment enters the dynamics only through exp(-i s B) rho0, so every
model caches the eigendecomposition of its generator once.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from sbscv_lab.numerics.numkit import DensityMatrix, as_cmatrix, herm_expm, is_hermitian
from sbscv_lab.utils.errors import ConfigurationError, InvalidInputError, TruncationError
from sbscv_lab.utils.lab_types import CMatrix, EnvKind
from sbscv_lab.utils.logger import LogManager

TRUNCATION_TOL = 1e-6
MIN_OSCILLATOR_DIM = 4


@dataclass(frozen=True, eq=False)
class EnvModel:
    B: CMatrix
    g: float
    rho0: DensityMatrix
    label: str = "env"
    # Rebuilds the same model at another truncation; set for oscillators only
    rebuild: Optional[Callable[[int], 'EnvModel']] = field(default=None, repr=False)

    def __post_init__(self):
        B = as_cmatrix(self.B, "generator B")
        if not is_hermitian(B):
            raise InvalidInputError(f"Generator of {self.label} is not Hermitian")
        if self.rho0.dim != B.shape[0]:
            raise InvalidInputError(
                f"Initial state dimension {self.rho0.dim} does not match generator dimension {B.shape[0]}")
        if not np.isfinite(self.g):
            raise InvalidInputError(f"Coupling of {self.label} must be finite")
        object.__setattr__(self, 'B', B)

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    @cached_property
    def spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        """Eigenvalues of B and the weights diag(V^dag rho0 V) in its eigenbasis."""
        w, v = scipy.linalg.eigh(self.B, check_finite=False)
        weights = np.real(np.einsum('ki,kl,li->i', v.conj(), self.rho0.mat, v))
        return w, weights

    @cached_property
    def is_pure(self) -> bool:
        return abs(float(np.real(np.trace(self.rho0.mat @ self.rho0.mat))) - 1.0) < 1e-10


@dataclass(frozen=True)
class GaussianDecoherence:
    """Closed-form traced environment with Gamma = exp(-t**n_exp * alpha * (x - y)**2)."""
    alpha: float
    n_exp: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        if not self.n_exp > 0:
            raise InvalidInputError(f"n_exp must be positive, got {self.n_exp}")

    def tau(self, t: float) -> float:
        return float(t) ** self.n_exp * self.alpha


@dataclass(frozen=True)
class EnvEnsemble:
    traced: Tuple[EnvModel, ...] = ()
    observed: Tuple[EnvModel, ...] = ()
    closed_form: Optional[GaussianDecoherence] = None

    def __post_init__(self):
        object.__setattr__(self, 'traced', tuple(self.traced))
        object.__setattr__(self, 'observed', tuple(self.observed))
        if not self.traced and not self.observed and self.closed_form is None:
            raise ConfigurationError("An ensemble needs at least one environment")

    @property
    def observed_dims(self) -> Tuple[int, ...]:
        return tuple(env.dim for env in self.observed)

    @property
    def traced_dims(self) -> Tuple[int, ...]:
        return tuple(env.dim for env in self.traced)


def characteristic_function(env: EnvModel, s):
    """Tr{exp(-i s B) rho0}; vectorized over s."""
    w, weights = env.spectrum
    s_arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s_arr)):
        raise InvalidInputError("Non-finite argument to characteristic function")
    values = np.exp(-1j * s_arr[..., None] * w) @ weights
    return complex(values) if values.ndim == 0 else values


def characteristic_derivative(env: EnvModel, s):
    """d/ds Tr{exp(-i s B) rho0}."""
    w, weights = env.spectrum
    s_arr = np.asarray(s, dtype=float)
    values = np.exp(-1j * s_arr[..., None] * w) @ (-1j * w * weights)
    return complex(values) if values.ndim == 0 else values


def characteristic_decay(env: EnvModel, s_values) -> np.ndarray:
    return np.abs(characteristic_function(env, np.asarray(s_values, dtype=float)))


def ladder_operator(dim: int) -> CMatrix:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(np.complex128)


def thermal_weights(dim: int, occupation: float) -> np.ndarray:
    """Truncated Gibbs weights with exp(-beta) = n / (n + 1), normalized."""
    if occupation == 0:
        weights = np.zeros(dim)
        weights[0] = 1.0
        return weights
    ratio = occupation / (occupation + 1.0)
    weights = ratio ** np.arange(dim)
    return weights / weights.sum()


def make_oscillator_env(dim: int, kind, thermal_occupation: float = 0.0, coupling: float = 1.0,
                        label: Optional[str] = None) -> EnvModel:
    kind = EnvKind(kind)
    if kind == EnvKind.qubit:
        raise ConfigurationError("Use make_qubit_env for two-level environments")
    if dim < MIN_OSCILLATOR_DIM:
        raise ConfigurationError(f"Oscillator truncation must be at least {MIN_OSCILLATOR_DIM}, got {dim}")
    if thermal_occupation < 0 or not np.isfinite(thermal_occupation):
        raise ConfigurationError(f"Thermal occupation must be >= 0, got {thermal_occupation}")

    a = ladder_operator(dim)
    if kind == EnvKind.position:
        B = (a + a.conj().T) / np.sqrt(2.0)
    elif kind == EnvKind.momentum:
        B = 1j * (a.conj().T - a) / np.sqrt(2.0)
    else:
        B = a.conj().T @ a

    rho0 = DensityMatrix(np.diag(thermal_weights(dim, thermal_occupation)).astype(np.complex128), (dim,))
    return EnvModel(
        B=B,
        g=float(coupling),
        rho0=rho0,
        label=label or f"{kind.value}-oscillator[{dim}]",
        rebuild=lambda new_dim: make_oscillator_env(new_dim, kind, thermal_occupation, coupling, label),
    )


def make_qubit_env(coupling: float = 1.0, excited_population: float = 0.5,
                   label: Optional[str] = None) -> EnvModel:
    """B = diag(0, 1) with a diagonal initial state."""
    if not 0.0 <= excited_population <= 1.0:
        raise ConfigurationError(f"Excited population must lie in [0, 1], got {excited_population}")
    rho0 = DensityMatrix(np.diag([1.0 - excited_population, excited_population]).astype(np.complex128), (2,))
    return EnvModel(B=np.diag([0.0, 1.0]).astype(np.complex128), g=float(coupling), rho0=rho0,
                    label=label or "qubit")


def branch_state(env: EnvModel, t: float, x: float) -> DensityMatrix:
    """exp(-i t x g B) rho0 exp(i t x g B)."""
    u = herm_expm(env.B, float(t) * float(x) * env.g)
    return DensityMatrix(u @ env.rho0.mat @ u.conj().T, (env.dim,), check=False)


def truncation_deviation(env: EnvModel, s_values) -> float:
    if env.rebuild is None:
        return 0.0
    s = np.asarray(s_values, dtype=float)
    doubled = env.rebuild(2 * env.dim)
    return float(np.max(np.abs(characteristic_function(env, s) - characteristic_function(doubled, s))))


def check_truncation(env: EnvModel, s_values, tol: float = TRUNCATION_TOL) -> float:
    """Raise TruncationError unless doubling the truncation leaves gamma(s) unchanged within tol."""
    deviation = truncation_deviation(env, s_values)
    if deviation >= tol:
        LogManager().get_logger("EnvModel").error(
            f"{env.label}: characteristic function moves by {deviation:.3e} when doubling the truncation")
        raise TruncationError(
            f"{env.label} is not converged: doubling dim {env.dim} changes gamma(s) by {deviation:.3e} (tol {tol:g})")
    return deviation


def used_s_range(grid_length: float, t: float, coupling: float, samples: int = 257) -> np.ndarray:
    """Arguments s = t (x - y) g reachable on a grid of the given length."""
    s_max = abs(t * coupling) * grid_length
    return np.linspace(-s_max, s_max, samples)


def joint_generator(observed: Sequence[EnvModel]) -> CMatrix:
    """Sum of g_k B_k lifted to the tensor product of the observed spaces."""
    dims = [env.dim for env in observed]
    total = int(np.prod(dims)) if dims else 1
    S = np.zeros((total, total), dtype=np.complex128)
    for k, env in enumerate(observed):
        left = int(np.prod(dims[:k])) if k else 1
        right = int(np.prod(dims[k + 1:])) if k + 1 < len(dims) else 1
        S += env.g * np.kron(np.kron(np.eye(left), env.B), np.eye(right))
    return S


def joint_initial_state(observed: Sequence[EnvModel]) -> DensityMatrix:
    mat = np.ones((1, 1), dtype=np.complex128)
    for env in observed:
        mat = np.kron(mat, env.rho0.mat)
    dims = tuple(env.dim for env in observed) or (1,)
    return DensityMatrix(mat, dims, check=False)

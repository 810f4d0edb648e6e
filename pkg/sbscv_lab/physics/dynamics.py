"""
Joint system-environment evolution under exp(-i t X (x) sum_k g_k B_k).

Two routes produce the reduced state on system + observed environments:
``evolve_full`` simulates every environment and traces the unobserved ones,
``lemma_rhs`` applies the decoherence kernel of the traced environments and
only simulates the observed ones. Factor order is always
(system, observed..., traced...).
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from sbscv_lab.numerics.numkit import (DensityMatrix, dimension_cap, herm_expm_batch, kron, kron_all,
                                       partial_trace)
from sbscv_lab.physics.cvgrid import CvDensity, Grid
from sbscv_lab.physics.envmodel import EnvEnsemble, EnvModel, joint_generator, joint_initial_state
from sbscv_lab.physics.kernels import GammaKernel, apply_decoherence, gamma_from_envs, gaussian_gamma
from sbscv_lab.utils.errors import InvalidInputError, PreconditionError, ResourceError
from sbscv_lab.utils.lab_types import CMatrix
from sbscv_lab.utils.logger import LogManager


@dataclass(frozen=True, eq=False)
class JointState:
    grid: Grid
    env_dims: Tuple[int, ...]
    mat: DensityMatrix

    def __post_init__(self):
        env_dims = tuple(int(d) for d in self.env_dims)
        object.__setattr__(self, 'env_dims', env_dims)
        if self.mat.dims != (self.grid.n,) + env_dims:
            raise InvalidInputError(
                f"Joint state dims {self.mat.dims} do not match system {self.grid.n} and envs {env_dims}")

    @property
    def env_dim(self) -> int:
        return int(np.prod(self.env_dims)) if self.env_dims else 1

    def tensor(self) -> np.ndarray:
        """View with axes (x, env, x', env')."""
        n, d = self.grid.n, self.env_dim
        return self.mat.mat.reshape(n, d, n, d)

    def system_state(self) -> CvDensity:
        return CvDensity.from_matrix(self.grid, partial_trace(self.mat, [0]).mat)

    def env_state(self, k: Optional[int] = None) -> DensityMatrix:
        """Reduced state of observed environment k, or of all observed environments."""
        if not self.env_dims:
            return DensityMatrix(np.ones((1, 1), dtype=np.complex128), (1,), check=False)
        keep = range(1, len(self.env_dims) + 1) if k is None else [k + 1]
        return partial_trace(self.mat, keep)

    @classmethod
    def from_matrix(cls, grid: Grid, env_dims: Sequence[int], mat: CMatrix, check: bool = False) -> 'JointState':
        env_dims = tuple(env_dims)
        return cls(grid, env_dims, DensityMatrix(mat, (grid.n,) + env_dims, check=check))


def _check_joint_size(grid: Grid, env_dim: int, cap: Optional[int]):
    limit = dimension_cap(cap)
    if grid.n * env_dim > limit:
        LogManager().get_logger("Dynamics").error(
            f"Joint dimension {grid.n} x {env_dim} exceeds cap {limit}")
        raise ResourceError(f"Joint dimension {grid.n * env_dim} exceeds the dimension cap {limit}")


def conditional_unitary_blocks(grid: Grid, observed: Sequence[EnvModel], t: float,
                               cap: Optional[int] = None) -> np.ndarray:
    """Blocks exp(-i t x_j S), S = sum_k g_k B_k, stacked along the first axis."""
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError(f"Time must be finite and non-negative, got {t}")
    env_dim = int(np.prod([env.dim for env in observed])) if observed else 1
    _check_joint_size(grid, env_dim, cap)
    return herm_expm_batch(joint_generator(observed), t * grid.points)


def conditional_unitary(grid: Grid, observed: Sequence[EnvModel], t: float,
                        cap: Optional[int] = None) -> CMatrix:
    return scipy.linalg.block_diag(*conditional_unitary_blocks(grid, observed, t, cap))


def conjugate_blocks(blocks: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    """U R U^dag for block-diagonal U = diag(blocks) acting on R with axes (x, env, x', env')."""
    return np.einsum('iac,icjd,jbd->iajb', blocks, tensor, blocks.conj(), optimize=True)


def evolve_product(rho_S: CvDensity, observed: Sequence[EnvModel], t: float,
                   cap: Optional[int] = None) -> JointState:
    """Conditional-unitary evolution of rho_S (x) (x)_k rho0_k; entry (i, j) is M_ij U_i rho_E U_j^dag."""
    observed = tuple(observed)
    grid = rho_S.grid
    blocks = conditional_unitary_blocks(grid, observed, t, cap)
    rho_env = joint_initial_state(observed).mat
    left = blocks @ rho_env
    envs = np.einsum('iac,jbc->iajb', left, blocks.conj(), optimize=True)
    joint = rho_S.matrix.mat[:, None, :, None] * envs
    d = rho_env.shape[0]
    return JointState.from_matrix(grid, tuple(env.dim for env in observed),
                                  joint.reshape(grid.n * d, grid.n * d))


def ensemble_gamma(ensemble: EnvEnsemble, t: float, grid: Grid) -> GammaKernel:
    """Kernel of every traced environment, closed-form Gaussian part included."""
    gamma = gamma_from_envs(ensemble.traced, t, grid)
    if ensemble.closed_form is not None:
        gaussian = gaussian_gamma(t, ensemble.closed_form.alpha, ensemble.closed_form.n_exp, grid)
        gamma = gaussian.multiply(gamma)
    return gamma


def evolve_full(rho_S: CvDensity, ensemble: EnvEnsemble, t: float, cap: Optional[int] = None) -> JointState:
    """Simulate system and all environments, then trace out the unobserved ones."""
    if ensemble.closed_form is not None:
        raise PreconditionError("A closed-form traced environment has no finite realization to simulate")
    grid = rho_S.grid
    envs = ensemble.observed + ensemble.traced
    dims = tuple(env.dim for env in envs)
    env_dim = int(np.prod(dims)) if dims else 1
    _check_joint_size(grid, env_dim, cap)

    initial = kron(rho_S.matrix.mat, kron_all([env.rho0.mat for env in envs], cap), cap)
    blocks = conditional_unitary_blocks(grid, envs, t, cap)
    evolved = conjugate_blocks(blocks, initial.reshape(grid.n, env_dim, grid.n, env_dim))
    full = DensityMatrix(evolved.reshape(grid.n * env_dim, grid.n * env_dim), (grid.n,) + (dims or (1,)),
                         check=False)

    n_obs = len(ensemble.observed)
    reduced = partial_trace(full, range(n_obs + 1))
    return JointState(grid, ensemble.observed_dims, DensityMatrix(reduced.mat, (grid.n,) + ensemble.observed_dims,
                                                                  check=False))


def lemma_rhs(rho_S: CvDensity, ensemble: EnvEnsemble, t: float, cap: Optional[int] = None,
              gamma: Optional[GammaKernel] = None) -> JointState:
    """Decohere rho_S with the traced-environment kernel, then evolve with the observed ones."""
    gamma = ensemble_gamma(ensemble, t, rho_S.grid) if gamma is None else gamma
    return evolve_product(apply_decoherence(rho_S, gamma), ensemble.observed, t, cap)


def check_commutation(rho_S: CvDensity, observed: EnvModel, traced: EnvModel, t: float,
                      cap: Optional[int] = None) -> float:
    """
    Max entrywise deviation between U o (E (x) I) and (E (x) I) o U on rho_S (x) rho_E.

    The first order uses the kernel route for E. The second simulates the
    traced environment explicitly and takes the partial trace afterwards.
    """
    grid = rho_S.grid
    gamma = gamma_from_envs([traced], t, grid)
    order_a = evolve_product(apply_decoherence(rho_S, gamma), [observed], t, cap).mat.mat

    evolved = evolve_product(rho_S, [observed], t, cap).mat.mat
    d_obs, d_tr = observed.dim, traced.dim
    _check_joint_size(grid, d_obs * d_tr, cap)
    extended = kron(evolved, traced.rho0.mat, cap)
    traced_blocks = herm_expm_batch(traced.g * traced.B, t * grid.points)
    blocks = np.einsum('ab,icd->iacbd', np.eye(d_obs), traced_blocks).reshape(grid.n, d_obs * d_tr, d_obs * d_tr)
    dressed = conjugate_blocks(blocks, extended.reshape(grid.n, d_obs * d_tr, grid.n, d_obs * d_tr))
    full = DensityMatrix(dressed.reshape(grid.n * d_obs * d_tr, -1), (grid.n, d_obs, d_tr), check=False)
    order_b = partial_trace(full, [0, 1]).mat

    return float(np.max(np.abs(order_a - order_b)))

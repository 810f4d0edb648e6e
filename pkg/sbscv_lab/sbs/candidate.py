"""
Branch decomposition of the evolved state and the SBS candidate built from it.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from sbscv_lab.numerics.numkit import DensityMatrix, herm_expm_batch, partial_trace, trace_distance
from sbscv_lab.physics.cvgrid import CvDensity, Interval
from sbscv_lab.physics.dynamics import JointState
from sbscv_lab.physics.envmodel import EnvModel, joint_generator, joint_initial_state
from sbscv_lab.sbs.partition import EnvPvm, Partition, check_alignment
from sbscv_lab.utils.errors import DegenerateCandidateError, EmptyBranchError, PreconditionError
from sbscv_lab.utils.logger import LogManager

MIN_BRANCH_WEIGHT = 1e-12
MIN_NORMALIZATION = 1e-12


def split_diag_offdiag(rho: JointState, partition: Partition) -> Tuple[np.ndarray, np.ndarray]:
    """Cell-diagonal blocks and everything else; the two parts add up to rho entry by entry."""
    same_cell = partition.labels[:, None] == partition.labels[None, :]
    mask = np.broadcast_to(same_cell[:, None, :, None], rho.tensor().shape)
    tensor = rho.tensor()
    size = rho.mat.dim
    diagonal = np.where(mask, tensor, 0.0).reshape(size, size)
    off_diagonal = np.where(mask, 0.0, tensor).reshape(size, size)
    return diagonal, off_diagonal


def branch_weight(rho_S: CvDensity, delta: Interval) -> float:
    idx = rho_S.grid.indices(delta)
    return float(np.sum(rho_S.position_density[idx]) * rho_S.grid.dx)


def conditional_branch_state(rho_S: CvDensity, delta: Interval,
                             threshold: float = MIN_BRANCH_WEIGHT) -> CvDensity:
    """P rho P / Tr(P rho P) for the spectral projector of the cell."""
    weight = branch_weight(rho_S, delta)
    if weight <= threshold:
        raise EmptyBranchError(f"Cell [{delta.a}, {delta.b}) carries weight {weight:.3e}")
    idx = rho_S.grid.indices(delta)
    kernel = np.zeros_like(rho_S.kernel)
    kernel[np.ix_(idx, idx)] = rho_S.kernel[np.ix_(idx, idx)]
    return CvDensity(rho_S.grid, kernel / weight)


def lambda_map(branch: CvDensity, observed: Sequence[EnvModel], t: float,
               env_state: Optional[DensityMatrix] = None) -> DensityMatrix:
    """
    Sum over grid points of |psi(x_j)|^2 dx exp(-i t x_j S) rho exp(i t x_j S).

    ``rho`` defaults to the product of the observed initial states; mixed
    branches use the diagonal of their kernel as weights.
    """
    observed = tuple(observed)
    rho = joint_initial_state(observed) if env_state is None else env_state
    weights = branch.position_density * branch.grid.dx
    support = np.flatnonzero(weights > 0.0)
    blocks = herm_expm_batch(joint_generator(observed), t * branch.grid.points[support])
    mixed = np.einsum('s,sab,bc,sdc->ad', weights[support], blocks, rho.mat, blocks.conj(), optimize=True)
    mixed = 0.5 * (mixed + mixed.conj().T)
    return DensityMatrix(mixed, rho.dims, check=False)


@dataclass(frozen=True, eq=False)
class Branch:
    cell: int
    interval: Interval
    weight: float
    t: float
    state: CvDensity
    lambda_state: DensityMatrix
    per_env: Tuple[DensityMatrix, ...]

    @property
    def mean_position(self) -> float:
        return float(np.sum(self.state.grid.points * self.state.position_density) * self.state.grid.dx)


def branch_data(rho_S: CvDensity, partition: Partition, observed: Sequence[EnvModel], t: float,
                min_weight: float = MIN_BRANCH_WEIGHT) -> List[Branch]:
    """Every cell with weight above min_weight, with its conditional state and Lambda images."""
    logger = LogManager().get_logger("Branches")
    observed = tuple(observed)
    branches = []
    for i, cell in enumerate(partition.cells):
        weight = branch_weight(rho_S, cell)
        if weight < min_weight:
            logger.warning(f"Dropping cell {i} [{cell.a:g}, {cell.b:g}) with weight {weight:.3e}")
            continue
        state = conditional_branch_state(rho_S, cell, min_weight)
        joint = lambda_map(state, observed, t)
        if len(observed) > 1:
            per_env = tuple(partial_trace(joint, [k]) for k in range(len(observed)))
        else:
            per_env = (joint,) if observed else ()
        branches.append(Branch(i, cell, weight, float(t), state, joint, per_env))
    if not branches:
        raise EmptyBranchError("Every partition cell is empty")
    return branches


@dataclass(frozen=True, eq=False)
class SbsCandidate:
    state: JointState
    norm_const: float
    partition: Partition
    env_pvm: EnvPvm
    branch_weights: Tuple[float, ...]
    cell_masses: Tuple[float, ...]

    @property
    def cells(self) -> Tuple[int, ...]:
        return self.env_pvm.cells


def _system_weights(rho_t: JointState, partition: Partition) -> np.ndarray:
    tensor = rho_t.tensor()
    diag = np.real(np.einsum('iaia->i', tensor))
    return np.array([diag[partition.indices(i)].sum() for i in range(len(partition))])


def _project_cell(tensor: np.ndarray, idx: np.ndarray, Q: np.ndarray) -> np.ndarray:
    block = tensor[np.ix_(idx, np.arange(tensor.shape[1]), idx, np.arange(tensor.shape[3]))]
    return np.einsum('ab,ibjc,cd->iajd', Q, block, Q, optimize=True)


def build_sbs_candidate(rho_t: JointState, partition: Partition, env_pvm: EnvPvm,
                        min_weight: float = MIN_BRANCH_WEIGHT) -> SbsCandidate:
    """Sum over cells of (P_cell (x) P_i) rho_t (P_cell (x) P_i), normalized by its trace."""
    check_alignment(env_pvm, partition, rho_t.env_dims)
    weights = _system_weights(rho_t, partition)
    missing = [i for i in range(len(partition)) if weights[i] >= min_weight and i not in env_pvm.cells]
    if missing:
        raise PreconditionError(f"Cells {missing} carry weight but have no environment projector")

    tensor = rho_t.tensor()
    projected = np.zeros_like(tensor)
    masses = []
    for pos, cell in enumerate(env_pvm.cells):
        if weights[cell] < min_weight:
            masses.append(0.0)
            continue
        idx = partition.indices(cell)
        block = _project_cell(tensor, idx, env_pvm.joint_projector(pos))
        projected[np.ix_(idx, np.arange(tensor.shape[1]), idx, np.arange(tensor.shape[3]))] = block
        masses.append(float(np.real(np.einsum('iaia->', block))))

    norm_const = float(sum(masses))
    if norm_const < MIN_NORMALIZATION:
        raise DegenerateCandidateError(f"Candidate normalization {norm_const:.3e} is degenerate")
    size = rho_t.mat.dim
    state = JointState.from_matrix(rho_t.grid, rho_t.env_dims, projected.reshape(size, size) / norm_const)
    return SbsCandidate(
        state=state,
        norm_const=norm_const,
        partition=partition,
        env_pvm=env_pvm,
        branch_weights=tuple(float(weights[c]) for c in env_pvm.cells),
        cell_masses=tuple(masses),
    )


def sbs_distance(rho_t: JointState, candidate: SbsCandidate) -> float:
    if rho_t.mat.dims != candidate.state.mat.dims:
        raise PreconditionError(f"Dimension mismatch {rho_t.mat.dims} vs {candidate.state.mat.dims}")
    return trace_distance(rho_t.mat.mat, candidate.state.mat.mat)


def reduced_branches(candidate: SbsCandidate) -> Tuple[np.ndarray, List[Optional[DensityMatrix]]]:
    """
    Probabilities q_i and joint environment states of each candidate branch.

    Tracing the system out of the candidate gives sum_i q_i rho_i. Branches
    without mass come back as None.
    """
    tensor = candidate.state.tensor()
    dims = candidate.state.env_dims or (1,)
    probabilities, states = [], []
    for cell in candidate.cells:
        idx = candidate.partition.indices(cell)
        env_block = np.einsum('iaib->ab', tensor[idx][:, :, idx, :])
        mass = float(np.real(np.trace(env_block)))
        probabilities.append(mass)
        states.append(DensityMatrix(env_block / mass, dims, check=False) if mass > MIN_BRANCH_WEIGHT else None)
    return np.array(probabilities), states

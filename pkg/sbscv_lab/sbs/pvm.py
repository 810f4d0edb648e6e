"""
Environment PVMs for the SBS candidate.

No constructive minimizer over all PVMs exists, so the runner compares a greedy
spectral heuristic, an exhaustive search over basis assignments for small
environments, and user-fixed Fock-space splits.
"""

import itertools
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from sbscv_lab.numerics.numkit import fidelity
from sbscv_lab.sbs.candidate import Branch
from sbscv_lab.sbs.partition import EnvPvm
from sbscv_lab.utils.errors import InvalidInputError, PreconditionError, RankStarvationError
from sbscv_lab.utils.logger import LogManager

EIGEN_TOL = 1e-12
OVERLAP_WARNING = 0.95
EXHAUSTIVE_MAX_DIM = 6
EXHAUSTIVE_MAX_ASSIGNMENTS = 200000


def _ordered(branches: Sequence[Branch]) -> List[Branch]:
    return sorted(branches, key=lambda br: (-br.weight, br.cell))


def _warn_overlaps(branches: Sequence[Branch], k: int):
    logger = LogManager().get_logger("EnvPvm")
    for a, b in itertools.combinations(branches, 2):
        overlap = fidelity(a.per_env[k], b.per_env[k])
        if overlap > OVERLAP_WARNING:
            logger.warning(f"Branches {a.cell} and {b.cell} overlap on environment {k} (F = {overlap:.4f}); "
                           "assigning projectors by weight order")


def _projector(vectors: np.ndarray) -> np.ndarray:
    return vectors @ vectors.conj().T


def _greedy_env(branches: List[Branch], k: int, absorb_remainder: bool) -> List[np.ndarray]:
    """
    Projectors for environment k, in the order of ``branches``.

    Refines the plain rule (leading eigenvectors on the unassigned subspace,
    handed out greedily by weight): a direction joins the current cell only
    while p_i <v|Lambda_i|v> is at least every later cell's p_j <v|Lambda_j|v>.
    The first direction of each cell is always taken.
    """
    dim = branches[0].per_env[k].dim
    free = np.eye(dim, dtype=np.complex128)
    chosen = []
    for pos, branch in enumerate(branches):
        later = branches[pos + 1:]
        budget = free.shape[1] - len(later)
        restricted = free.conj().T @ branch.per_env[k].mat @ free
        w, u = scipy.linalg.eigh(0.5 * (restricted + restricted.conj().T))
        order = np.argsort(w)[::-1]

        accepted, rejected = [], []
        for m in order:
            # free spans the complement of earlier cells, so lifted vectors are already orthogonal to them
            v = free @ u[:, m]
            own = branch.weight * np.real(np.vdot(v, branch.per_env[k].mat @ v))
            rival = max((other.weight * np.real(np.vdot(v, other.per_env[k].mat @ v)) for other in later),
                        default=0.0)
            if not accepted or (len(accepted) < budget and w[m] > EIGEN_TOL and own >= rival):
                accepted.append(m)
            else:
                rejected.append(m)
        chosen.append(free @ u[:, accepted])
        free = free @ u[:, rejected] if rejected else np.zeros((dim, 0), dtype=np.complex128)

    if absorb_remainder and free.shape[1]:
        mix = sum(br.weight * br.per_env[k].mat for br in branches)
        w, u = scipy.linalg.eigh(free.conj().T @ mix @ free)
        for m in range(u.shape[1]):
            v = free @ u[:, m]
            scores = [br.weight * np.real(np.vdot(v, br.per_env[k].mat @ v)) for br in branches]
            target = int(np.argmax(scores))
            chosen[target] = np.column_stack([chosen[target], v])

    return [_projector(vectors) for vectors in chosen]


def _check_rank(branches: Sequence[Branch], dims: Sequence[int]):
    for k, dim in enumerate(dims):
        if dim < len(branches):
            raise RankStarvationError(
                f"Environment {k} has dimension {dim} but {len(branches)} cells need projectors")


def heuristic_env_pvm(branches: Sequence[Branch], absorb_remainder: bool = True) -> EnvPvm:
    """
    Greedy spectral PVM: cells in descending weight order take the leading
    eigenvectors of their Lambda image on the still unassigned subspace. This
    refines the plain leading-eigenvector rule: a direction is kept only while
    the cell's weighted Lambda dominates every later cell's along it, and left
    over directions go to the dominating cell when absorb_remainder is set.
    """
    if not branches:
        raise PreconditionError("No branches to build a PVM for")
    if any(br.weight <= 0 for br in branches):
        raise PreconditionError("Branch weights must be positive")
    ordered = _ordered(branches)
    cells = tuple(br.cell for br in ordered)
    n_envs = len(ordered[0].per_env)
    if n_envs == 0:
        return EnvPvm.trivial(cells)
    _check_rank(ordered, [br.dim for br in ordered[0].per_env])

    projectors = []
    for k in range(n_envs):
        _warn_overlaps(ordered, k)
        projectors.append(_greedy_env(ordered, k, absorb_remainder))
    return EnvPvm.from_projectors(cells, projectors)


def _candidate_bases(branches: Sequence[Branch], k: int) -> List[np.ndarray]:
    states = [br.weight * br.per_env[k].mat for br in branches]
    bases = [scipy.linalg.eigh(s)[1] for s in states]
    bases.append(scipy.linalg.eigh(sum(states))[1])
    for a, b in itertools.combinations(range(len(states)), 2):
        bases.append(scipy.linalg.eigh(states[a] - states[b])[1])
    return bases


def _exhaustive_env(branches: List[Branch], k: int) -> List[np.ndarray]:
    dim = branches[0].per_env[k].dim
    n_cells = len(branches)
    best_value, best = -np.inf, None
    for basis in _candidate_bases(branches, k):
        scores = np.array([[br.weight * np.real(np.vdot(basis[:, m], br.per_env[k].mat @ basis[:, m]))
                            for m in range(dim)] for br in branches])
        for assignment in itertools.product(range(n_cells), repeat=dim):
            if len(set(assignment)) < n_cells:
                continue
            value = scores[list(assignment), np.arange(dim)].sum()
            if value > best_value:
                best_value, best = value, (basis, assignment)

    basis, assignment = best
    return [_projector(basis[:, [m for m in range(dim) if assignment[m] == c]]) for c in range(n_cells)]


def exhaustive_env_pvm(branches: Sequence[Branch], max_dim: int = EXHAUSTIVE_MAX_DIM) -> EnvPvm:
    """Best assignment of candidate basis vectors to cells, maximizing sum_i p_i Tr{P_i Lambda_i}."""
    ordered = _ordered(branches)
    cells = tuple(br.cell for br in ordered)
    n_envs = len(ordered[0].per_env) if ordered else 0
    if n_envs == 0:
        return EnvPvm.trivial(cells)
    dims = [br.dim for br in ordered[0].per_env]
    _check_rank(ordered, dims)
    for dim in dims:
        if dim > max_dim:
            raise PreconditionError(f"Exhaustive PVM search is limited to dimension {max_dim}, got {dim}")
        if len(ordered) ** dim > EXHAUSTIVE_MAX_ASSIGNMENTS:
            raise PreconditionError(f"{len(ordered)} cells on dimension {dim} is too many assignments")
    return EnvPvm.from_projectors(cells, [_exhaustive_env(ordered, k) for k in range(n_envs)])


def fixed_env_pvm(branches: Sequence[Branch], dims: Sequence[int],
                  fock_cells: Optional[Sequence[Sequence[int]]] = None) -> EnvPvm:
    """
    Same Fock-index split on every observed environment, one index list per kept
    cell in partition order. Without lists a single cell gets the identity.
    """
    cells = tuple(br.cell for br in sorted(branches, key=lambda br: br.cell))
    if not dims:
        return EnvPvm.trivial(cells)
    if fock_cells is None:
        if len(cells) != 1:
            raise PreconditionError("An identity PVM needs exactly one populated cell")
        return EnvPvm.from_projectors(cells, [[np.eye(dim, dtype=np.complex128)] for dim in dims])
    if len(fock_cells) != len(cells):
        raise PreconditionError(f"{len(fock_cells)} Fock index lists for {len(cells)} populated cells")

    projectors = []
    for dim in dims:
        per_env = []
        for indices in fock_cells:
            if any(i < 0 or i >= dim for i in indices):
                raise InvalidInputError(f"Fock indices {list(indices)} out of range for dimension {dim}")
            diag = np.zeros(dim, dtype=np.complex128)
            diag[list(indices)] = 1.0
            per_env.append(np.diag(diag))
        projectors.append(per_env)
    return EnvPvm.from_projectors(cells, projectors)


def pvm_objective(branches: Sequence[Branch], pvm: EnvPvm) -> float:
    """sum_i p_i Tr{P_i Lambda_i P_i} with joint projectors."""
    total = 0.0
    for br in branches:
        P = pvm.joint_projector(pvm.position(br.cell))
        total += br.weight * float(np.real(np.trace(P @ br.lambda_state.mat @ P)))
    return total

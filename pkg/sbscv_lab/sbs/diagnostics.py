from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from sbscv_lab.numerics.numkit import DensityMatrix, as_cmatrix, fidelity, partial_trace, trace_norm
from sbscv_lab.sbs.candidate import SbsCandidate, reduced_branches
from sbscv_lab.utils.errors import InvalidInputError

DISTINGUISHABLE_FIDELITY = 0.05


def branch_fidelity_matrix(candidate: SbsCandidate) -> np.ndarray:
    """
    F between per-environment branch states for every cell pair, shape
    (environments, cells, cells). Entries involving an empty branch are NaN.
    """
    _, joint_states = reduced_branches(candidate)
    env_dims = candidate.state.env_dims
    n_envs, n_cells = len(env_dims), len(joint_states)
    result = np.full((n_envs, n_cells, n_cells), np.nan)
    for k in range(n_envs):
        per_env: List[Optional[DensityMatrix]] = [
            None if state is None else (partial_trace(state, [k]) if n_envs > 1 else state)
            for state in joint_states
        ]
        for i in range(n_cells):
            if per_env[i] is None:
                continue
            result[k, i, i] = 1.0
            for j in range(i + 1, n_cells):
                if per_env[j] is None:
                    continue
                value = fidelity(per_env[i], per_env[j])
                result[k, i, j] = result[k, j, i] = value
    return result


def fidelity_summary(fidelities: np.ndarray, threshold: float = DISTINGUISHABLE_FIDELITY) -> Dict[str, object]:
    """Largest off-diagonal fidelity per environment and the pairs at or below threshold."""
    n_envs = fidelities.shape[0]
    n_cells = fidelities.shape[1] if fidelities.ndim == 3 else 0
    upper = np.triu_indices(n_cells, k=1)
    max_off, pairs = [], 0
    for k in range(n_envs):
        values = fidelities[k][upper]
        finite = values[np.isfinite(values)]
        max_off.append(float(finite.max()) if finite.size else float('nan'))
    if n_cells > 1 and n_envs:
        for i, j in zip(*upper):
            column = fidelities[:, i, j]
            if np.all(np.isfinite(column)) and np.all(column <= threshold):
                pairs += 1
    return {'max_offdiag_fidelity': max_off, 'distinguishable_pairs': pairs,
            'cell_pairs': len(upper[0])}


def qsd_error(weights: Sequence[float], states: Sequence, measurement: Sequence) -> float:
    """
    1 - sum_i p_i Tr{M_i rho_i M_i^dag}. Outcomes beyond the number of states
    count as failures.
    """
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1 or p.size != len(states) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise InvalidInputError("Prior weights must be non-negative, one per state, and sum to 1")
    ops = [as_cmatrix(m, "measurement operator") for m in measurement]
    if len(ops) < len(states):
        raise InvalidInputError(f"{len(ops)} measurement outcomes for {len(states)} states")
    dim = ops[0].shape[0]
    resolution = sum(m.conj().T @ m for m in ops)
    if np.max(np.abs(resolution - np.eye(dim))) > 1e-8:
        raise InvalidInputError("Measurement operators do not resolve the identity")

    success = 0.0
    for weight, state, M in zip(p, states, ops):
        rho = state.mat if isinstance(state, DensityMatrix) else as_cmatrix(state, "state")
        success += weight * float(np.real(np.trace(M @ rho @ M.conj().T)))
    return float(min(max(1.0 - success, 0.0), 1.0))


def helstrom_measurement(p0: float, rho0, p1: float, rho1) -> Tuple[np.ndarray, np.ndarray]:
    """Projector onto the positive part of p0 rho0 - p1 rho1 and its complement."""
    a = as_cmatrix(rho0.mat if isinstance(rho0, DensityMatrix) else rho0)
    b = as_cmatrix(rho1.mat if isinstance(rho1, DensityMatrix) else rho1)
    w, v = scipy.linalg.eigh(p0 * a - p1 * b)
    positive = v[:, w > 0]
    M0 = positive @ positive.conj().T
    return M0, np.eye(a.shape[0], dtype=np.complex128) - M0


def helstrom_error(p0: float, rho0, p1: float, rho1) -> float:
    a = rho0.mat if isinstance(rho0, DensityMatrix) else rho0
    b = rho1.mat if isinstance(rho1, DensityMatrix) else rho1
    return 0.5 * (1.0 - trace_norm(p0 * np.asarray(a) - p1 * np.asarray(b)))

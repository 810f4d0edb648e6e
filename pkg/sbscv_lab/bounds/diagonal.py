"""
Diagonal-term bounds: how far the cell-diagonal part of rho_t is from the
normalized SBS candidate, in terms of how well the environment projectors
capture each branch's Lambda image.
"""

from typing import Dict, Optional, Sequence

import numpy as np

from sbscv_lab.bounds.report import DEFAULT_TOL, BoundReport
from sbscv_lab.numerics.numkit import herm_expm_batch, kron_all, trace_norm
from sbscv_lab.physics.dynamics import JointState
from sbscv_lab.physics.envmodel import EnvModel, branch_state
from sbscv_lab.sbs.candidate import Branch, SbsCandidate, build_sbs_candidate, split_diag_offdiag
from sbscv_lab.sbs.partition import EnvPvm, Partition
from sbscv_lab.utils.errors import PreconditionError
from sbscv_lab.utils.lab_types import Relation
from sbscv_lab.utils.logger import LogManager

ROUTE_TOL = 1e-8


def _cellwise_trace_norm(diff: np.ndarray, rho_t: JointState, partition: Partition) -> float:
    """Trace norm of a matrix that is block diagonal over the partition cells."""
    n, d = rho_t.grid.n, rho_t.env_dim
    tensor = diff.reshape(n, d, n, d)
    total = 0.0
    for i in range(len(partition)):
        idx = partition.indices(i)
        block = tensor[np.ix_(idx, np.arange(d), idx, np.arange(d))]
        total += trace_norm(block.reshape(idx.size * d, idx.size * d))
    return total


def branch_normalizations(branches: Sequence[Branch], env_pvm: EnvPvm) -> np.ndarray:
    """Tr{P_i Lambda_i P_i} with the joint projector of each branch's cell."""
    values = []
    for br in branches:
        P = env_pvm.joint_projector(env_pvm.position(br.cell))
        values.append(float(np.real(np.trace(P @ br.lambda_state.mat @ P))))
    return np.array(values)


def _rhs_from_normalizations(weights: np.ndarray, normalizations: np.ndarray) -> float:
    return 4.0 * float(np.sqrt(max(float(weights @ (1.0 - normalizations)), 0.0)))


def diagonal_bound(rho_t: JointState, partition: Partition, env_pvm: EnvPvm, branches: Sequence[Branch],
                   tol: float = DEFAULT_TOL, candidate: Optional[SbsCandidate] = None,
                   name: str = "diagonal_bound") -> BoundReport:
    """
    (1/2) ||sum_i (P_i (x) I) rho_t (P_i (x) I) - candidate||_1 against
    4 sqrt(sum_i p_i (1 - Tr{P_i Lambda_i P_i})).
    """
    if not branches:
        raise PreconditionError("Diagonal bound needs at least one branch")
    candidate = build_sbs_candidate(rho_t, partition, env_pvm) if candidate is None else candidate
    diagonal, _ = split_diag_offdiag(rho_t, partition)
    lhs = 0.5 * _cellwise_trace_norm(diagonal - candidate.state.mat.mat, rho_t, partition)

    weights = np.array([br.weight for br in branches])
    norms = branch_normalizations(branches, env_pvm)
    details = {
        'norm_const': candidate.norm_const,
        'weighted_normalization': float(weights @ norms),
        'branch_cells': [br.cell for br in branches],
        'branch_weights': weights.tolist(),
        'branch_normalizations': norms.tolist(),
    }
    return BoundReport(name, lhs, _rhs_from_normalizations(weights, norms), tol,
                       context={'t': branches[0].t, 'env_dims': list(rho_t.env_dims)}, details=details)


def _leading_vector(env: EnvModel) -> np.ndarray:
    w, v = np.linalg.eigh(env.rho0.mat)
    return v[:, -1]


def _identical(observed: Sequence[EnvModel]) -> bool:
    first = observed[0]
    return all(env.dim == first.dim and env.g == first.g and np.allclose(env.B, first.B)
               and np.allclose(env.rho0.mat, first.rho0.mat) for env in observed[1:])


def pure_product_normalizations(branches: Sequence[Branch], observed: Sequence[EnvModel],
                                env_pvm: EnvPvm) -> np.ndarray:
    """
    sum_x |psi(x)|^2 dx prod_k <psi_k(x)| P_i^k |psi_k(x)> for pure environment
    states psi_k(x) = exp(-i t x g_k B_k) psi_k.
    """
    values = []
    for br in branches:
        pos = env_pvm.position(br.cell)
        weights = br.state.position_density * br.state.grid.dx
        support = np.flatnonzero(weights > 0.0)
        product = np.ones(support.size)
        for k, env in enumerate(observed):
            vectors = herm_expm_batch(env.g * env.B, br.t * br.state.grid.points[support]) @ _leading_vector(env)
            P = env_pvm.projectors[k][pos]
            product *= np.real(np.einsum('sa,ab,sb->s', vectors.conj(), P, vectors))
        values.append(float(weights[support] @ product))
    return np.array(values)


def diagonal_bound_multi(rho_t: JointState, partition: Partition, env_pvm: EnvPvm, branches: Sequence[Branch],
                         observed: Sequence[EnvModel], tol: float = DEFAULT_TOL,
                         candidate: Optional[SbsCandidate] = None) -> BoundReport:
    """
    Diagonal bound with one projector per observed environment. When every
    environment starts pure, the product-of-overlaps form of the normalizations
    is evaluated as a second route and reported as ``closed_form_rhs``.
    """
    observed = tuple(observed)
    if len(observed) != len(env_pvm.env_dims):
        raise PreconditionError(f"{len(observed)} environments for a PVM over {len(env_pvm.env_dims)}")
    report = diagonal_bound(rho_t, partition, env_pvm, branches, tol, candidate, name="diagonal_bound_multi")
    details = dict(report.details)
    details['identical_envs'] = bool(observed) and _identical(observed)
    if observed and all(env.is_pure for env in observed):
        weights = np.array([br.weight for br in branches])
        closed = _rhs_from_normalizations(weights, pure_product_normalizations(branches, observed, env_pvm))
        details['closed_form_rhs'] = closed
        details['route_gap'] = abs(closed - report.rhs)
    return BoundReport(report.name, report.lhs, report.rhs, report.tol, context=report.context, details=details)


def multi_route_report(report: BoundReport, tol: float = ROUTE_TOL) -> Optional[BoundReport]:
    """Agreement of the general and the product-form rhs, when the latter exists."""
    if 'closed_form_rhs' not in report.details:
        return None
    return BoundReport("diagonal_multi_routes", report.rhs, report.details['closed_form_rhs'], tol,
                       Relation.eq, context=dict(report.context))


def _batch_trace_norms(stack: np.ndarray) -> np.ndarray:
    return np.linalg.svd(stack, compute_uv=False).sum(axis=-1)


def _per_point_spread(br: Branch, env: EnvModel, reference: np.ndarray) -> float:
    """sum_x |psi(x)|^2 dx ||rho_x - rho_ref||_1 for one environment."""
    weights = br.state.position_density * br.state.grid.dx
    support = np.flatnonzero(weights > 0.0)
    blocks = herm_expm_batch(env.g * env.B, br.t * br.state.grid.points[support])
    states = np.einsum('sab,bc,sdc->sad', blocks, env.rho0.mat, blocks.conj(), optimize=True)
    return float(weights[support] @ _batch_trace_norms(states - reference[None, :, :]))


def further_diagonal_bound(branches: Sequence[Branch], observed: Sequence[EnvModel], env_pvm: EnvPvm,
                           diagonal_lhs: float, tol: float = DEFAULT_TOL) -> BoundReport:
    """
    Replace Tr{P_i Lambda_i P_i} by two distances around the branch mean x_i:
    4 sqrt(2 sum p_i ||Lambda_i - rho_{x_i}||_1) + 4 sqrt(sum p_i ||rho_{x_i} - P_i rho_{x_i} P_i||_1).

    Several environments telescope both terms into per-environment sums; the
    first term then integrates the per-point distances over the branch. The
    joint first term without telescoping is reported alongside.
    """
    logger = LogManager().get_logger("DiagonalBounds")
    observed = tuple(observed)
    first_terms, second_terms, joint_terms, means = [], [], [], []
    for br in branches:
        x_i = br.mean_position
        means.append(x_i)
        if not br.interval.contains(x_i):
            logger.warning(f"Branch mean {x_i:.6g} of cell {br.cell} lies outside [{br.interval.a:g}, {br.interval.b:g})")
        pos = env_pvm.position(br.cell)
        references = [branch_state(env, br.t, x_i).mat for env in observed]

        second = 0.0
        for k, ref in enumerate(references):
            P = env_pvm.projectors[k][pos]
            second += trace_norm(ref - P @ ref @ P)
        second_terms.append(second)

        if len(observed) == 1:
            first_terms.append(trace_norm(br.lambda_state.mat - references[0]))
        elif observed:
            first_terms.append(sum(_per_point_spread(br, env, ref) for env, ref in zip(observed, references)))
            joint_terms.append(trace_norm(br.lambda_state.mat - kron_all(references)))
        else:
            first_terms.append(0.0)

    weights = np.array([br.weight for br in branches])
    first = 4.0 * float(np.sqrt(2.0 * weights @ np.array(first_terms)))
    second = 4.0 * float(np.sqrt(weights @ np.array(second_terms)))
    details: Dict[str, object] = {
        'first_term': first,
        'second_term': second,
        'branch_means': means,
    }
    if joint_terms:
        details['joint_first_term'] = 4.0 * float(np.sqrt(2.0 * weights @ np.array(joint_terms)))
    return BoundReport("further_diagonal_bound", diagonal_lhs, first + second, tol,
                       context={'t': branches[0].t if branches else None}, details=details)

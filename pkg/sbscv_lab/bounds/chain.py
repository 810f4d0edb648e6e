"""
Links of the objective chain: exact SBS distance, its split into diagonal and
off-diagonal parts, and the sum of their bounds.
"""

import numpy as np

from sbscv_lab.bounds.report import BoundReport
from sbscv_lab.utils.errors import PreconditionError

CHAIN_TOL = 1e-9
JENSEN_TOL = 1e-12


def objective_split(distance: float, diagonal: BoundReport, offdiag: BoundReport,
                    tol: float = CHAIN_TOL) -> BoundReport:
    """Trace distance to the candidate against diagonal distance plus off-diagonal half-norm."""
    return BoundReport("objective_split", distance, diagonal.lhs + offdiag.lhs, tol,
                       details={'diagonal_lhs': diagonal.lhs, 'offdiag_lhs': offdiag.lhs})


def objective_chain(diagonal: BoundReport, offdiag: BoundReport, tol: float = CHAIN_TOL) -> BoundReport:
    return BoundReport("objective_chain", diagonal.lhs + offdiag.lhs, diagonal.rhs + offdiag.rhs, tol,
                       details={'diagonal_rhs': diagonal.rhs, 'offdiag_rhs': offdiag.rhs,
                                'offdiag_route': offdiag.name})


def jensen_step(diagonal: BoundReport, tol: float = JENSEN_TOL) -> BoundReport:
    """sum_i p_i sqrt(1 - N_i) against sqrt(sum_i p_i (1 - N_i)) from a diagonal report."""
    try:
        weights = np.array(diagonal.details['branch_weights'], dtype=float)
        norms = np.array(diagonal.details['branch_normalizations'], dtype=float)
    except KeyError as err:
        raise PreconditionError(f"{diagonal.name} carries no per-branch normalizations") from err
    gaps = np.maximum(1.0 - norms, 0.0)
    return BoundReport("jensen_step", float(weights @ np.sqrt(gaps)), float(np.sqrt(weights @ gaps)), tol,
                       context=dict(diagonal.context))

from typing import Optional, Sequence

import numpy as np

from sbscv_lab.bounds.report import DEFAULT_TOL, BoundReport
from sbscv_lab.numerics.numkit import as_cmatrix, kron_all, trace_norm
from sbscv_lab.utils.errors import InvalidInputError
from sbscv_lab.utils.lab_types import Relation

UNIT_TOL = 1e-10


def telescopic_bound(a_list: Sequence, b_list: Sequence, cap: Optional[int] = None,
                     tol: float = DEFAULT_TOL) -> BoundReport:
    """
    ||(x)_k A_k - (x)_k B_k||_1 against
    sum_j prod_{k<j} ||A_k||_1 ||A_j - B_j||_1 prod_{k>j} ||B_k||_1.
    """
    if len(a_list) != len(b_list) or not a_list:
        raise InvalidInputError("Telescoping needs two non-empty factor lists of equal length")
    a_mats = [as_cmatrix(a, "A factor") for a in a_list]
    b_mats = [as_cmatrix(b, "B factor") for b in b_list]
    for k, (a, b) in enumerate(zip(a_mats, b_mats)):
        if a.shape != b.shape:
            raise InvalidInputError(f"Factor {k} shapes differ: {a.shape} vs {b.shape}")

    lhs = trace_norm(kron_all(a_mats, cap) - kron_all(b_mats, cap))
    a_norms = np.array([trace_norm(a) for a in a_mats])
    b_norms = np.array([trace_norm(b) for b in b_mats])
    gaps = np.array([trace_norm(a - b) for a, b in zip(a_mats, b_mats)])
    terms = [float(np.prod(a_norms[:j]) * gaps[j] * np.prod(b_norms[j + 1:])) for j in range(len(a_mats))]
    return BoundReport("telescopic_bound", lhs, float(sum(terms)), tol,
                       context={'dims': [a.shape[0] for a in a_mats]}, details={'terms': terms})


def trace_distance_rescale(L: float, eta: float) -> float:
    """From ||rho - eta sigma||_1 <= L for states rho, sigma follows ||rho - sigma||_1 <= 2L."""
    if not np.isfinite(L) or L < 0:
        raise InvalidInputError(f"L must be finite and non-negative, got {L}")
    if not 0.0 <= eta <= 1.0:
        raise InvalidInputError(f"eta must lie in [0, 1], got {eta}")
    return 2.0 * float(L)


def trace_distance_rescale_check(rho, sigma, eta: float, tol: float = DEFAULT_TOL) -> BoundReport:
    """The rescaling implication on one concrete triple, with L = ||rho - eta sigma||_1."""
    rho = as_cmatrix(rho, "rho")
    sigma = as_cmatrix(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise InvalidInputError(f"State shapes differ: {rho.shape} vs {sigma.shape}")
    L = trace_norm(rho - eta * sigma)
    return BoundReport("trace_distance_rescale", trace_norm(rho - sigma), trace_distance_rescale(L, eta), tol,
                       details={'L': L, 'eta': float(eta)})


def pure_distance_formula_check(psi, phi, tol: float = UNIT_TOL) -> BoundReport:
    """(1/2) |||psi><psi| - |phi><phi|||_1 by singular values against sqrt(1 - |<phi|psi>|^2)."""
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    phi = np.asarray(phi, dtype=np.complex128).ravel()
    if psi.shape != phi.shape:
        raise InvalidInputError(f"Vectors differ in dimension: {psi.size} vs {phi.size}")
    for name, vec in (("psi", psi), ("phi", phi)):
        if abs(np.linalg.norm(vec) - 1.0) > UNIT_TOL:
            raise InvalidInputError(f"{name} is not a unit vector (norm {np.linalg.norm(vec):.12f})")

    lhs = 0.5 * trace_norm(np.outer(psi, psi.conj()) - np.outer(phi, phi.conj()))
    rhs = float(np.sqrt(max(0.0, 1.0 - abs(np.vdot(phi, psi)) ** 2)))
    return BoundReport("pure_distance_formula", lhs, rhs, tol, Relation.eq,
                       details={'abs_diff': abs(lhs - rhs)})

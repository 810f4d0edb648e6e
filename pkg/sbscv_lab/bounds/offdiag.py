"""
Off-diagonal coherence bounds.

The blocks P_i E_t(rho_S) P_j of the decohered system state are compared
against the integration-by-parts bound 2|Gamma| + |Delta_j| |d_y Gamma|, the
slice-norm product bound for integral operators, and its Gaussian
specialization.
"""

from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from sbscv_lab.bounds.report import DEFAULT_TOL, BoundReport
from sbscv_lab.numerics.numkit import trace_norm
from sbscv_lab.physics.cvgrid import CvDensity, Grid, Interval
from sbscv_lab.physics.dynamics import JointState
from sbscv_lab.physics import kernels
from sbscv_lab.physics.envmodel import GaussianDecoherence
from sbscv_lab.physics.kernels import GammaKernel, finite_difference_dy, gaussian_convolution_factor
from sbscv_lab.sbs.candidate import split_diag_offdiag
from sbscv_lab.sbs.partition import Partition
from sbscv_lab.utils.errors import InvalidInputError, PreconditionError
from sbscv_lab.utils.lab_types import Relation

MIXTURE_CUTOFF = 1e-14
Z_MARGIN_WIDTHS = 8.0
Z_POINTS_PER_WIDTH = 8.0

KernelLike = Union[np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _cells_context(delta_i: Interval, delta_j: Interval, **extra) -> dict:
    return {'cell_i': [delta_i.a, delta_i.b], 'cell_j': [delta_j.a, delta_j.b], **extra}


def _check_disjoint(delta_i: Interval, delta_j: Interval):
    if delta_i.overlaps(delta_j):
        raise PreconditionError(f"Cells [{delta_i.a}, {delta_i.b}) and [{delta_j.a}, {delta_j.b}) overlap")


def _decohered_block(gamma: GammaKernel, rho_S: CvDensity, idx_i: np.ndarray, idx_j: np.ndarray) -> np.ndarray:
    """(K * Gamma)(x, y) dx restricted to the cell product."""
    return (rho_S.matrix.mat * gamma.values)[np.ix_(idx_i, idx_j)]


def _closed_form_envelope(gamma: GammaKernel, delta_i: Interval, delta_j: Interval,
                          x_grid: np.ndarray, y_grid: np.ndarray) -> float:
    """Envelope on the cell edges, where grid points never land."""
    xs = np.concatenate([[delta_i.a, delta_i.b], x_grid])
    ys = np.concatenate([[delta_j.a, delta_j.b], y_grid])
    X = np.concatenate([np.repeat(xs[:2], ys.size), np.tile(xs, 2)])
    Y = np.concatenate([np.tile(ys, 2), np.repeat(ys[:2], xs.size)])
    value, deriv = gamma.evaluate(X, Y)
    return float(np.max(2.0 * np.abs(value) + delta_j.length * np.abs(deriv)))


def kupsch_offdiag_bound(gamma: GammaKernel, rho_S: CvDensity, delta_i: Interval, delta_j: Interval,
                         tol: float = DEFAULT_TOL) -> BoundReport:
    """
    ||P_i E_t(rho_S) P_j||_1 against sup over the cell product of
    2|Gamma| + |Delta_j| |d_y Gamma|.

    Finite-difference derivatives carry their error estimate into the sup.
    The exact discrete summation-by-parts bound is reported as ``abel_bound``.
    """
    _check_disjoint(delta_i, delta_j)
    if gamma.grid != rho_S.grid:
        raise InvalidInputError("State and kernel live on different grids")
    grid = rho_S.grid
    if grid.n < 3:
        raise PreconditionError("A y-derivative of Gamma needs at least 3 grid points")
    idx_i, idx_j = grid.indices(delta_i), grid.indices(delta_j)
    block = _decohered_block(gamma, rho_S, idx_i, idx_j)
    lhs = trace_norm(block)
    context = _cells_context(delta_i, delta_j, t=gamma.t)

    if not np.any(block):
        return BoundReport("kupsch_offdiag_bound", lhs, 0.0, tol, context=context,
                           details={'case': 'vanishing'})

    dy, dy_err = gamma.derivative()
    g_abs = np.abs(gamma.values[np.ix_(idx_i, idx_j)])
    d_abs = np.abs(dy[np.ix_(idx_i, idx_j)]) + dy_err
    rhs = float(np.max(2.0 * g_abs + delta_j.length * d_abs))
    if gamma.closed_form is not None:
        rhs = max(rhs, _closed_form_envelope(gamma, delta_i, delta_j, grid.points[idx_i], grid.points[idx_j]))

    steps = np.abs(np.diff(gamma.values[np.ix_(idx_i, idx_j)], axis=1))
    abel = 2.0 * float(g_abs.max()) + float(steps.max(axis=0).sum()) if steps.size else 2.0 * float(g_abs.max())
    details = {
        'case': 'general',
        'sup_gamma': float(g_abs.max()),
        'sup_dy_gamma': float(np.abs(dy[np.ix_(idx_i, idx_j)]).max()),
        'dy_error': float(dy_err),
        'analytic_derivative': gamma.dy is not None,
        'abel_bound': abel,
    }
    return BoundReport("kupsch_offdiag_bound", lhs, rhs, tol, context=context, details=details)


def kupsch_derivative_defect(gamma: GammaKernel) -> float:
    """
    Largest gap between an analytic d_y Gamma and Richardson finite differences,
    relative to max(1, sup |d_y Gamma|), after subtracting the difference error
    estimate. Zero for kernels without an analytic derivative.
    """
    if gamma.dy is None:
        return 0.0
    numeric, err = finite_difference_dy(gamma.values, gamma.grid.dx)
    gap = float(np.max(np.abs(gamma.dy - numeric)))
    scale = max(1.0, float(np.max(np.abs(gamma.dy))))
    return max(gap - err, 0.0) / scale


def kupsch_ibp_identity(gamma: GammaKernel, rho_S: CvDensity, delta_i: Interval, delta_j: Interval,
                        tol: float = DEFAULT_TOL) -> BoundReport:
    """
    Residual of the summation-by-parts identity behind the Kupsch bound.

    With J_k = diag_x Gamma(x, y_k) M[I, :] and C_k the projector onto columns
    up to k, sum_k J_k E_k equals
    J_b C_b - J_a C_{a-1} - sum_{k=a}^{b-1} (J_{k+1} - J_k) C_k.
    Hoelder estimates ||J_k||_1 <= sup_x |Gamma(x, y_k)| ||M[I, :]||_1 are
    reported as their worst excess.
    """
    _check_disjoint(delta_i, delta_j)
    grid = rho_S.grid
    idx_i, idx_j = grid.indices(delta_i), grid.indices(delta_j)
    rows = rho_S.matrix.mat[idx_i, :]
    G = gamma.values[idx_i, :]
    cols = np.arange(grid.n)
    a, b = int(idx_j[0]), int(idx_j[-1])

    direct = np.zeros_like(rows)
    direct[:, idx_j] = G[:, idx_j] * rows[:, idx_j]

    def weighted(column_weights: np.ndarray, upto: int) -> np.ndarray:
        return np.where(cols[None, :] <= upto, column_weights[:, None] * rows, 0.0)

    summed = weighted(G[:, b], b)
    if a > 0:
        summed = summed - weighted(G[:, a], a - 1)
    for k in range(a, b):
        summed = summed - weighted(G[:, k + 1] - G[:, k], k)
    residual = float(np.max(np.abs(direct - summed)))

    rows_norm = trace_norm(rows)
    excess = max(trace_norm(G[:, k][:, None] * rows) - float(np.max(np.abs(G[:, k]))) * rows_norm
                 for k in (a, b))
    details = {'holder_max_excess': float(excess), 'row_block_trace_norm': rows_norm}
    return BoundReport("kupsch_ibp_identity", residual, 0.0, tol,
                       context=_cells_context(delta_i, delta_j, t=gamma.t), details=details)


def kupsch_blocks(gamma: GammaKernel, rho_S: CvDensity, partition: Partition,
                  tol: float = DEFAULT_TOL) -> List[BoundReport]:
    """One Kupsch report per ordered pair of distinct cells."""
    reports = []
    for i, delta_i in enumerate(partition.cells):
        for j, delta_j in enumerate(partition.cells):
            if i != j:
                reports.append(kupsch_offdiag_bound(gamma, rho_S, delta_i, delta_j, tol).with_context(i=i, j=j))
    return reports


def sample_kernel(kernel: KernelLike, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Kernel values on rows x cols; arrays pass through after a shape check."""
    if callable(kernel):
        values = kernel(rows[:, None], cols[None, :])
        values = np.broadcast_to(np.asarray(values, dtype=np.complex128), (rows.size, cols.size))
    else:
        values = np.asarray(kernel, dtype=np.complex128)
        if values.shape != (rows.size, cols.size):
            raise InvalidInputError(f"Kernel shape {values.shape} does not match ({rows.size}, {cols.size})")
    return np.array(values)


def stolz_product_bound(a_kernel: KernelLike, b_kernel: KernelLike, x_grid: Grid, z_grid: Grid,
                        tol: float = DEFAULT_TOL) -> BoundReport:
    """
    ||A B||_1 <= integral over z of ||A(., z)||_2 ||B(z, .)||_2 for integral
    operators on L2(x_grid), composed by quadrature over z_grid.
    """
    x, z = x_grid.points, z_grid.points
    A = sample_kernel(a_kernel, x, z)
    B = sample_kernel(b_kernel, z, x)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise InvalidInputError("Kernel slices are not square integrable on the grid")

    composed = (A @ B) * z_grid.dx
    lhs = trace_norm(composed * x_grid.dx)
    a_norms = np.sqrt(np.sum(np.abs(A) ** 2, axis=0) * x_grid.dx)
    b_norms = np.sqrt(np.sum(np.abs(B) ** 2, axis=1) * x_grid.dx)
    rhs = float(np.sum(a_norms * b_norms) * z_grid.dx)
    if not np.isfinite(rhs):
        raise InvalidInputError("Divergent slice norms")
    return BoundReport("stolz_product_bound", lhs, rhs, tol,
                       details={'z_points': z_grid.n, 'max_slice_norm_a': float(a_norms.max()),
                                'max_slice_norm_b': float(b_norms.max())})


def mixture_decomposition(rho_S: CvDensity) -> Tuple[np.ndarray, np.ndarray]:
    """Weights p_n and wavefunctions psi_n (columns, L2-normalized on the grid) of rho_S."""
    w, v = scipy.linalg.eigh(rho_S.matrix.mat)
    keep = w > MIXTURE_CUTOFF
    return w[keep], v[:, keep] / np.sqrt(rho_S.grid.dx)


def _z_grid(tau: float, lo: float, hi: float, dx: float) -> Grid:
    width = 1.0 / (2.0 * np.sqrt(2.0 * tau))
    dz = min(dx, width / Z_POINTS_PER_WIDTH)
    z_lo = lo - Z_MARGIN_WIDTHS * 2.0 * width
    z_hi = hi + Z_MARGIN_WIDTHS * 2.0 * width
    return Grid(z_lo, z_hi, int(np.ceil((z_hi - z_lo) / dz)))


def _gaussian_terms(rho_S: CvDensity, tau: float, delta_i: Interval, delta_j: Interval) -> dict:
    grid = rho_S.grid
    idx_i, idx_j = grid.indices(delta_i), grid.indices(delta_j)
    x_i, x_j = grid.points[idx_i], grid.points[idx_j]
    p, psi = mixture_decomposition(rho_S)
    dens_i = np.abs(psi[idx_i]) ** 2 * grid.dx
    dens_j = np.abs(psi[idx_j]) ** 2 * grid.dx

    z_grid = _z_grid(tau, min(delta_i.a, delta_j.a), max(delta_i.b, delta_j.b), grid.dx)
    phi_i = gaussian_convolution_factor(tau, x_i[:, None], z_grid.points[None, :]) ** 2
    phi_j = gaussian_convolution_factor(tau, x_j[:, None], z_grid.points[None, :]) ** 2
    slice_i = np.sqrt(np.maximum(dens_i.T @ phi_i, 0.0))
    slice_j = np.sqrt(np.maximum(dens_j.T @ phi_j, 0.0))
    slice_rhs = float(p @ np.sum(slice_i * slice_j, axis=1) * z_grid.dx)

    overlap = np.sqrt(2.0 * tau / np.pi) * np.exp(-2.0 * tau * np.subtract.outer(x_i, x_j) ** 2)
    double_quad = float(np.einsum('n,in,ij,jn->', p, dens_i, overlap, dens_j))
    separation = float(np.min(np.abs(np.subtract.outer(x_i, x_j))))
    masses = float(p @ (dens_i.sum(axis=0) * dens_j.sum(axis=0)))
    separation_bound = float(np.sqrt(2.0 * tau / np.pi) * np.exp(-2.0 * tau * separation ** 2) * masses)
    return {'rhs': slice_rhs, 'double_quadrature': double_quad, 'separation': separation,
            'separation_bound': separation_bound, 'z_points': z_grid.n}


def gaussian_offdiag_bound(rho_S: CvDensity, t: float, alpha: float, n_exp: float,
                           delta_i: Interval, delta_j: Interval, reference_t: Optional[float] = None,
                           tol: float = DEFAULT_TOL) -> BoundReport:
    """
    Block norm under Gamma = exp(-tau (x - y)^2), tau = t**n_exp * alpha,
    against the slice-norm bound of its convolution factorization.

    rhs = sum_n p_n integral ||phi(., z) psi_n chi_i|| ||phi(., z) psi_n chi_j|| dz
    with phi(x, z) = (2 sqrt(tau / pi))^(1/2) exp(-2 tau (x - z)^2). The double
    quadrature of sqrt(2 tau / pi) exp(-2 tau (x - y)^2) |psi_n(x)|^2 |psi_n(y)|^2,
    its separation estimate and the decay against ``reference_t`` are details.
    """
    _check_disjoint(delta_i, delta_j)
    tau = GaussianDecoherence(alpha, n_exp).tau(t)
    if tau <= 0:
        raise PreconditionError("The Gaussian bound needs t > 0")
    gamma = kernels.gaussian_gamma(t, alpha, n_exp, rho_S.grid)
    grid = rho_S.grid
    lhs = trace_norm(_decohered_block(gamma, rho_S, grid.indices(delta_i), grid.indices(delta_j)))

    terms = _gaussian_terms(rho_S, tau, delta_i, delta_j)
    details = {key: value for key, value in terms.items() if key != 'rhs'}
    details['tau'] = tau
    if reference_t is not None:
        reference = _gaussian_terms(rho_S, GaussianDecoherence(alpha, n_exp).tau(reference_t), delta_i, delta_j)
        details['reference_t'] = float(reference_t)
        details['decay_ratio'] = terms['rhs'] / reference['rhs'] if reference['rhs'] > 0 else float('nan')
    return BoundReport("gaussian_offdiag_bound", lhs, terms['rhs'], tol,
                       context=_cells_context(delta_i, delta_j, t=float(t)), details=details)


def gaussian_blocks(rho_S: CvDensity, t: float, alpha: float, n_exp: float, partition: Partition,
                    reference_t: Optional[float] = None, tol: float = DEFAULT_TOL) -> List[BoundReport]:
    reports = []
    for i, delta_i in enumerate(partition.cells):
        for j, delta_j in enumerate(partition.cells):
            if i != j:
                report = gaussian_offdiag_bound(rho_S, t, alpha, n_exp, delta_i, delta_j, reference_t, tol)
                reports.append(report.with_context(i=i, j=j))
    return reports


def offdiag_total_bound(rho_t: JointState, partition: Partition, blocks: Sequence[BoundReport],
                        name: str = "offdiag_total", tol: float = DEFAULT_TOL) -> BoundReport:
    """(1/2) ||off-diagonal part of rho_t||_1 against the summed block bounds."""
    _, off = split_diag_offdiag(rho_t, partition)
    lhs = 0.5 * trace_norm(off)
    details = {
        'blocks': len(blocks),
        'block_lhs_sum': float(sum(b.lhs for b in blocks)),
        'block_rhs_max': float(max((b.rhs for b in blocks), default=0.0)),
    }
    return BoundReport(name, lhs, float(sum(b.rhs for b in blocks)), tol, Relation.le, details=details)


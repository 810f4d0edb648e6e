from .report import BoundReport, DEFAULT_TOL
from .offdiag import (kupsch_offdiag_bound, kupsch_ibp_identity, kupsch_blocks, kupsch_derivative_defect,
                      stolz_product_bound, gaussian_offdiag_bound, gaussian_blocks, offdiag_total_bound,
                      mixture_decomposition)
from .diagonal import (diagonal_bound, diagonal_bound_multi, further_diagonal_bound, multi_route_report,
                       branch_normalizations)
from .lemmas import telescopic_bound, trace_distance_rescale, trace_distance_rescale_check, pure_distance_formula_check
from .chain import objective_split, objective_chain, jensen_step

__all__ = [
    'BoundReport', 'DEFAULT_TOL',
    'kupsch_offdiag_bound', 'kupsch_ibp_identity', 'kupsch_blocks', 'kupsch_derivative_defect',
    'stolz_product_bound', 'gaussian_offdiag_bound', 'gaussian_blocks', 'offdiag_total_bound',
    'mixture_decomposition',
    'diagonal_bound', 'diagonal_bound_multi', 'further_diagonal_bound', 'multi_route_report',
    'branch_normalizations',
    'telescopic_bound', 'trace_distance_rescale', 'trace_distance_rescale_check', 'pure_distance_formula_check',
    'objective_split', 'objective_chain', 'jensen_step',
]

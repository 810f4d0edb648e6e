from .numkit import (DensityMatrix, trace_norm, operator_norm, trace_distance, fidelity, partial_trace,
                     kron, kron_all, psd_sqrt, purity, herm_expm, herm_expm_batch, dimension_cap,
                     random_density_matrix, random_unit_vector, random_hermitian)

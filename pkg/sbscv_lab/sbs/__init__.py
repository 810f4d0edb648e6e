from .partition import Partition, EnvPvm
from .candidate import (Branch, SbsCandidate, branch_data, build_sbs_candidate, sbs_distance, split_diag_offdiag,
                        lambda_map)
from .pvm import heuristic_env_pvm, exhaustive_env_pvm, fixed_env_pvm, pvm_objective
from .diagnostics import branch_fidelity_matrix, fidelity_summary, qsd_error, helstrom_error

from .cvgrid import Grid, Interval, CvDensity, gaussian_wavepacket, cat_state, interval_projector
from .envmodel import (EnvModel, EnvEnsemble, GaussianDecoherence, make_oscillator_env, make_qubit_env,
                       characteristic_function, check_truncation, used_s_range)
from .kernels import GammaKernel, gamma_from_envs, gaussian_gamma, apply_decoherence
from .dynamics import JointState, evolve_product, evolve_full, lemma_rhs, ensemble_gamma, check_commutation

"""
Dense complex linear algebra shared by the physics, sbs and bounds modules.

Everything works on complex128 ndarrays. Trace norms always come from a full
singular value computation; there is no iterative or truncated shortcut.
"""

import string
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from sbscv_lab.utils.envvars import EnvVars, DEFAULT_DIMENSION_CAP
from sbscv_lab.utils.errors import InvalidInputError, ResourceError
from sbscv_lab.utils.lab_types import CMatrix
from sbscv_lab.utils.logger import LogManager

HERMITIAN_RTOL = 1e-12
DENSITY_TOL = 1e-10
PSD_CLIP_TOL = 1e-10


def _logger():
    return LogManager().get_logger("Numkit")


def dimension_cap(cap: Optional[int] = None) -> int:
    """Explicit cap if given, else SBSCV_CAP, else the default."""
    if cap is not None:
        if int(cap) < 1:
            raise InvalidInputError(f"Dimension cap must be positive, got {cap}")
        return int(cap)
    env_cap = EnvVars().dimension_cap
    return env_cap if env_cap is not None else DEFAULT_DIMENSION_CAP


def as_cmatrix(a, name: str = "matrix", square: bool = True) -> CMatrix:
    mat = np.asarray(a, dtype=np.complex128)
    if mat.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {mat.shape}")
    if square and mat.shape[0] != mat.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return mat


def hermiticity_defect(a) -> float:
    mat = np.asarray(a)
    return float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0


def is_hermitian(a, rtol: float = HERMITIAN_RTOL) -> bool:
    mat = as_cmatrix(a)
    scale = 1.0 + (float(np.max(np.abs(mat))) if mat.size else 0.0)
    return hermiticity_defect(mat) <= rtol * scale


def _require_hermitian(a, name: str) -> CMatrix:
    mat = as_cmatrix(a, name)
    if not is_hermitian(mat):
        raise InvalidInputError(f"{name} is not Hermitian (defect {hermiticity_defect(mat):.3e})")
    return mat


def singular_values(a) -> np.ndarray:
    mat = as_cmatrix(a, square=False)
    try:
        return scipy.linalg.svdvals(mat, check_finite=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        return scipy.linalg.svd(mat, compute_uv=False, check_finite=False, lapack_driver='gesvd')


def trace_norm(a) -> float:
    """Sum of singular values."""
    return float(np.sum(singular_values(a)))


def operator_norm(a) -> float:
    sv = singular_values(a)
    return float(sv[0]) if sv.size else 0.0


def trace_distance(a, b) -> float:
    return 0.5 * trace_norm(_matrix_of(a) - _matrix_of(b))


def psd_sqrt(a) -> CMatrix:
    """
    Principal square root of a positive semidefinite matrix.

    Eigenvalues in [-PSD_CLIP_TOL, 0) are clipped to zero; anything more
    negative is rejected.
    """
    mat = _require_hermitian(_matrix_of(a), "PSD matrix")
    w, v = scipy.linalg.eigh(mat, check_finite=False)
    if w.size and w[0] < -PSD_CLIP_TOL:
        raise InvalidInputError(f"Matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """F = ||sqrt(rho) sqrt(sigma)||_1 ** 2, clamped to [0, 1]."""
    r = _matrix_of(rho)
    s = _matrix_of(sigma)
    if r.shape != s.shape:
        raise InvalidInputError(f"Fidelity needs matching shapes, got {r.shape} and {s.shape}")
    value = trace_norm(psd_sqrt(r) @ psd_sqrt(s)) ** 2
    return float(min(max(value, 0.0), 1.0))


def herm_expm(h, s: float) -> CMatrix:
    """exp(-i s H) for Hermitian H via its eigendecomposition."""
    mat = _require_hermitian(h, "generator")
    if not np.isfinite(s):
        raise InvalidInputError(f"Non-finite evolution parameter {s}")
    w, v = scipy.linalg.eigh(mat, check_finite=False)
    return (v * np.exp(-1j * s * w)) @ v.conj().T


def herm_expm_batch(h, s_values) -> np.ndarray:
    """Stack of exp(-i s H) for every s, sharing one eigendecomposition."""
    mat = _require_hermitian(h, "generator")
    s = np.asarray(s_values, dtype=float).ravel()
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("Non-finite evolution parameter")
    w, v = scipy.linalg.eigh(mat, check_finite=False)
    phases = np.exp(-1j * np.outer(s, w))
    return np.einsum('ij,sj,kj->sik', v, phases, v.conj(), optimize=True)


def _check_cap(dim: int, cap: Optional[int]):
    limit = dimension_cap(cap)
    if dim > limit:
        _logger().error(f"Requested dimension {dim} exceeds cap {limit}")
        raise ResourceError(f"Requested dimension {dim} exceeds the dimension cap {limit}")


def kron(a, b, cap: Optional[int] = None) -> CMatrix:
    left = as_cmatrix(a, "left factor", square=False)
    right = as_cmatrix(b, "right factor", square=False)
    _check_cap(left.shape[0] * right.shape[0], cap)
    return np.kron(left, right)


def kron_all(factors: Sequence, cap: Optional[int] = None) -> CMatrix:
    """Kronecker product of all factors in order; the empty product is [[1]]."""
    mats = [as_cmatrix(f, "factor", square=False) for f in factors]
    if not mats:
        return np.ones((1, 1), dtype=np.complex128)
    _check_cap(int(np.prod([m.shape[0] for m in mats])), cap)
    return reduce(np.kron, mats)


def validate_density(mat: CMatrix, tol: float = DENSITY_TOL):
    defect = hermiticity_defect(mat)
    if defect > tol:
        raise InvalidInputError(f"Density matrix is not Hermitian (defect {defect:.3e})")
    tr = np.trace(mat)
    if abs(tr - 1.0) > tol:
        raise InvalidInputError(f"Density matrix trace {tr.real:.12f} differs from 1")
    min_eig = scipy.linalg.eigvalsh(mat, check_finite=False)[0]
    if min_eig < -tol:
        raise InvalidInputError(f"Density matrix has negative eigenvalue {min_eig:.3e}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix with its tensor factor dimensions."""
    mat: CMatrix
    dims: Tuple[int, ...]
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        mat = as_cmatrix(self.mat, "density matrix")
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise InvalidInputError(f"Invalid factor dimensions {dims}")
        if int(np.prod(dims)) != mat.shape[0]:
            raise InvalidInputError(f"Factor dimensions {dims} do not match matrix size {mat.shape[0]}")
        object.__setattr__(self, 'mat', mat)
        object.__setattr__(self, 'dims', dims)
        if self.check:
            validate_density(mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_pure(cls, psi, dims: Optional[Sequence[int]] = None) -> 'DensityMatrix':
        vec = np.asarray(psi, dtype=np.complex128).ravel()
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or norm == 0.0:
            raise InvalidInputError("State vector must be finite and non-zero")
        vec = vec / norm
        return cls(np.outer(vec, vec.conj()), tuple(dims) if dims is not None else (vec.size,))

    @classmethod
    def maximally_mixed(cls, dim: int) -> 'DensityMatrix':
        return cls(np.eye(dim, dtype=np.complex128) / dim, (dim,))


def _matrix_of(a: Union[DensityMatrix, np.ndarray]) -> CMatrix:
    return a.mat if isinstance(a, DensityMatrix) else as_cmatrix(a)


def purity(rho) -> float:
    mat = _matrix_of(rho)
    return float(np.real(np.vdot(mat.conj().T, mat)))


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Trace out every factor not listed in keep (0-based, any order)."""
    n = len(rho.dims)
    kept = tuple(sorted(set(int(k) for k in keep)))
    if not kept:
        raise InvalidInputError("partial_trace needs at least one factor to keep")
    if any(k < 0 or k >= n for k in kept):
        raise InvalidInputError(f"Keep indices {tuple(keep)} out of range for {n} factors")
    if n > len(string.ascii_letters) // 2:
        raise InvalidInputError(f"Too many tensor factors ({n})")

    rows = string.ascii_letters[:n]
    cols = ''.join(string.ascii_letters[n + k] if k in kept else rows[k] for k in range(n))
    out = ''.join(rows[k] for k in kept) + ''.join(cols[k] for k in kept)
    reduced = np.einsum(f"{rows}{cols}->{out}", rho.mat.reshape(rho.dims + rho.dims))

    kept_dims = tuple(rho.dims[k] for k in kept)
    size = int(np.prod(kept_dims))
    return DensityMatrix(reduced.reshape(size, size), kept_dims, check=False)


def random_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> CMatrix:
    """Ginibre-distributed density matrix of the given rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> CMatrix:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (g + g.conj().T)

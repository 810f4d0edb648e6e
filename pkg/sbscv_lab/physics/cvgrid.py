"""
Midpoint discretization of the system's position variable.

Kernels K(x, y) carry units of 1/length. Every trace-class statement is made
on the matrix M = K * dx, which is what ``CvDensity.matrix`` returns.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from sbscv_lab.numerics.numkit import DensityMatrix, as_cmatrix, hermiticity_defect, purity
from sbscv_lab.utils.errors import ConfigurationError, InvalidInputError, PreconditionError
from sbscv_lab.utils.lab_types import CMatrix

TRACE_TOL = 1e-8
KERNEL_HERMITIAN_TOL = 1e-10
BOUNDARY_MASS_TOL = 1e-12
BOUNDARY_POINTS = 3
MARGIN_WIDTHS = 5.0


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise InvalidInputError(f"Grid needs at least 2 points, got {self.n}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise InvalidInputError(f"Grid bounds must satisfy x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @cached_property
    def points(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n) + 0.5) * self.dx

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def refined(self) -> 'Grid':
        return Grid(self.x_min, self.x_max, 2 * self.n)

    def indices(self, delta: 'Interval') -> np.ndarray:
        """Grid indices j with x_j in [a, b)."""
        pts = self.points
        idx = np.flatnonzero((pts >= delta.a) & (pts < delta.b))
        if idx.size == 0:
            raise PreconditionError(f"Interval [{delta.a}, {delta.b}) contains no grid point")
        return idx

    def full_interval(self) -> 'Interval':
        return Interval(self.x_min, self.x_max)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a >= self.b:
            raise InvalidInputError(f"Interval needs a < b, got [{self.a}, {self.b})")

    @property
    def length(self) -> float:
        return self.b - self.a

    def overlaps(self, other: 'Interval') -> bool:
        return self.a < other.b and other.a < self.b

    def contains(self, x: float) -> bool:
        return self.a <= x < self.b

    def check_within(self, grid: Grid, tol: float = 1e-12):
        if self.a < grid.x_min - tol or self.b > grid.x_max + tol:
            raise PreconditionError(
                f"Interval [{self.a}, {self.b}) leaves the grid [{grid.x_min}, {grid.x_max}]")


@dataclass(frozen=True, eq=False)
class CvDensity:
    grid: Grid
    kernel: CMatrix

    def __post_init__(self):
        kernel = as_cmatrix(self.kernel, "kernel")
        if kernel.shape[0] != self.grid.n:
            raise InvalidInputError(f"Kernel size {kernel.shape[0]} does not match grid size {self.grid.n}")
        defect = hermiticity_defect(kernel)
        if defect > KERNEL_HERMITIAN_TOL * max(1.0, float(np.max(np.abs(kernel)))):
            raise InvalidInputError(f"Kernel is not Hermitian (defect {defect:.3e})")
        trace = float(np.real(np.trace(kernel))) * self.grid.dx
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidInputError(f"Kernel discrete trace {trace:.12f} differs from 1")
        object.__setattr__(self, 'kernel', kernel)

    @cached_property
    def matrix(self) -> DensityMatrix:
        return DensityMatrix(self.kernel * self.grid.dx, (self.grid.n,))

    @classmethod
    def from_matrix(cls, grid: Grid, mat) -> 'CvDensity':
        return cls(grid, as_cmatrix(mat, "density matrix") / grid.dx)

    @classmethod
    def from_wavefunction(cls, grid: Grid, psi) -> 'CvDensity':
        vec = np.asarray(psi, dtype=np.complex128).ravel()
        if vec.size != grid.n:
            raise InvalidInputError(f"Wavefunction length {vec.size} does not match grid size {grid.n}")
        norm = np.sqrt(np.sum(np.abs(vec) ** 2) * grid.dx)
        if not np.isfinite(norm) or norm == 0.0:
            raise InvalidInputError("Wavefunction must be finite and non-zero")
        vec = vec / norm
        return cls(grid, np.outer(vec, vec.conj()))

    @property
    def position_density(self) -> np.ndarray:
        """|psi(x_j)|^2 for pure states, K(x_j, x_j) in general."""
        return np.real(np.diag(self.kernel)).copy()

    def purity(self) -> float:
        return purity(self.matrix)


def check_boundary_mass(grid: Grid, density: np.ndarray, what: str = "state"):
    """Mass within BOUNDARY_POINTS points of either edge must stay below BOUNDARY_MASS_TOL."""
    k = min(BOUNDARY_POINTS, grid.n // 2)
    left = float(np.sum(density[:k])) * grid.dx
    right = float(np.sum(density[-k:])) * grid.dx
    if max(left, right) > BOUNDARY_MASS_TOL:
        raise ConfigurationError(
            f"{what} leaks off the grid: boundary mass {max(left, right):.3e} exceeds {BOUNDARY_MASS_TOL:g}")


def _packet(grid: Grid, center: float, width: float, momentum: float) -> np.ndarray:
    x = grid.points
    return np.exp(-(x - center) ** 2 / (4.0 * width ** 2)) * np.exp(1j * momentum * x)


def _check_packet_params(grid: Grid, center: float, width: float):
    if not width > 0:
        raise ConfigurationError(f"Wavepacket width must be positive, got {width}")
    margin = MARGIN_WIDTHS * width
    if center - margin < grid.x_min or center + margin > grid.x_max:
        raise ConfigurationError(
            f"Wavepacket at {center} with width {width} needs {margin:g} clearance inside "
            f"[{grid.x_min}, {grid.x_max}]")


def gaussian_wavepacket(grid: Grid, center: float, width: float, momentum: float = 0.0) -> np.ndarray:
    """Discretely L2-normalized Gaussian; |psi|^2 has standard deviation ``width``."""
    _check_packet_params(grid, center, width)
    psi = _packet(grid, center, width, momentum)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    check_boundary_mass(grid, np.abs(psi) ** 2, f"Wavepacket at {center}")
    return psi


def cat_state(grid: Grid, centers: Sequence[float], weights: Sequence[complex], width: float,
              momenta: Optional[Sequence[float]] = None) -> CvDensity:
    centers = [float(c) for c in centers]
    weights = np.asarray(weights, dtype=np.complex128)
    if len(centers) == 0 or len(centers) != weights.size:
        raise ConfigurationError("Cat state needs one weight per center")
    if len(set(centers)) != len(centers):
        raise ConfigurationError(f"Cat state centers must be distinct, got {centers}")
    if not np.any(weights != 0):
        raise ConfigurationError("Cat state weights are all zero")
    momenta = [0.0] * len(centers) if momenta is None else [float(p) for p in momenta]
    if len(momenta) != len(centers):
        raise ConfigurationError("Cat state needs one momentum per center")

    psi = np.zeros(grid.n, dtype=np.complex128)
    for center, weight, momentum in zip(centers, weights, momenta):
        _check_packet_params(grid, center, width)
        packet = _packet(grid, center, width, momentum)
        psi += weight * packet / np.sqrt(np.sum(np.abs(packet) ** 2) * grid.dx)

    norm = np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    if norm == 0.0:
        raise ConfigurationError("Cat state components cancel exactly")
    psi /= norm
    check_boundary_mass(grid, np.abs(psi) ** 2, "Cat state")
    return CvDensity.from_wavefunction(grid, psi)


def position_operator(grid: Grid) -> CMatrix:
    return np.diag(grid.points).astype(np.complex128)


def interval_projector(grid: Grid, delta: Interval) -> CMatrix:
    delta.check_within(grid)
    diag = np.zeros(grid.n, dtype=np.complex128)
    diag[grid.indices(delta)] = 1.0
    return np.diag(diag)


def expectation(rho: CvDensity, operator) -> complex:
    return complex(np.trace(rho.matrix.mat @ as_cmatrix(operator, "operator")))


def mean_position(rho: CvDensity) -> float:
    return float(np.sum(rho.grid.points * rho.position_density) * rho.grid.dx)

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from sbscv_lab.numerics.numkit import as_cmatrix, kron_all
from sbscv_lab.physics.cvgrid import Grid, Interval, interval_projector
from sbscv_lab.utils.errors import InvalidInputError, PreconditionError
from sbscv_lab.utils.lab_types import CMatrix

PVM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Partition:
    """Half-open cells covering every grid point exactly once."""
    grid: Grid
    cells: Tuple[Interval, ...]
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cells = tuple(self.cells)
        if not cells:
            raise InvalidInputError("A partition needs at least one cell")
        labels = np.full(self.grid.n, -1, dtype=int)
        for i, cell in enumerate(cells):
            cell.check_within(self.grid)
            idx = self.grid.indices(cell)
            if np.any(labels[idx] >= 0):
                raise InvalidInputError(f"Cell {i} [{cell.a}, {cell.b}) overlaps an earlier cell")
            labels[idx] = i
        if np.any(labels < 0):
            missing = self.grid.points[labels < 0]
            raise InvalidInputError(f"Partition leaves {missing.size} grid points uncovered (first at x={missing[0]:g})")
        object.__setattr__(self, 'cells', cells)
        object.__setattr__(self, 'labels', labels)

    def __len__(self) -> int:
        return len(self.cells)

    @classmethod
    def uniform(cls, grid: Grid, k: int) -> 'Partition':
        if k < 1:
            raise InvalidInputError(f"Uniform partition needs k >= 1, got {k}")
        edges = np.linspace(grid.x_min, grid.x_max, k + 1)
        return cls(grid, tuple(Interval(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])))

    @classmethod
    def from_cuts(cls, grid: Grid, cuts: Sequence[float]) -> 'Partition':
        cuts = sorted(float(c) for c in cuts)
        if any(c <= grid.x_min or c >= grid.x_max for c in cuts):
            raise InvalidInputError(f"Cut points {cuts} must lie strictly inside the grid")
        edges = [grid.x_min] + cuts + [grid.x_max]
        return cls(grid, tuple(Interval(a, b) for a, b in zip(edges[:-1], edges[1:])))

    def indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels == i)

    def projector(self, i: int) -> CMatrix:
        return interval_projector(self.grid, self.cells[i])


def _check_projector(P: CMatrix, what: str):
    if np.max(np.abs(P - P.conj().T)) > PVM_TOL:
        raise InvalidInputError(f"{what} is not Hermitian")
    if np.max(np.abs(P @ P - P)) > PVM_TOL:
        raise InvalidInputError(f"{what} is not idempotent")


@dataclass(frozen=True, eq=False)
class EnvPvm:
    """
    Projective measurement on each observed environment.

    ``projectors[k][m]`` belongs to partition cell ``cells[m]``; the remainder
    of environment k completes the identity.
    """
    cells: Tuple[int, ...]
    projectors: Tuple[Tuple[CMatrix, ...], ...]
    remainders: Tuple[CMatrix, ...]

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        if len(set(cells)) != len(cells):
            raise InvalidInputError(f"Duplicate cells in PVM: {cells}")
        projectors = tuple(tuple(as_cmatrix(P, "projector") for P in per_env) for per_env in self.projectors)
        remainders = tuple(as_cmatrix(R, "remainder") for R in self.remainders)
        if len(remainders) != len(projectors):
            raise InvalidInputError("One remainder per observed environment is required")

        for k, (per_env, remainder) in enumerate(zip(projectors, remainders)):
            if len(per_env) != len(cells):
                raise InvalidInputError(f"Environment {k} has {len(per_env)} projectors for {len(cells)} cells")
            dim = remainder.shape[0]
            total = remainder.copy()
            _check_projector(remainder, f"Remainder of environment {k}")
            for m, P in enumerate(per_env):
                if P.shape != (dim, dim):
                    raise InvalidInputError(f"Projector {m} of environment {k} has shape {P.shape}")
                _check_projector(P, f"Projector {m} of environment {k}")
                for other in per_env[m + 1:]:
                    if np.max(np.abs(P @ other)) > PVM_TOL:
                        raise InvalidInputError(f"Projectors of environment {k} are not mutually orthogonal")
                total = total + P
            if np.max(np.abs(total - np.eye(dim))) > PVM_TOL:
                raise InvalidInputError(f"Projectors of environment {k} do not resolve the identity")

        object.__setattr__(self, 'cells', cells)
        object.__setattr__(self, 'projectors', projectors)
        object.__setattr__(self, 'remainders', remainders)

    @classmethod
    def from_projectors(cls, cells: Sequence[int], projectors: Sequence[Sequence[CMatrix]]) -> 'EnvPvm':
        remainders = []
        for per_env in projectors:
            dim = np.asarray(per_env[0]).shape[0]
            remainder = np.eye(dim, dtype=np.complex128) - sum(np.asarray(P, dtype=np.complex128) for P in per_env)
            remainders.append(remainder)
        return cls(tuple(cells), tuple(tuple(p) for p in projectors), tuple(remainders))

    @classmethod
    def trivial(cls, cells: Sequence[int]) -> 'EnvPvm':
        """PVM for a run without observed environments."""
        return cls(tuple(cells), (), ())

    @property
    def env_dims(self) -> Tuple[int, ...]:
        return tuple(R.shape[0] for R in self.remainders)

    def position(self, cell: int) -> int:
        try:
            return self.cells.index(cell)
        except ValueError:
            raise PreconditionError(f"Cell {cell} has no projector in this PVM")

    def joint_projector(self, pos: int) -> CMatrix:
        """Tensor product over environments of the projectors at position pos."""
        return kron_all([per_env[pos] for per_env in self.projectors])

    def joint_remainder(self) -> CMatrix:
        dim = int(np.prod(self.env_dims)) if self.env_dims else 1
        return np.eye(dim, dtype=np.complex128) - sum(self.joint_projector(m) for m in range(len(self.cells)))


def check_alignment(pvm: EnvPvm, partition: Partition, env_dims: Optional[Sequence[int]] = None):
    if any(c < 0 or c >= len(partition) for c in pvm.cells):
        raise PreconditionError(f"PVM cells {pvm.cells} do not belong to a {len(partition)}-cell partition")
    if env_dims is not None and tuple(env_dims) != pvm.env_dims:
        raise PreconditionError(f"PVM environment dims {pvm.env_dims} do not match state dims {tuple(env_dims)}")

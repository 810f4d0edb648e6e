import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import jsonschema
import numpy as np

from sbscv_lab.physics.cvgrid import CvDensity, Grid, cat_state, gaussian_wavepacket
from sbscv_lab.physics.envmodel import (EnvEnsemble, EnvModel, GaussianDecoherence, make_oscillator_env,
                                        make_qubit_env)
from sbscv_lab.sbs.partition import Partition
from sbscv_lab.sbs.pvm import EXHAUSTIVE_MAX_DIM
from sbscv_lab.utils.envvars import DEFAULT_DIMENSION_CAP, EnvVars
from sbscv_lab.utils.errors import ConfigurationError, SbscvError
from sbscv_lab.utils.lab_types import EnvKind, PartitionKind, PvmStrategy, StateKind
from sbscv_lab.utils.logger import LogManager

SCHEMA_VERSION = 1
DEFAULT_GRID_POINTS = 128
DEFAULT_BOUND_TOL = 1e-8
TIME_MATCH_TOL = 1e-12

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}}

_ENV_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": [kind.value for kind in EnvKind]},
        "dim": {"type": "integer", "minimum": 2},
        "coupling": {"type": "number"},
        "occupation": {"type": "number", "minimum": 0},
        "excited_population": {"type": "number", "minimum": 0, "maximum": 1},
        "label": {"type": "string"},
    },
}


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n: int = DEFAULT_GRID_POINTS

    @classmethod
    def from_dict(cls, data: dict) -> 'GridSpec':
        return cls(x_min=float(data['x_min']), x_max=float(data['x_max']), n=int(data.get('n', DEFAULT_GRID_POINTS)))

    def build(self) -> Grid:
        return Grid(self.x_min, self.x_max, self.n)


@dataclass(frozen=True)
class StateSpec:
    kind: StateKind
    centers: Tuple[float, ...]
    width: float
    weights: Tuple[complex, ...] = ()
    momentum: float = 0.0

    def __post_init__(self):
        if self.kind == StateKind.gaussian and len(self.centers) != 1:
            raise ConfigurationError(f"A gaussian state takes exactly one center, got {len(self.centers)}")
        if self.weights and len(self.weights) != len(self.centers):
            raise ConfigurationError(f"state.weights has {len(self.weights)} entries for {len(self.centers)} centers")

    @classmethod
    def from_dict(cls, data: dict) -> 'StateSpec':
        weights = tuple(complex(w[0], w[1]) if isinstance(w, list) else complex(w) for w in data.get('weights', []))
        return cls(
            kind=StateKind(data['kind']),
            centers=tuple(float(c) for c in data['centers']),
            width=float(data['width']),
            weights=weights,
            momentum=float(data.get('momentum', 0.0)),
        )

    def build(self, grid: Grid) -> CvDensity:
        if self.kind == StateKind.gaussian:
            return CvDensity.from_wavefunction(grid, gaussian_wavepacket(grid, self.centers[0], self.width,
                                                                          self.momentum))
        weights = self.weights or tuple(1.0 for _ in self.centers)
        return cat_state(grid, self.centers, weights, self.width, [self.momentum] * len(self.centers))


@dataclass(frozen=True)
class EnvSpec:
    kind: EnvKind
    dim: int = 2
    coupling: float = 1.0
    occupation: float = 0.0
    excited_population: float = 0.5
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind == EnvKind.qubit and self.dim != 2:
            raise ConfigurationError(f"A qubit environment has dimension 2, got {self.dim}")

    @classmethod
    def from_dict(cls, data: dict) -> 'EnvSpec':
        kind = EnvKind(data['kind'])
        if kind != EnvKind.qubit and 'dim' not in data:
            raise ConfigurationError(f"Environment of kind '{kind.value}' needs 'dim'")
        return cls(
            kind=kind,
            dim=int(data.get('dim', 2)),
            coupling=float(data.get('coupling', 1.0)),
            occupation=float(data.get('occupation', 0.0)),
            excited_population=float(data.get('excited_population', 0.5)),
            label=data.get('label'),
        )

    def build(self) -> EnvModel:
        if self.kind == EnvKind.qubit:
            return make_qubit_env(self.coupling, self.excited_population, self.label)
        return make_oscillator_env(self.dim, self.kind, self.occupation, self.coupling, self.label)


@dataclass(frozen=True)
class GammaSpec:
    alpha: float
    n_exp: float = 1.0

    @classmethod
    def from_dict(cls, data: dict) -> 'GammaSpec':
        return cls(alpha=float(data['alpha']), n_exp=float(data.get('n_exp', 1.0)))

    def build(self) -> GaussianDecoherence:
        return GaussianDecoherence(self.alpha, self.n_exp)


@dataclass(frozen=True)
class EnsembleSpec:
    traced: Tuple[EnvSpec, ...] = ()
    observed: Tuple[EnvSpec, ...] = ()
    gamma: Optional[GammaSpec] = None

    def __post_init__(self):
        if not self.traced and not self.observed and self.gamma is None:
            raise ConfigurationError("ensemble needs at least one traced, observed or closed-form environment")

    @classmethod
    def from_dict(cls, data: dict) -> 'EnsembleSpec':
        return cls(
            traced=tuple(EnvSpec.from_dict(e) for e in data.get('traced', [])),
            observed=tuple(EnvSpec.from_dict(e) for e in data.get('observed', [])),
            gamma=GammaSpec.from_dict(data['gamma']) if 'gamma' in data else None,
        )

    @property
    def observed_dims(self) -> Tuple[int, ...]:
        return tuple(spec.dim for spec in self.observed)

    @property
    def gaussian_only(self) -> bool:
        """Traced part is exactly the closed-form Gaussian kernel."""
        return self.gamma is not None and not self.traced

    def build(self) -> EnvEnsemble:
        return EnvEnsemble(
            traced=tuple(spec.build() for spec in self.traced),
            observed=tuple(spec.build() for spec in self.observed),
            closed_form=self.gamma.build() if self.gamma is not None else None,
        )


@dataclass(frozen=True)
class PartitionSpec:
    kind: PartitionKind
    k: int = 2
    cuts: Tuple[float, ...] = ()
    per_time: Tuple[Tuple[float, Tuple[float, ...]], ...] = ()

    @classmethod
    def from_dict(cls, data: dict) -> 'PartitionSpec':
        kind = PartitionKind(data['kind'])
        if kind == PartitionKind.cuts and 'cuts' not in data:
            raise ConfigurationError("partition of kind 'cuts' needs 'cuts'")
        return cls(
            kind=kind,
            k=int(data.get('k', 2)),
            cuts=tuple(float(c) for c in data.get('cuts', [])),
            per_time=tuple((float(entry['t']), tuple(float(c) for c in entry['cuts']))
                           for entry in data.get('per_time', [])),
        )

    def build(self, grid: Grid, t: float) -> Partition:
        for time, cuts in self.per_time:
            if abs(time - t) <= TIME_MATCH_TOL:
                return Partition.from_cuts(grid, cuts)
        if self.kind == PartitionKind.uniform:
            return Partition.uniform(grid, self.k)
        return Partition.from_cuts(grid, self.cuts)


@dataclass(frozen=True)
class PvmSpec:
    strategy: PvmStrategy = PvmStrategy.heuristic
    fixed_cells: Optional[Tuple[Tuple[int, ...], ...]] = None

    @classmethod
    def from_dict(cls, data: dict) -> 'PvmSpec':
        fixed = data.get('fixed_cells')
        return cls(
            strategy=PvmStrategy(data.get('strategy', PvmStrategy.heuristic.value)),
            fixed_cells=tuple(tuple(int(i) for i in cell) for cell in fixed) if fixed is not None else None,
        )


@dataclass(frozen=True)
class ToleranceSpec:
    bound: float = DEFAULT_BOUND_TOL

    @classmethod
    def from_dict(cls, data: dict) -> 'ToleranceSpec':
        return cls(bound=float(data.get('bound', DEFAULT_BOUND_TOL)))


@dataclass(frozen=True)
class Scenario:
    SCHEMA = {
        "type": "object",
        "required": ["schema", "name", "grid", "state", "ensemble", "times", "partition"],
        "additionalProperties": False,
        "properties": {
            "schema": {"const": SCHEMA_VERSION},
            "name": {"type": "string", "minLength": 1},
            "grid": {
                "type": "object",
                "required": ["x_min", "x_max"],
                "additionalProperties": False,
                "properties": {
                    "x_min": {"type": "number"},
                    "x_max": {"type": "number"},
                    "n": {"type": "integer", "minimum": 2},
                },
            },
            "state": {
                "type": "object",
                "required": ["kind", "centers", "width"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": [kind.value for kind in StateKind]},
                    "centers": {**_NUMBER_LIST, "minItems": 1},
                    "width": {"type": "number", "exclusiveMinimum": 0},
                    "weights": {
                        "type": "array",
                        "items": {"oneOf": [
                            {"type": "number"},
                            {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        ]},
                    },
                    "momentum": {"type": "number"},
                },
            },
            "ensemble": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "traced": {"type": "array", "items": _ENV_SCHEMA},
                    "observed": {"type": "array", "items": _ENV_SCHEMA},
                    "gamma": {
                        "type": "object",
                        "required": ["alpha"],
                        "additionalProperties": False,
                        "properties": {
                            "alpha": {"type": "number", "exclusiveMinimum": 0},
                            "n_exp": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
            "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            "partition": {
                "type": "object",
                "required": ["kind"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": [kind.value for kind in PartitionKind]},
                    "k": {"type": "integer", "minimum": 1},
                    "cuts": _NUMBER_LIST,
                    "per_time": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["t", "cuts"],
                            "additionalProperties": False,
                            "properties": {"t": {"type": "number", "minimum": 0}, "cuts": _NUMBER_LIST},
                        },
                    },
                },
            },
            "pvm": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "strategy": {"enum": [strategy.value for strategy in PvmStrategy]},
                    "fixed_cells": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
                },
            },
            "tolerances": {
                "type": "object",
                "additionalProperties": False,
                "properties": {"bound": {"type": "number", "minimum": 0}},
            },
            "seed": {"type": "integer", "minimum": 0},
            "cap": {"type": "integer", "minimum": 1},
            "workers": {"type": "integer", "minimum": 1},
            "truncation_check": {"type": "boolean"},
            "reference_t": {"type": "number", "exclusiveMinimum": 0},
        },
    }

    name: str
    grid: GridSpec
    state: StateSpec
    ensemble: EnsembleSpec
    times: Tuple[float, ...]
    partition: PartitionSpec
    pvm: PvmSpec = field(default_factory=PvmSpec)
    tolerances: ToleranceSpec = field(default_factory=ToleranceSpec)
    seed: int = 0
    cap: int = DEFAULT_DIMENSION_CAP
    workers: int = 1
    truncation_check: bool = True
    reference_t: Optional[float] = None
    source: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not all(np.isfinite(t) and t >= 0 for t in self.times):
            raise ConfigurationError(f"times must be finite and non-negative, got {list(self.times)}")
        if self.pvm.strategy == PvmStrategy.fixed and self.ensemble.observed and self.pvm.fixed_cells is None:
            raise ConfigurationError("pvm strategy 'fixed' needs 'fixed_cells' when environments are observed")
        if self.pvm.strategy == PvmStrategy.exhaustive:
            too_large = [d for d in self.ensemble.observed_dims if d > EXHAUSTIVE_MAX_DIM]
            if too_large:
                raise ConfigurationError(
                    f"pvm strategy 'exhaustive' supports observed dims up to {EXHAUSTIVE_MAX_DIM}, got {too_large}")

    @classmethod
    def from_dict(cls, data: dict) -> 'Scenario':
        return cls(
            name=data['name'],
            grid=GridSpec.from_dict(data['grid']),
            state=StateSpec.from_dict(data['state']),
            ensemble=EnsembleSpec.from_dict(data['ensemble']),
            times=tuple(float(t) for t in data['times']),
            partition=PartitionSpec.from_dict(data['partition']),
            pvm=PvmSpec.from_dict(data.get('pvm', {})),
            tolerances=ToleranceSpec.from_dict(data.get('tolerances', {})),
            seed=int(data.get('seed', 0)),
            cap=int(data.get('cap', DEFAULT_DIMENSION_CAP)),
            workers=int(data.get('workers', 1)),
            truncation_check=bool(data.get('truncation_check', True)),
            reference_t=float(data['reference_t']) if 'reference_t' in data else None,
            source=data,
        )

    def effective_cap(self, override: Optional[int] = None) -> int:
        """CLI value, then SBSCV_CAP, then the scenario's own cap."""
        if override is not None:
            return int(override)
        env_cap = EnvVars().dimension_cap
        return env_cap if env_cap is not None else self.cap

    def joint_dimension(self) -> int:
        return self.grid.n * int(np.prod(self.ensemble.observed_dims)) if self.ensemble.observed else self.grid.n

    def config_hash(self) -> str:
        canonical = json.dumps(self.source, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def validate_json(data: Dict[str, Any]) -> None:
    """Raise ConfigurationError naming the offending field when data does not match Scenario.SCHEMA."""
    logger = LogManager().get_logger("Scenario")
    try:
        jsonschema.validate(instance=data, schema=Scenario.SCHEMA)
    except jsonschema.exceptions.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        logger.error(f"Scenario validation error at {where}: {e.message}")
        raise ConfigurationError(f"Invalid scenario at '{where}': {e.message}") from e


def scenario_from_dict(data: Dict[str, Any], cap: Optional[int] = None) -> Scenario:
    """Schema check, conversion and the semantic checks that need the built grid and state."""
    validate_json(data)
    try:
        scenario = Scenario.from_dict(data)
        grid = scenario.grid.build()
        scenario.state.build(grid)
        scenario.ensemble.build()
        for t in scenario.times:
            scenario.partition.build(grid, t)
    except ConfigurationError:
        raise
    except SbscvError as e:
        raise ConfigurationError(f"Scenario '{data.get('name')}': {e}") from e

    limit = scenario.effective_cap(cap)
    if scenario.joint_dimension() > limit:
        raise ConfigurationError(
            f"Scenario '{scenario.name}' needs joint dimension {scenario.joint_dimension()} above the cap {limit}")
    return scenario


def load_scenario(path: Union[str, Path], cap: Optional[int] = None) -> Scenario:
    logger = LogManager().get_logger("Scenario")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot read scenario {path}: {e}")
        raise ConfigurationError(f"Cannot read scenario {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"Scenario {path} is not valid JSON: {e}")
        raise ConfigurationError(f"{path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: scenario root must be an object")

    scenario = scenario_from_dict(data, cap)
    logger.info(f"Loaded scenario '{scenario.name}' from {path} ({len(scenario.times)} time samples)")
    return scenario


def packaged_scenarios() -> List[str]:
    root = resources.files("sbscv_lab.config") / "scenarios"
    return sorted(entry.name for entry in root.iterdir() if entry.name.endswith(".json"))


def load_packaged_scenario(filename: str, cap: Optional[int] = None) -> Scenario:
    entry = resources.files("sbscv_lab.config") / "scenarios" / filename
    try:
        data = json.loads(entry.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigurationError(f"No packaged scenario named {filename}") from e
    return scenario_from_dict(data, cap)

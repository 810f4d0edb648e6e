from typing import Union, List, Dict
from enum import Enum

import numpy as np

JSON = Union[List['JSON'],
             Dict[str, 'JSON'],
             str,
             float,
             bool,
             None]

# Dense complex128 matrix; shape and Hermiticity are checked by the consumer
CMatrix = np.ndarray


class EnvKind(Enum):
    position = "position"
    momentum = "momentum"
    number = "number"
    qubit = "qubit"


class StateKind(Enum):
    gaussian = "gaussian"
    cat = "cat"


class PartitionKind(Enum):
    uniform = "uniform"
    cuts = "cuts"


class PvmStrategy(Enum):
    heuristic = "heuristic"
    exhaustive = "exhaustive"
    fixed = "fixed"


class Relation(Enum):
    le = "le"
    eq = "eq"

from dataclasses import dataclass, field, replace
from typing import Any, Dict

import numpy as np

from sbscv_lab.utils.errors import InvalidInputError
from sbscv_lab.utils.lab_types import Relation

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class BoundReport:
    """
    Exactly computed left-hand side against the right-hand side of one inequality.

    ``relation`` is ``le`` for inequalities and ``eq`` for identity checks,
    which are satisfied when both sides agree within ``tol``.
    """
    name: str
    lhs: float
    rhs: float
    tol: float = DEFAULT_TOL
    relation: Relation = Relation.le
    context: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'lhs', float(self.lhs))
        object.__setattr__(self, 'rhs', float(self.rhs))
        object.__setattr__(self, 'tol', float(self.tol))
        object.__setattr__(self, 'relation', Relation(self.relation))
        if np.isnan(self.lhs) or np.isnan(self.rhs):
            raise InvalidInputError(f"{self.name}: bound sides must not be NaN")
        if not self.tol >= 0:
            raise InvalidInputError(f"{self.name}: tolerance must be non-negative, got {self.tol}")

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def satisfied(self) -> bool:
        if self.relation == Relation.eq:
            return bool(abs(self.lhs - self.rhs) <= self.tol)
        return bool(self.lhs <= self.rhs + self.tol)

    def with_context(self, **context) -> 'BoundReport':
        return replace(self, context={**self.context, **context})

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'margin': self.margin,
            'satisfied': self.satisfied,
            'tol': self.tol,
            'relation': self.relation.value,
            'context': dict(self.context),
            'details': dict(self.details),
        }

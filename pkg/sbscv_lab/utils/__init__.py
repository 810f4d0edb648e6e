from .singleton import Singleton
from .envvars import EnvVars, DEFAULT_DIMENSION_CAP
from .logger import LogManager
from .lab_types import JSON, CMatrix, EnvKind, StateKind, PartitionKind, PvmStrategy, Relation
from .errors import (SbscvError, InvalidInputError, PreconditionError, EmptyBranchError,
                     ConfigurationError, ResourceError, RankStarvationError, TruncationError,
                     DegenerateCandidateError)
from .system_status import collect_host_facts, get_current_revision

import hashlib
import json
import platform
from datetime import datetime, timezone
from enum import Enum
from importlib import metadata
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Union

import numpy as np
import pandas as pd
import scipy

from sbscv_lab.runner.record_formatter import RecordFormatter
from sbscv_lab.utils.logger import LogManager
from sbscv_lab.utils.system_status import collect_host_facts, get_current_revision

if TYPE_CHECKING:
    from sbscv_lab.runner.experiment import RunRecord

MANIFEST_NAME = "manifest.json"


def _package_version(name: str) -> str:
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return "unknown"


def library_versions() -> Dict[str, str]:
    return {
        'sbscv-lab': _package_version("sbscv-lab"),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'jsonschema': _package_version("jsonschema"),
        'python': platform.python_version(),
    }


def file_sha256(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def to_jsonable(value: Any) -> Any:
    """json.dump fallback for numpy scalars and arrays, enums and paths."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def build_manifest(record: 'RunRecord', files: Dict[str, Path]) -> Dict[str, Any]:
    scenario = record.scenario
    return {
        'scenario': scenario.name,
        'config_sha256': scenario.config_hash(),
        'seed': record.seed,
        'cap': record.cap,
        'workers': scenario.workers,
        'created_at': datetime.now(timezone.utc).isoformat(),
        'revision': get_current_revision(),
        'versions': library_versions(),
        'host': collect_host_facts(),
        'wall_time': {
            'total': record.wall_time,
            'per_sample': {f"{sample.t:.17g}": sample.wall_time for sample in record.samples},
        },
        'outputs': {name: {'path': path.name, 'sha256': file_sha256(path)} for name, path in files.items()},
        'all_satisfied': record.all_satisfied,
        'records': RecordFormatter(record).format_hierarchical(),
    }


def write_run_outputs(record: 'RunRecord', out_dir: Union[str, Path]) -> Dict[str, Path]:
    """bounds.csv and summary.csv first, then manifest.json with their digests."""
    out_dir = Path(out_dir)
    bounds_path, summary_path = RecordFormatter(record).write(out_dir)
    files = {'bounds': bounds_path, 'summary': summary_path}
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, 'w', encoding='utf-8') as f:
        json.dump(build_manifest(record, files), f, indent=2, default=to_jsonable)
    LogManager().get_logger("Manifest").info(f"Wrote {manifest_path}")
    return {**files, 'manifest': manifest_path}

from .record_formatter import BoundRow, RecordFormatter, validate_csv, BOUND_COLUMNS, SUMMARY_COLUMNS
from .manifest import build_manifest, write_run_outputs
from .experiment import ExperimentRunner, RunRecord, SampleRecord, run, BOUND_NAMES
from .verification import verify, VerificationResult, CHECKS, SUITES

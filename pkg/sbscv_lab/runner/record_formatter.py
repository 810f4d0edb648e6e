"""
Bound and summary table formatting for run records.

Both CSV files are byte-reproducible: floats are written with 17 significant
digits and nothing time-dependent enters them.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from sbscv_lab.bounds.chain import CHAIN_TOL, JENSEN_TOL
from sbscv_lab.bounds.report import BoundReport
from sbscv_lab.utils.logger import LogManager

if TYPE_CHECKING:
    from sbscv_lab.runner.experiment import RunRecord

BOUND_COLUMNS = ['t', 'name', 'lhs', 'rhs', 'margin', 'satisfied', 'n_grid', 'env_dims', 'pvm_strategy', 'seed']
SUMMARY_COLUMNS = ['t', 'sbs_distance', 'diagonal_lhs', 'diagonal_rhs', 'offdiag_lhs', 'offdiag_rhs_kupsch',
                   'offdiag_rhs_gaussian', 'norm_const', 'max_offdiag_fidelity', 'distinguishable_pairs', 'qsd_error']
FLOAT_FORMAT = '%.17g'
DIAGONAL_NAMES = ('diagonal_bound', 'diagonal_bound_multi')

# Rows whose check is an identity, and rows checked with a tolerance other than the scenario's
EQ_BOUNDS = frozenset({'diagonal_multi_routes', 'pure_distance_formula'})
ROW_TOLERANCES = {'objective_split': CHAIN_TOL, 'objective_chain': CHAIN_TOL, 'jensen_step': JENSEN_TOL,
                  'diagonal_multi_routes': 1e-8}


@dataclass(frozen=True)
class BoundRow:
    """One (t, bound) line of bounds.csv."""
    t: float
    name: str
    lhs: float
    rhs: float
    margin: float
    satisfied: bool
    n_grid: int
    env_dims: str
    pvm_strategy: str
    seed: int

    @classmethod
    def from_report(cls, t: float, report: BoundReport, n_grid: int, env_dims: str, pvm_strategy: str,
                    seed: int) -> 'BoundRow':
        return cls(t=float(t), name=report.name, lhs=report.lhs, rhs=report.rhs, margin=report.margin,
                   satisfied=report.satisfied, n_grid=n_grid, env_dims=env_dims, pvm_strategy=pvm_strategy,
                   seed=seed)


def format_env_dims(dims: Sequence[int]) -> str:
    return "x".join(str(d) for d in dims) if dims else "none"


class RecordFormatter:
    """Flat tables for the CSV files and a hierarchical view for the manifest."""

    def __init__(self, record: 'RunRecord'):
        self.record = record
        self.n_grid = record.scenario.grid.n
        self.env_dims = format_env_dims(record.scenario.ensemble.observed_dims)

    def bound_rows(self) -> List[BoundRow]:
        rows = []
        for sample in self.record.samples:
            for report in sample.reports:
                rows.append(BoundRow.from_report(sample.t, report, self.n_grid, self.env_dims,
                                                 sample.pvm_strategy, self.record.seed))
        return rows

    def format_bounds(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.bound_rows()], columns=BOUND_COLUMNS)

    def format_summary(self) -> pd.DataFrame:
        rows = []
        for sample in self.record.samples:
            fidelity = sample.fidelity_summary.get('max_offdiag_fidelity', [])
            finite = [f for f in fidelity if np.isfinite(f)]
            rows.append({
                't': sample.t,
                'sbs_distance': sample.distance,
                'diagonal_lhs': sample.value(DIAGONAL_NAMES, 'lhs'),
                'diagonal_rhs': sample.value(DIAGONAL_NAMES, 'rhs'),
                'offdiag_lhs': sample.value('offdiag_total_kupsch', 'lhs'),
                'offdiag_rhs_kupsch': sample.value('offdiag_total_kupsch', 'rhs'),
                'offdiag_rhs_gaussian': sample.value('offdiag_total_gaussian', 'rhs'),
                'norm_const': sample.norm_const,
                'max_offdiag_fidelity': max(finite) if finite else float('nan'),
                'distinguishable_pairs': int(sample.fidelity_summary.get('distinguishable_pairs', 0)),
                'qsd_error': sample.qsd_error,
            })
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def format_hierarchical(self) -> Dict[str, Any]:
        """Per-sample details, grouped by bound name, for the manifest."""
        result: Dict[str, Any] = {"scenario": self.record.scenario.name, "samples": []}
        for sample in self.record.samples:
            bounds: Dict[str, List[Dict[str, Any]]] = {}
            for report in sample.reports:
                bounds.setdefault(report.name, []).append({
                    "context": report.context,
                    "details": report.details,
                    "satisfied": report.satisfied,
                })
            result["samples"].append({
                "t": sample.t,
                "pvm_strategy": sample.pvm_strategy,
                "pvm_objective": sample.pvm_objective,
                "truncation": sample.truncation,
                "fidelity": sample.fidelity_summary,
                "bounds": bounds,
            })
        return result

    def write(self, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        bounds_path, summary_path = out_dir / "bounds.csv", out_dir / "summary.csv"
        self.format_bounds().to_csv(bounds_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.format_summary().to_csv(summary_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        LogManager().get_logger("RecordFormatter").info(f"Wrote {bounds_path} and {summary_path}")
        return bounds_path, summary_path


def row_satisfied(name: str, lhs: float, rhs: float, tol: float) -> bool:
    tol = ROW_TOLERANCES.get(name, tol)
    if name in EQ_BOUNDS:
        return bool(abs(lhs - rhs) <= tol)
    return bool(lhs <= rhs + tol)


def validate_csv(path: Union[str, Path], tol: float = 1e-8) -> List[Tuple[float, str]]:
    """Reload bounds.csv and recompute every satisfied flag; returns the (t, name) rows that disagree."""
    frame = pd.read_csv(path)
    missing = [c for c in BOUND_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path} lacks columns {missing}")
    mismatched = []
    for row in frame.itertuples(index=False):
        recomputed = row_satisfied(row.name, float(row.lhs), float(row.rhs), tol)
        if recomputed != bool(row.satisfied):
            mismatched.append((float(row.t), row.name))
    return mismatched

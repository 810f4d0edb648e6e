"""
Time sweep of one scenario: dynamics, SBS candidate, every bound and the
distinguishability diagnostics at each sampled t.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sbscv_lab.bounds import (BoundReport, diagonal_bound, diagonal_bound_multi, further_diagonal_bound,
                              gaussian_blocks, jensen_step, kupsch_blocks, kupsch_ibp_identity, multi_route_report,
                              objective_chain, objective_split, offdiag_total_bound)
from sbscv_lab.config.scenario import Scenario
from sbscv_lab.physics import dynamics
from sbscv_lab.physics.envmodel import check_truncation, used_s_range
from sbscv_lab.runner.manifest import write_run_outputs
from sbscv_lab.sbs.candidate import (Branch, SbsCandidate, branch_data, build_sbs_candidate, reduced_branches,
                                     sbs_distance)
from sbscv_lab.sbs.diagnostics import branch_fidelity_matrix, fidelity_summary, qsd_error
from sbscv_lab.sbs.partition import EnvPvm
from sbscv_lab.sbs.pvm import exhaustive_env_pvm, fixed_env_pvm, heuristic_env_pvm, pvm_objective
from sbscv_lab.utils.errors import ConfigurationError, SbscvError
from sbscv_lab.utils.lab_types import PvmStrategy
from sbscv_lab.utils.logger import LogManager

BOUND_NAMES = (
    'kupsch_offdiag_bound', 'kupsch_ibp_identity', 'offdiag_total_kupsch',
    'gaussian_offdiag_bound', 'offdiag_total_gaussian',
    'diagonal_bound', 'diagonal_bound_multi', 'diagonal_multi_routes', 'further_diagonal_bound',
    'jensen_step', 'objective_split', 'objective_chain',
)


@dataclass(frozen=True)
class SampleRecord:
    """Everything computed at one sampled time."""
    index: int
    t: float
    distance: float
    norm_const: float
    pvm_strategy: str
    pvm_objective: float
    reports: Tuple[BoundReport, ...]
    fidelity_summary: Dict[str, object] = field(default_factory=dict)
    qsd_error: float = float('nan')
    truncation: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0

    def report(self, names: Union[str, Sequence[str]]) -> Optional[BoundReport]:
        names = (names,) if isinstance(names, str) else tuple(names)
        return next((r for r in self.reports if r.name in names), None)

    def value(self, names: Union[str, Sequence[str]], attribute: str) -> float:
        report = self.report(names)
        return getattr(report, attribute) if report is not None else float('nan')

    @property
    def failures(self) -> List[BoundReport]:
        return [r for r in self.reports if not r.satisfied]


@dataclass(frozen=True)
class RunRecord:
    scenario: Scenario
    samples: Tuple[SampleRecord, ...]
    seed: int
    cap: int
    wall_time: float = 0.0

    @property
    def all_satisfied(self) -> bool:
        return all(not sample.failures for sample in self.samples)

    @property
    def failures(self) -> List[Tuple[float, BoundReport]]:
        return [(sample.t, report) for sample in self.samples for report in sample.failures]

    def distances(self) -> np.ndarray:
        return np.array([sample.distance for sample in self.samples])


class ExperimentRunner:

    def __init__(self, scenario: Scenario, cap: Optional[int] = None, seed: Optional[int] = None,
                 only: Optional[str] = None):
        self.logger = LogManager().get_logger("ExperimentRunner")
        if only is not None and only not in BOUND_NAMES:
            raise ConfigurationError(f"Unknown bound '{only}'; choose one of {', '.join(BOUND_NAMES)}")
        self.scenario = scenario
        self.cap = scenario.effective_cap(cap)
        self.seed = scenario.seed if seed is None else int(seed)
        self.only = only
        self.tol = scenario.tolerances.bound
        self.grid = scenario.grid.build()
        self.rho_S = scenario.state.build(self.grid)
        self.ensemble = scenario.ensemble.build()

    def run(self) -> RunRecord:
        start = time.perf_counter()
        self.logger.info(f"Running '{self.scenario.name}' at {len(self.scenario.times)} times "
                         f"with {self.scenario.workers} worker(s), cap {self.cap}")
        jobs = list(enumerate(self.scenario.times))
        if self.scenario.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.scenario.workers) as executor:
                futures = [executor.submit(self.run_sample, index, t) for index, t in jobs]
                samples = [future.result() for future in futures]
        else:
            samples = [self.run_sample(index, t) for index, t in jobs]

        samples.sort(key=lambda s: (s.t, s.index))
        record = RunRecord(self.scenario, tuple(samples), self.seed, self.cap, time.perf_counter() - start)
        for t, report in record.failures:
            self.logger.error(f"'{self.scenario.name}' t={t:g}: {report.name} violated "
                              f"(lhs {report.lhs:.6e} > rhs {report.rhs:.6e}, context {report.context})")
        self.logger.info(f"Finished '{self.scenario.name}' in {record.wall_time:.2f}s, "
                         f"{len(record.failures)} violated bound(s)")
        return record

    def run_sample(self, index: int, t: float) -> SampleRecord:
        try:
            return self._sample(index, t)
        except SbscvError as e:
            self.logger.error(f"Scenario '{self.scenario.name}' failed at t={t:g}: {e}")
            raise type(e)(f"Scenario '{self.scenario.name}', t={t:g}: {e}") from e

    def _check_truncation(self, t: float) -> Dict[str, float]:
        deviations = {}
        if not self.scenario.truncation_check:
            return deviations
        for env in self.ensemble.traced:
            if env.rebuild is not None:
                deviations[env.label] = check_truncation(env, used_s_range(self.grid.length, t, env.g))
        return deviations

    def choose_pvm(self, branches: Sequence[Branch]) -> Tuple[EnvPvm, str, float]:
        spec = self.scenario.pvm
        if spec.strategy == PvmStrategy.fixed:
            pvm = fixed_env_pvm(branches, self.ensemble.observed_dims, spec.fixed_cells)
            return pvm, PvmStrategy.fixed.value, pvm_objective(branches, pvm)

        heuristic = heuristic_env_pvm(branches)
        best = (heuristic, PvmStrategy.heuristic.value, pvm_objective(branches, heuristic))
        if spec.strategy == PvmStrategy.exhaustive:
            exhaustive = exhaustive_env_pvm(branches)
            value = pvm_objective(branches, exhaustive)
            if value > best[2]:
                best = (exhaustive, PvmStrategy.exhaustive.value, value)
        return best

    def _offdiag_reports(self, t: float, gamma, rho_t, partition) -> Tuple[List[BoundReport], List[BoundReport]]:
        """Block reports plus one total per off-diagonal route."""
        blocks = kupsch_blocks(gamma, self.rho_S, partition, self.tol)
        identities = [kupsch_ibp_identity(gamma, self.rho_S, partition.cells[b.context['i']],
                                          partition.cells[b.context['j']], self.tol)
                      .with_context(i=b.context['i'], j=b.context['j'])
                      for b in blocks if b.details.get('case') != 'vanishing']
        totals = [offdiag_total_bound(rho_t, partition, blocks, "offdiag_total_kupsch", self.tol)]
        reports = blocks + identities

        closed = self.ensemble.closed_form
        if self.scenario.ensemble.gaussian_only and closed.tau(t) > 0:
            g_blocks = gaussian_blocks(self.rho_S, t, closed.alpha, closed.n_exp, partition,
                                       self.scenario.reference_t, self.tol)
            totals.append(offdiag_total_bound(rho_t, partition, g_blocks, "offdiag_total_gaussian", self.tol))
            reports += g_blocks
        return reports, totals

    def _diagnostics(self, candidate: SbsCandidate) -> Tuple[Dict[str, object], float]:
        summary = fidelity_summary(branch_fidelity_matrix(candidate))
        if not self.ensemble.observed:
            return summary, float('nan')
        probabilities, states = reduced_branches(candidate)
        kept = [pos for pos, state in enumerate(states) if state is not None]
        weights = probabilities[kept] / probabilities[kept].sum()
        pvm = candidate.env_pvm
        measurement = [pvm.joint_projector(pos) for pos in kept]
        measurement.append(np.eye(measurement[0].shape[0], dtype=np.complex128) - sum(measurement))
        return summary, qsd_error(weights, [states[pos] for pos in kept], measurement)

    def _sample(self, index: int, t: float) -> SampleRecord:
        start = time.perf_counter()
        truncation = self._check_truncation(t)

        gamma = dynamics.ensemble_gamma(self.ensemble, t, self.grid)
        rho_t = dynamics.lemma_rhs(self.rho_S, self.ensemble, t, self.cap, gamma)
        partition = self.scenario.partition.build(self.grid, t)
        observed = self.ensemble.observed
        branches = branch_data(self.rho_S, partition, observed, t)

        pvm, strategy, objective = self.choose_pvm(branches)
        candidate = build_sbs_candidate(rho_t, partition, pvm)
        distance = sbs_distance(rho_t, candidate)

        reports, totals = self._offdiag_reports(t, gamma, rho_t, partition)
        if len(observed) > 1:
            diagonal = diagonal_bound_multi(rho_t, partition, pvm, branches, observed, self.tol, candidate)
        else:
            diagonal = diagonal_bound(rho_t, partition, pvm, branches, self.tol, candidate)
        reports += totals
        reports.append(diagonal)
        routes = multi_route_report(diagonal)
        if routes is not None:
            reports.append(routes)
        reports.append(further_diagonal_bound(branches, observed, pvm, diagonal.lhs, self.tol))
        reports.append(jensen_step(diagonal))
        reports.append(objective_split(distance, diagonal, totals[0]))
        reports.append(objective_chain(diagonal, min(totals, key=lambda r: r.rhs)))

        summary, qsd = self._diagnostics(candidate)
        reports = [r.with_context(t=float(t)) for r in reports]
        if self.only is not None:
            reports = [r for r in reports if r.name == self.only]

        elapsed = time.perf_counter() - start
        self.logger.info(f"'{self.scenario.name}' t={t:g}: distance {distance:.6e}, "
                         f"diagonal {diagonal.lhs:.3e} <= {diagonal.rhs:.3e}, {elapsed:.2f}s")
        return SampleRecord(
            index=index,
            t=float(t),
            distance=distance,
            norm_const=candidate.norm_const,
            pvm_strategy=strategy,
            pvm_objective=objective,
            reports=tuple(reports),
            fidelity_summary=summary,
            qsd_error=qsd,
            truncation=truncation,
            wall_time=elapsed,
        )


def run(scenario: Scenario, out_dir: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
        cap: Optional[int] = None, only: Optional[str] = None) -> RunRecord:
    """Run a scenario and, when out_dir is given, write bounds.csv, summary.csv and manifest.json."""
    record = ExperimentRunner(scenario, cap=cap, seed=seed, only=only).run()
    if out_dir is not None:
        write_run_outputs(record, out_dir)
    return record

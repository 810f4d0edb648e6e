"""
Named numerical checks behind ``sbscv verify``.

Every check returns BoundReports; the result groups them by report name into
pass counts. A check that raises is recorded as a failure under its own name.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from sbscv_lab.bounds import (BoundReport, gaussian_blocks, gaussian_offdiag_bound, kupsch_blocks,
                              kupsch_derivative_defect, pure_distance_formula_check, stolz_product_bound,
                              telescopic_bound, trace_distance_rescale_check)
from sbscv_lab.config.scenario import PvmSpec, Scenario, load_packaged_scenario, scenario_from_dict
from sbscv_lab.numerics.numkit import random_density_matrix, random_unit_vector, trace_norm
from sbscv_lab.physics import dynamics, kernels
from sbscv_lab.physics.cvgrid import CvDensity, Grid, Interval
from sbscv_lab.physics.envmodel import make_oscillator_env
from sbscv_lab.physics.kernels import apply_decoherence
from sbscv_lab.runner.experiment import ExperimentRunner
from sbscv_lab.runner.record_formatter import DIAGONAL_NAMES
from sbscv_lab.sbs.diagnostics import helstrom_error, helstrom_measurement, qsd_error
from sbscv_lab.utils.lab_types import PvmStrategy, Relation
from sbscv_lab.utils.logger import LogManager

SUITES = ("fast", "all")
ORACLE_ANGLES = 2001
OFFDIAG_FINAL_MAX = 1e-6
DIAGONAL_FINAL_MAX = 0.15

# Observed-only counterpart of the canonical scenario, small enough for the fast suite
SMALL_OBSERVED = {
    "schema": 1,
    "name": "small_observed",
    "grid": {"x_min": -6.0, "x_max": 6.0, "n": 24},
    "state": {"kind": "cat", "centers": [-1.5, 1.5], "width": 0.4},
    "ensemble": {"observed": [{"kind": "position", "dim": 8, "coupling": 1.0}]},
    "times": [0.5, 1.0, 2.0, 4.0],
    "partition": {"kind": "cuts", "cuts": [0.0]},
}

CheckFn = Callable[[np.random.Generator], List[BoundReport]]


@dataclass(frozen=True)
class Check:
    name: str
    suite: str
    run: CheckFn


@dataclass
class VerificationResult:
    suite: str
    seed: int
    counts: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def record(self, report: BoundReport):
        passed, total = self.counts.get(report.name, (0, 0))
        self.counts[report.name] = (passed + int(report.satisfied), total + 1)
        if not report.satisfied:
            self.failures.append(f"{report.name} lhs={report.lhs:.6e} rhs={report.rhs:.6e} {report.context}")

    def record_error(self, check: Check, error: Exception):
        passed, total = self.counts.get(check.name, (0, 0))
        self.counts[check.name] = (passed, total + 1)
        self.failures.append(f"{check.name} raised {type(error).__name__}: {error}")

    def lines(self) -> List[str]:
        width = max((len(name) for name in self.counts), default=0)
        lines = [f"{name.ljust(width)}  {passed}/{total}" for name, (passed, total) in self.counts.items()]
        lines.append(f"suite '{self.suite}' seed {self.seed}: {'PASS' if self.ok else 'FAIL'} "
                     f"({len(self.failures)} failure(s))")
        return lines


def _run_reports(scenario: Scenario) -> List[BoundReport]:
    record = ExperimentRunner(scenario).run()
    return [report for sample in record.samples for report in sample.reports]


def _decreasing(name: str, times: Sequence[float], values: Sequence[float], tol: float) -> List[BoundReport]:
    return [BoundReport(name, later, earlier, tol, context={'t': float(t_later), 't_previous': float(t_earlier)})
            for t_earlier, t_later, earlier, later in zip(times[:-1], times[1:], values[:-1], values[1:])]


def check_kernel_equivalence(rng: np.random.Generator) -> List[BoundReport]:
    """Explicit simulation with partial trace against the decoherence-kernel route."""
    scenario = load_packaged_scenario("small_cross_check.json")
    grid = scenario.grid.build()
    rho_S, ensemble = scenario.state.build(grid), scenario.ensemble.build()
    reports = []
    for t in scenario.times:
        full = dynamics.evolve_full(rho_S, ensemble, t).mat.mat
        kernel_route = dynamics.lemma_rhs(rho_S, ensemble, t).mat.mat
        reports.append(BoundReport("kernel_equivalence", float(np.max(np.abs(full - kernel_route))), 0.0, 1e-10,
                                   context={'t': t}))
    return reports


def check_commutation(rng: np.random.Generator) -> List[BoundReport]:
    reports = []
    grid = Grid(-4.0, 4.0, 16)
    for instance in range(5):
        rho_S = CvDensity.from_matrix(grid, random_density_matrix(grid.n, rng))
        observed = make_oscillator_env(8, "position", coupling=rng.uniform(0.3, 1.0))
        traced = make_oscillator_env(8, "momentum", thermal_occupation=rng.uniform(0.0, 0.5),
                                     coupling=rng.uniform(0.3, 1.0))
        t = rng.uniform(0.1, 2.0)
        deviation = dynamics.check_commutation(rho_S, observed, traced, t)
        reports.append(BoundReport("commutation", deviation, 0.0, 1e-10, context={'instance': instance, 't': t}))
    return reports


def check_gaussian_convolution(rng: np.random.Generator) -> List[BoundReport]:
    reports = []
    for _ in range(25):
        t, x, y = rng.uniform(0.05, 5.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)
        for kind, quadrature in (("convolution", kernels.convolution_quadrature),
                                 ("overlap", kernels.overlap_quadrature)):
            value, closed = quadrature(t, 1.0, 1.0, x, y)
            reports.append(BoundReport("gaussian_convolution", abs(value - closed), 0.0, 1e-8,
                                       context={'form': kind, 't': t, 'x': x, 'y': y}))
    return reports


def _kupsch_reports(scenario: Scenario, grid: Grid) -> List[BoundReport]:
    rho_S = scenario.state.build(grid)
    closed = scenario.ensemble.gamma
    reports = []
    for t in scenario.times:
        gamma = kernels.gaussian_gamma(t, closed.alpha, closed.n_exp, grid)
        reports += [r.with_context(n_grid=grid.n) for r in
                    kupsch_blocks(gamma, rho_S, scenario.partition.build(grid, t))]
    return reports


def check_kupsch(rng: np.random.Generator) -> List[BoundReport]:
    """Block bounds over the canonical sweep, plus the analytic d_y Gamma against finite differences."""
    scenario = load_packaged_scenario("canonical_cat_gaussian.json")
    grid = scenario.grid.build()
    closed = scenario.ensemble.gamma
    reports = _kupsch_reports(scenario, grid)
    for t in (0.25, 0.5):
        gamma = kernels.gaussian_gamma(t, closed.alpha, closed.n_exp, grid)
        reports.append(BoundReport("kupsch_offdiag_bound", kupsch_derivative_defect(gamma), 0.0, 1e-6,
                                   context={'t': t, 'check': 'derivative'}))

    t_last = max(scenario.times)
    gamma = kernels.gaussian_gamma(t_last, closed.alpha, closed.n_exp, grid)
    decohered = apply_decoherence(scenario.state.build(grid), gamma).matrix.mat
    partition = scenario.partition.build(grid, t_last)
    pinched = sum(partition.projector(i) @ decohered @ partition.projector(i) for i in range(len(partition)))
    reports.append(BoundReport("offdiag_decay", 0.5 * trace_norm(decohered - pinched), OFFDIAG_FINAL_MAX, 0.0,
                               context={'t': t_last}))
    return reports


def check_kupsch_refined(rng: np.random.Generator) -> List[BoundReport]:
    scenario = load_packaged_scenario("canonical_cat_gaussian.json")
    return _kupsch_reports(scenario, scenario.grid.build().refined())


def check_gaussian_offdiag(rng: np.random.Generator) -> List[BoundReport]:
    scenario = load_packaged_scenario("canonical_cat_gaussian.json")
    grid = scenario.grid.build()
    rho_S = scenario.state.build(grid)
    closed = scenario.ensemble.gamma
    times = (0.25, 1.0, 4.0)
    reports, totals = [], []
    for t in times:
        blocks = gaussian_blocks(rho_S, t, closed.alpha, closed.n_exp, scenario.partition.build(grid, t),
                                 scenario.reference_t)
        reports += blocks
        totals.append(sum(b.rhs for b in blocks))
    reports += _decreasing("gaussian_offdiag_decay", times, totals, 0.0)

    separated = gaussian_offdiag_bound(rho_S, 50.0, 1.0, 1.0, Interval(-5.0, -1.0), Interval(1.0, 5.0))
    reports.append(separated)
    reports.append(BoundReport("gaussian_offdiag_separated",
                               max(separated.rhs, separated.details['double_quadrature']), 1e-10, 0.0,
                               context={'t': 50.0}))
    return reports


def _mixture_kernel(rng: np.random.Generator, terms: int = 3) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    weights = rng.uniform(0.2, 1.0, terms)
    row_centers, col_centers = rng.uniform(-2.0, 2.0, terms), rng.uniform(-2.0, 2.0, terms)
    widths = rng.uniform(0.5, 2.0, terms)

    def kernel(u, v):
        return sum(w * np.exp(-s * ((u - a) ** 2 + (v - b) ** 2))
                   for w, a, b, s in zip(weights, row_centers, col_centers, widths))
    return kernel


def check_stolz(rng: np.random.Generator) -> List[BoundReport]:
    x_grid, z_grid = Grid(-5.0, 5.0, 40), Grid(-6.0, 6.0, 60)
    return [stolz_product_bound(_mixture_kernel(rng), _mixture_kernel(rng), x_grid, z_grid).with_context(case=k)
            for k in range(3)]


def check_small_observed(rng: np.random.Generator) -> List[BoundReport]:
    return _run_reports(scenario_from_dict(SMALL_OBSERVED))


def check_multi_env(rng: np.random.Generator) -> List[BoundReport]:
    return _run_reports(load_packaged_scenario("multi_env_identical.json"))


def check_multi_env_exhaustive(rng: np.random.Generator) -> List[BoundReport]:
    scenario = load_packaged_scenario("multi_env_identical.json")
    return _run_reports(replace(scenario, pvm=PvmSpec(PvmStrategy.exhaustive)))


def check_canonical_gaussian(rng: np.random.Generator) -> List[BoundReport]:
    """Full chain on the Gaussian sweep, including a non-increasing SBS distance."""
    scenario = load_packaged_scenario("canonical_cat_gaussian.json")
    record = ExperimentRunner(scenario).run()
    reports = [report for sample in record.samples for report in sample.reports]
    times = [sample.t for sample in record.samples]
    return reports + _decreasing("monotone_distance", times, record.distances().tolist(), 1e-6)


def check_canonical_observed(rng: np.random.Generator) -> List[BoundReport]:
    """Full chain with one observed oscillator; the diagonal distance must end small and below its start."""
    record = ExperimentRunner(load_packaged_scenario("canonical_cat_observed.json")).run()
    reports = [report for sample in record.samples for report in sample.reports]
    first, last = record.samples[0], record.samples[-1]
    final = last.value(DIAGONAL_NAMES, 'lhs')
    reports.append(BoundReport("diagonal_final", final, DIAGONAL_FINAL_MAX, 0.0, context={'t': last.t}))
    reports.append(BoundReport("diagonal_decrease", final, first.value(DIAGONAL_NAMES, 'lhs'), 0.0,
                               context={'t': last.t, 't_first': first.t}))
    return reports


def check_cross_scenario(rng: np.random.Generator) -> List[BoundReport]:
    return _run_reports(load_packaged_scenario("small_cross_check.json"))


def check_telescopic(rng: np.random.Generator) -> List[BoundReport]:
    dims = (2, 3, 2)
    return [telescopic_bound([random_density_matrix(d, rng) for d in dims],
                             [random_density_matrix(d, rng) for d in dims], tol=1e-10).with_context(case=k)
            for k in range(100)]


def check_trace_rescale(rng: np.random.Generator) -> List[BoundReport]:
    return [trace_distance_rescale_check(random_density_matrix(6, rng), random_density_matrix(6, rng),
                                         rng.uniform(0.0, 1.0), tol=1e-10).with_context(case=k)
            for k in range(500)]


def check_pure_distance(rng: np.random.Generator) -> List[BoundReport]:
    return [pure_distance_formula_check(random_unit_vector(12, rng), random_unit_vector(12, rng)).with_context(case=k)
            for k in range(100)]


def _rotation_oracle(p0: float, psi0: np.ndarray, psi1: np.ndarray) -> float:
    """Minimum error over projective measurements in the real plane spanned by two pure states."""
    overlap = abs(np.vdot(psi0, psi1))
    c, s = overlap, np.sqrt(max(0.0, 1.0 - overlap ** 2))
    p1 = 1.0 - p0

    def error(phi: float) -> float:
        return p0 * np.sin(phi) ** 2 + p1 * (c * np.cos(phi) + s * np.sin(phi)) ** 2

    angles = np.linspace(-np.pi / 2, np.pi / 2, ORACLE_ANGLES)
    best = angles[int(np.argmin([error(a) for a in angles]))]
    step = angles[1] - angles[0]
    result = scipy.optimize.minimize_scalar(error, bounds=(best - step, best + step), method="bounded",
                                            options={'xatol': 1e-12})
    return float(min(result.fun, error(best)))


def check_qsd(rng: np.random.Generator) -> List[BoundReport]:
    reports = []
    dim = 6
    for k in range(5):
        basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
        halves = (basis[:, :3], basis[:, 3:])
        states = []
        for half in halves:
            inner = random_density_matrix(3, rng)
            states.append(half @ inner @ half.conj().T)
        p0 = rng.uniform(0.1, 0.9)
        measurement = [half @ half.conj().T for half in halves]
        reports.append(BoundReport("qsd_orthogonal", qsd_error([p0, 1.0 - p0], states, measurement), 0.0, 1e-10,
                                   context={'case': k}))

    for k in range(20):
        psi0, psi1 = random_unit_vector(4, rng), random_unit_vector(4, rng)
        rho0, rho1 = np.outer(psi0, psi0.conj()), np.outer(psi1, psi1.conj())
        p0 = rng.uniform(0.1, 0.9)
        optimal = helstrom_error(p0, rho0, 1.0 - p0, rho1)
        reports.append(BoundReport("helstrom_oracle", optimal, _rotation_oracle(p0, psi0, psi1), 1e-6,
                                   Relation.eq, context={'case': k, 'p0': p0}))
        achieved = qsd_error([p0, 1.0 - p0], [rho0, rho1], helstrom_measurement(p0, rho0, 1.0 - p0, rho1))
        reports.append(BoundReport("helstrom_measurement", achieved, optimal, 1e-10, Relation.eq,
                                   context={'case': k}))
    return reports


CHECKS: Tuple[Check, ...] = (
    Check("kernel_equivalence", "fast", check_kernel_equivalence),
    Check("commutation", "fast", check_commutation),
    Check("gaussian_convolution", "fast", check_gaussian_convolution),
    Check("kupsch_offdiag_bound", "fast", check_kupsch),
    Check("gaussian_offdiag_bound", "fast", check_gaussian_offdiag),
    Check("stolz_product_bound", "fast", check_stolz),
    Check("canonical_gaussian", "fast", check_canonical_gaussian),
    Check("small_observed", "fast", check_small_observed),
    Check("multi_env", "fast", check_multi_env),
    Check("telescopic_bound", "fast", check_telescopic),
    Check("trace_distance_rescale", "fast", check_trace_rescale),
    Check("pure_distance_formula", "fast", check_pure_distance),
    Check("qsd", "fast", check_qsd),
    Check("kupsch_refined", "all", check_kupsch_refined),
    Check("multi_env_exhaustive", "all", check_multi_env_exhaustive),
    Check("canonical_observed", "all", check_canonical_observed),
    Check("small_cross_check", "all", check_cross_scenario),
)


def checks_for(suite: str) -> List[Check]:
    if suite not in SUITES:
        raise ValueError(f"Unknown suite '{suite}'; choose one of {', '.join(SUITES)}")
    return [check for check in CHECKS if suite == "all" or check.suite == "fast"]


def verify(suite: str = "fast", seed: int = 0, names: Optional[Sequence[str]] = None) -> VerificationResult:
    """
    Run the checks of a suite; ``names`` restricts them to the given check names.

    Each check draws from the child seed of its position in CHECKS, so a check
    sees the same random instances alone as inside any suite.
    """
    logger = LogManager().get_logger("Verification")
    suite_checks = checks_for(suite)
    if names is not None:
        unknown = sorted(set(names) - {c.name for c in suite_checks})
        if unknown:
            raise ValueError(f"Unknown check(s) {', '.join(unknown)} for suite '{suite}'")
    children = dict(zip((c.name for c in CHECKS), np.random.SeedSequence(seed).spawn(len(CHECKS))))
    checks = [c for c in suite_checks if names is None or c.name in names]
    result = VerificationResult(suite, seed)
    for check in checks:
        child = children[check.name]
        logger.info(f"Running check {check.name}")
        try:
            reports = check.run(np.random.default_rng(child))
        except Exception as e:
            logger.error(f"Check {check.name} raised {type(e).__name__}: {e}")
            result.record_error(check, e)
            continue
        for report in reports:
            result.record(report)
    for failure in result.failures:
        logger.error(f"Verification failure: {failure}")
    return result

import numpy as np
import pytest
from hypothesis import given, seed, settings, strategies as st

from sbscv_lab.bounds.offdiag import (gaussian_blocks, gaussian_offdiag_bound, kupsch_blocks, kupsch_ibp_identity,
                                      kupsch_offdiag_bound, mixture_decomposition, offdiag_total_bound,
                                      stolz_product_bound)
from sbscv_lab.numerics.numkit import random_density_matrix
from sbscv_lab.physics import dynamics
from sbscv_lab.physics.cvgrid import CvDensity, Grid, Interval
from sbscv_lab.physics.envmodel import EnvEnsemble, GaussianDecoherence
from sbscv_lab.physics.kernels import GammaKernel, gaussian_gamma
from sbscv_lab.sbs.partition import Partition
from sbscv_lab.utils.errors import InvalidInputError, PreconditionError

LEFT, RIGHT = Interval(-8.0, 0.0), Interval(0.0, 8.0)


@pytest.mark.parametrize("t", [0.25, 1.0, 8.0])
def test_kupsch_bound_on_canonical_cat(canonical_cat, t):
    gamma = gaussian_gamma(t, 1.0, 1.0, canonical_cat.grid)
    reports = kupsch_blocks(gamma, canonical_cat, Partition.from_cuts(canonical_cat.grid, [0.0]))
    assert [(r.context['i'], r.context['j']) for r in reports] == [(0, 1), (1, 0)]
    for report in reports:
        assert report.satisfied
        assert report.margin >= 0.0
        assert report.details['case'] == 'general'
        assert report.details['analytic_derivative']


def test_kupsch_bound_with_finite_difference_derivative(canonical_cat):
    exact = gaussian_gamma(1.0, 1.0, 1.0, canonical_cat.grid)
    gamma = GammaKernel(canonical_cat.grid, 1.0, exact.values)
    report = kupsch_offdiag_bound(gamma, canonical_cat, LEFT, RIGHT)
    assert report.satisfied
    assert report.details['dy_error'] > 0.0
    assert not report.details['analytic_derivative']


def test_vanishing_block(small_grid):
    density = np.full(small_grid.n, 1.0 / (small_grid.n * small_grid.dx))
    rho = CvDensity(small_grid, np.diag(density))
    gamma = gaussian_gamma(1.0, 1.0, 1.0, small_grid)
    report = kupsch_offdiag_bound(gamma, rho, Interval(-6.0, 0.0), Interval(0.0, 6.0))
    assert report.details['case'] == 'vanishing'
    assert report.lhs == 0.0 and report.rhs == 0.0
    assert report.satisfied


def test_overlapping_cells(canonical_cat):
    gamma = gaussian_gamma(1.0, 1.0, 1.0, canonical_cat.grid)
    with pytest.raises(PreconditionError):
        kupsch_offdiag_bound(gamma, canonical_cat, Interval(-8.0, 1.0), RIGHT)
    with pytest.raises(PreconditionError):
        gaussian_offdiag_bound(canonical_cat, 1.0, 1.0, 1.0, Interval(-8.0, 1.0), RIGHT)


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_summation_by_parts_identity(canonical_cat, t):
    gamma = gaussian_gamma(t, 1.0, 1.0, canonical_cat.grid)
    for cells in ((LEFT, RIGHT), (RIGHT, LEFT)):
        report = kupsch_ibp_identity(gamma, canonical_cat, *cells)
        assert report.lhs <= 1e-12
        assert report.details['holder_max_excess'] <= 1e-10


@pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
def test_gaussian_bound_on_canonical_cat(canonical_cat, t):
    reports = gaussian_blocks(canonical_cat, t, 1.0, 1.0, Partition.from_cuts(canonical_cat.grid, [0.0]),
                              reference_t=0.25)
    for report in reports:
        assert report.satisfied
        assert report.details['tau'] == pytest.approx(t)
        assert report.details['decay_ratio'] <= 1.0 + 1e-12


def test_gaussian_bound_for_separated_cells(canonical_cat):
    report = gaussian_offdiag_bound(canonical_cat, 50.0, 1.0, 1.0, Interval(-5.0, -1.0), Interval(1.0, 5.0))
    assert report.rhs <= 1e-10
    assert report.satisfied


def test_gaussian_bound_needs_positive_time(canonical_cat):
    with pytest.raises(PreconditionError):
        gaussian_offdiag_bound(canonical_cat, 0.0, 1.0, 1.0, LEFT, RIGHT)


def test_mixture_decomposition(canonical_cat, small_grid, rng):
    weights, psi = mixture_decomposition(canonical_cat)
    assert weights.size == 1
    assert weights[0] == pytest.approx(1.0)
    assert np.sum(np.abs(psi[:, 0]) ** 2) * canonical_cat.grid.dx == pytest.approx(1.0)

    mixed = CvDensity.from_matrix(small_grid, random_density_matrix(small_grid.n, rng))
    weights, psi = mixture_decomposition(mixed)
    rebuilt = (psi * weights) @ psi.conj().T * small_grid.dx
    assert np.allclose(rebuilt, mixed.matrix.mat)


def _random_kernel(rng):
    centers = rng.uniform(-2.0, 2.0, size=(3, 2))
    widths = rng.uniform(0.5, 1.5, size=3)
    amplitudes = rng.normal(size=3) + 1j * rng.normal(size=3)

    def kernel(u, v):
        return sum(a * np.exp(-((u - c[0]) ** 2 + (v - c[1]) ** 2) / (2 * w ** 2))
                   for a, c, w in zip(amplitudes, centers, widths))
    return kernel


@seed(1)
@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_slice_norm_product_bound(state):
    rng = np.random.default_rng(state)
    report = stolz_product_bound(_random_kernel(rng), _random_kernel(rng), Grid(-5.0, 5.0, 40), Grid(-6.0, 6.0, 60))
    assert report.satisfied


def test_slice_norm_bound_accepts_arrays(rng):
    x_grid, z_grid = Grid(-3.0, 3.0, 10), Grid(-4.0, 4.0, 12)
    A = rng.normal(size=(10, 12))
    B = rng.normal(size=(12, 10))
    assert stolz_product_bound(A, B, x_grid, z_grid).satisfied
    with pytest.raises(InvalidInputError):
        stolz_product_bound(A, A, x_grid, z_grid)


def test_total_offdiag_bound_without_observed_envs(canonical_cat):
    partition = Partition.from_cuts(canonical_cat.grid, [0.0])
    ensemble = EnvEnsemble(closed_form=GaussianDecoherence(1.0, 1.0))
    for t in (0.25, 2.0):
        gamma = dynamics.ensemble_gamma(ensemble, t, canonical_cat.grid)
        rho_t = dynamics.lemma_rhs(canonical_cat, ensemble, t, gamma=gamma)
        blocks = kupsch_blocks(gamma, canonical_cat, partition)
        total = offdiag_total_bound(rho_t, partition, blocks, "offdiag_total_kupsch")
        assert total.satisfied
        # both blocks carry the same norm, and together they form the whole off-diagonal part
        assert total.lhs == pytest.approx(0.5 * total.details['block_lhs_sum'], rel=1e-9, abs=1e-15)

import dataclasses

import numpy as np
import pytest

from sbscv_lab.numerics.numkit import DensityMatrix, fidelity, random_density_matrix
from sbscv_lab.physics.cvgrid import cat_state
from sbscv_lab.physics.envmodel import make_oscillator_env, make_qubit_env
from sbscv_lab.sbs.candidate import branch_data
from sbscv_lab.sbs.diagnostics import helstrom_error
from sbscv_lab.sbs.partition import Partition
from sbscv_lab.sbs.pvm import exhaustive_env_pvm, fixed_env_pvm, heuristic_env_pvm, pvm_objective
from sbscv_lab.utils.errors import InvalidInputError, PreconditionError, RankStarvationError


@pytest.fixture
def branches(small_cat, position_env):
    return branch_data(small_cat, Partition.from_cuts(small_cat.grid, [0.0]), [position_env], 2.0)


def test_heuristic_pvm_is_complete(branches):
    pvm = heuristic_env_pvm(branches)
    assert set(pvm.cells) == {0, 1}
    assert pvm.env_dims == (6,)
    assert np.allclose(pvm.remainders[0], 0.0, atol=1e-10)
    assert np.allclose(sum(pvm.projectors[0]), np.eye(6), atol=1e-10)
    for P in pvm.projectors[0]:
        assert np.trace(P).real >= 1.0 - 1e-10


def test_heuristic_pvm_keeps_remainder_on_request(branches):
    pvm = heuristic_env_pvm(branches, absorb_remainder=False)
    total = sum(pvm.projectors[0]) + pvm.remainders[0]
    assert np.allclose(total, np.eye(6), atol=1e-10)


def test_objective_is_a_probability(branches):
    for pvm in (heuristic_env_pvm(branches), exhaustive_env_pvm(branches)):
        value = pvm_objective(branches, pvm)
        assert 0.0 <= value <= 1.0 + 1e-12


def test_heuristic_beats_guessing(branches):
    assert pvm_objective(branches, heuristic_env_pvm(branches)) > 0.5


def test_exhaustive_search_is_bounded(small_cat):
    big = make_oscillator_env(8, "position")
    branches = branch_data(small_cat, Partition.from_cuts(small_cat.grid, [0.0]), [big], 2.0)
    with pytest.raises(PreconditionError):
        exhaustive_env_pvm(branches)


def test_rank_starvation(small_cat):
    partition = Partition.from_cuts(small_cat.grid, [-2.0, 2.0])
    branches = branch_data(small_cat, partition, [make_qubit_env()], 1.0)
    assert len(branches) == 3
    with pytest.raises(RankStarvationError):
        heuristic_env_pvm(branches)


def test_fixed_fock_split(branches):
    pvm = fixed_env_pvm(branches, (6,), [[0, 1, 2], [3, 4, 5]])
    assert pvm.cells == (0, 1)
    assert np.allclose(pvm.projectors[0][0], np.diag([1, 1, 1, 0, 0, 0]))
    with pytest.raises(InvalidInputError):
        fixed_env_pvm(branches, (6,), [[0, 1, 2], [3, 4, 9]])
    with pytest.raises(PreconditionError):
        fixed_env_pvm(branches, (6,), [[0, 1, 2, 3, 4, 5]])
    with pytest.raises(PreconditionError):
        fixed_env_pvm(branches, (6,))


def test_no_observed_environment(small_cat):
    branches = branch_data(small_cat, Partition.from_cuts(small_cat.grid, [0.0]), [], 1.0)
    for pvm in (heuristic_env_pvm(branches), exhaustive_env_pvm(branches), fixed_env_pvm(branches, ())):
        assert pvm.env_dims == ()
        assert pvm_objective(branches, pvm) == pytest.approx(1.0)


def _captured(branch, env_state, weight=None):
    weight = branch.weight if weight is None else weight
    return dataclasses.replace(branch, weight=weight, lambda_state=env_state, per_env=(env_state,))


def test_identical_branches_are_assigned_by_weight(small_grid, position_env, tmp_path):
    rho = cat_state(small_grid, [-1.0, 1.0], [0.6, 1.0], 0.35)
    branches = branch_data(rho, Partition.from_cuts(small_grid, [0.0]), [position_env], 0.0)
    assert branches[1].weight > branches[0].weight
    assert fidelity(branches[0].per_env[0], branches[1].per_env[0]) == pytest.approx(1.0)

    pvm = heuristic_env_pvm(branches)
    assert pvm.cells == (1, 0)
    heavy, light = pvm.projectors[0]
    assert np.real(heavy[0, 0]) == pytest.approx(1.0)
    assert np.real(light[0, 0]) == pytest.approx(0.0, abs=1e-12)
    assert pvm_objective(branches, pvm) == pytest.approx(branches[1].weight)

    log = (tmp_path / "logs" / "sbscv.log").read_text()
    assert "overlap on environment 0" in log
    assert "assigning projectors by weight order" in log


def test_separated_branches_are_captured_per_cell(canonical_cat):
    env = make_oscillator_env(12, "position")
    branches = branch_data(canonical_cat, Partition.from_cuts(canonical_cat.grid, [0.0]), [env], 1.0)
    assert fidelity(branches[0].per_env[0], branches[1].per_env[0]) < 0.05

    pvm = heuristic_env_pvm(branches)
    for br in branches:
        P = pvm.projectors[0][pvm.position(br.cell)]
        assert np.real(np.trace(P @ br.per_env[0].mat)) >= 0.9


def test_heuristic_against_exhaustive_on_nearly_orthogonal_branches(small_cat):
    env = make_oscillator_env(4, "position")
    raw = branch_data(small_cat, Partition.from_cuts(small_cat.grid, [0.0]), [env], 1.0)
    a = np.array([1.0, 0.0, 0.0, 0.0])
    b = np.array([0.1, np.sqrt(1.0 - 0.01), 0.0, 0.0])
    total = raw[0].weight + raw[1].weight
    branches = [_captured(raw[0], DensityMatrix.from_pure(a), raw[0].weight / total),
                _captured(raw[1], DensityMatrix.from_pure(b), raw[1].weight / total)]

    heuristic = heuristic_env_pvm(branches)
    for br in branches:
        P = heuristic.projectors[0][heuristic.position(br.cell)]
        assert np.real(np.trace(P @ br.per_env[0].mat)) >= 0.9

    best = pvm_objective(branches, exhaustive_env_pvm(branches))
    p0, p1 = branches[0].weight, branches[1].weight
    success = 1.0 - helstrom_error(p0, branches[0].lambda_state, p1, branches[1].lambda_state)
    assert best >= pvm_objective(branches, heuristic) - 1e-12
    assert best == pytest.approx(success, abs=1e-9)


def test_single_cell_beats_random_projectors_of_equal_rank(small_grid, rng):
    raw = branch_data(cat_state(small_grid, [0.0], [1.0], 0.5),
                      Partition.uniform(small_grid, 1), [make_oscillator_env(6, "position")], 1.0)
    env_state = DensityMatrix(random_density_matrix(6, rng, rank=2), (6,))
    branch = _captured(raw[0], env_state)

    pvm = heuristic_env_pvm([branch], absorb_remainder=False)
    P = pvm.projectors[0][0]
    rank = int(round(np.trace(P).real))
    assert rank == 2
    score = np.real(np.trace(P @ env_state.mat))
    assert score == pytest.approx(1.0)
    for _ in range(200):
        g = rng.standard_normal((6, rank)) + 1j * rng.standard_normal((6, rank))
        q, _ = np.linalg.qr(g)
        assert score >= np.real(np.trace(q @ q.conj().T @ env_state.mat)) - 1e-12

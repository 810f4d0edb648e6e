import numpy as np
import pytest

from sbscv_lab.bounds.chain import CHAIN_TOL, jensen_step, objective_chain, objective_split
from sbscv_lab.bounds.report import BoundReport
from sbscv_lab.utils.errors import InvalidInputError, PreconditionError
from sbscv_lab.utils.lab_types import Relation


def _diagonal(weights, norms, lhs=0.1, rhs=0.5):
    return BoundReport("diagonal_bound", lhs, rhs, context={'t': 1.0},
                       details={'branch_weights': weights, 'branch_normalizations': norms})


def test_report_relations():
    assert BoundReport("le", 1.0, 1.0 - 1e-9).satisfied
    assert not BoundReport("le", 1.0, 0.9).satisfied
    assert BoundReport("eq", 1.0, 1.0 + 5e-9, relation=Relation.eq).satisfied
    assert not BoundReport("eq", 1.0, 2.0, relation="eq").satisfied
    assert BoundReport("le", 0.2, 0.5).margin == pytest.approx(0.3)


def test_report_rejects_nan():
    with pytest.raises(InvalidInputError):
        BoundReport("bad", float('nan'), 1.0)
    with pytest.raises(InvalidInputError):
        BoundReport("bad", 0.0, 1.0, tol=-1.0)


def test_report_context_and_dict():
    report = BoundReport("x", 0.1, 0.2, context={'t': 1.0}).with_context(i=0, j=1)
    assert report.context == {'t': 1.0, 'i': 0, 'j': 1}
    as_dict = report.to_dict()
    assert as_dict['relation'] == "le"
    assert as_dict['satisfied'] is True
    assert as_dict['margin'] == pytest.approx(0.1)


def test_jensen_step():
    report = jensen_step(_diagonal([0.5, 0.5], [0.96, 0.84]))
    assert report.lhs == pytest.approx(0.5 * 0.2 + 0.5 * 0.4)
    assert report.rhs == pytest.approx(np.sqrt(0.1))
    assert report.satisfied
    assert report.context == {'t': 1.0}


def test_jensen_step_clips_rounding_above_one():
    report = jensen_step(_diagonal([1.0], [1.0 + 1e-15]))
    assert report.lhs == 0.0 and report.rhs == 0.0


def test_jensen_step_needs_normalizations():
    with pytest.raises(PreconditionError):
        jensen_step(BoundReport("diagonal_bound", 0.1, 0.2))


def test_objective_split_and_chain():
    diagonal = _diagonal([1.0], [0.9], lhs=0.1, rhs=0.5)
    offdiag = BoundReport("offdiag_total_kupsch", 0.05, 0.3)
    split = objective_split(0.12, diagonal, offdiag)
    assert split.lhs == 0.12
    assert split.rhs == pytest.approx(0.15)
    assert split.tol == CHAIN_TOL
    chain = objective_chain(diagonal, offdiag)
    assert chain.lhs == pytest.approx(0.15)
    assert chain.rhs == pytest.approx(0.8)
    assert chain.details['offdiag_route'] == "offdiag_total_kupsch"
    assert not objective_split(0.2, diagonal, offdiag).satisfied

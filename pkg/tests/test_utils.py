import pytest

from sbscv_lab.numerics.numkit import dimension_cap
from sbscv_lab.utils.envvars import DEFAULT_DIMENSION_CAP, EnvVars
from sbscv_lab.utils.errors import (ConfigurationError, InvalidInputError, PreconditionError, RankStarvationError,
                                    ResourceError, SbscvError)
from sbscv_lab.utils.logger import LogManager
from sbscv_lab.utils.system_status import collect_host_facts, get_current_revision


def test_envvars_is_a_singleton():
    assert EnvVars() is EnvVars()
    assert EnvVars.has_instance()
    assert EnvVars.delete_instance()
    assert not EnvVars.has_instance()


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv("SBSCV_CAP", "100")
    EnvVars.delete_instance()
    assert EnvVars().dimension_cap == 100
    assert dimension_cap() == 100
    assert dimension_cap(50) == 50


def test_cap_defaults_when_unset():
    assert EnvVars().dimension_cap is None
    assert dimension_cap() == DEFAULT_DIMENSION_CAP


@pytest.mark.parametrize("value", ["abc", "0", "-3"])
def test_bad_cap_is_a_configuration_error(monkeypatch, value):
    monkeypatch.setenv("SBSCV_CAP", value)
    EnvVars.delete_instance()
    with pytest.raises(ConfigurationError, match="SBSCV_CAP"):
        EnvVars()


def test_logger_writes_to_configured_path(tmp_path):
    logger = LogManager().get_logger("UtilsTest")
    logger.info("hello from the test")
    for handler in logger.handlers:
        handler.flush()
    log_file = LogManager().log_file
    assert log_file.parent == tmp_path / "logs"
    assert "hello from the test" in log_file.read_text()
    assert logger is LogManager().get_logger("UtilsTest")
    assert not logger.propagate


def test_error_hierarchy():
    assert issubclass(PreconditionError, InvalidInputError)
    assert issubclass(InvalidInputError, ValueError)
    assert issubclass(ConfigurationError, SbscvError)
    assert issubclass(RankStarvationError, ResourceError)


def test_host_facts():
    facts = collect_host_facts()
    assert {'platform', 'python', 'cpu_count_logical', 'memory_total_bytes'} <= set(facts)
    assert facts['memory_total_bytes'] > 0


def test_revision_outside_a_checkout(tmp_path):
    assert get_current_revision(str(tmp_path)) is None

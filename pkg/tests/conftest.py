"""Shared fixtures: the reference experiment and a fast, coarse variant.

The full-resolution run is expensive (~3 s), so anything that only
needs a physically sensible result — not headline-accurate numbers —
should use the ``light`` fixtures.
"""

import sys
from dataclasses import replace

import pytest

from orcasim.config import build_experiment, load_config
from orcasim.solver import SolverConfig


@pytest.fixture(scope="session")
def default_config():
    return load_config(None)


@pytest.fixture(scope="session")
def default_experiment(default_config):
    return build_experiment(default_config)


@pytest.fixture(scope="session")
def default_result(default_experiment):
    return default_experiment.run()


LIGHT_SOLVER = SolverConfig(n_z=100, n_t=1024, n_v=21)


@pytest.fixture(scope="session")
def light_experiment(default_experiment):
    return replace(default_experiment, solver_config=LIGHT_SOLVER)


@pytest.fixture(scope="session")
def light_result(light_experiment):
    return light_experiment.run()


def pytest_terminal_summary(terminalreporter):
    """Re-emit the acceptance verdict lines after the test run.

    The acceptance tests each print one PASS/FAIL line; stdout capture
    swallows those for passing tests, so they are collected and shown
    here where they always reach the log.
    """
    acceptance = sys.modules.get("test_acceptance")
    verdicts = getattr(acceptance, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)

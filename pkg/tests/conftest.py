import numpy as np
import pytest

from pxlab.problems import builtin_suite
from pxlab.solver import SolverConfig, solve

SUITE_CFG = SolverConfig(n=17, nt=20)


@pytest.fixture(scope="session")
def suite_solutions():
    """Solved built-in 2D suite, shared across modules."""
    return [(spec, solve(spec, SUITE_CFG)) for spec in builtin_suite()]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def report(request):
    """Record one pass/fail line per acceptance criterion."""

    def rec(criterion: int, passed: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config._acceptance_lines.append(line)
        print(line)

    return rec


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

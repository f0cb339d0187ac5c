from pathlib import Path

import pytest

from sofc_cathode.cli import load

ROOT = Path(__file__).resolve().parent.parent
EXAMPLE_CONFIG = ROOT / "configs" / "lscf_example.yaml"


@pytest.fixture(scope="session")
def example_config():
    return load(EXAMPLE_CONFIG)


@pytest.fixture(scope="session")
def lscf_case(example_config):
    """(geometry, materials, operating) at 800 C and 2000 A/m^2."""
    return example_config.case()


@pytest.fixture(scope="session")
def lscf_solution(lscf_case):
    from sofc_cathode import solve

    return solve(*lscf_case)


_ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict():
    """Record and print the one-line outcome of an acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])

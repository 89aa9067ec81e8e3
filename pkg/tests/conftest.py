import pytest

from sirda.harness.config import ScenarioConfig
from sirda.harness.runner import resolve_dataset

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def dataset():
    """The default synthetic dataset (default parameters, Case 4, additive 0.1)."""
    return resolve_dataset(ScenarioConfig())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE[key]
        tr.write_line(f"{'PASS' if ok else 'FAIL'} {key}: {detail}")

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed once at the end of the run
CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(name: str, passed: bool, detail: str) -> bool:
        CRITERIA.append((name, passed, detail))
        print(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed

    return record


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in CRITERIA:
        terminalreporter.write_line(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL line for an acceptance criterion; printed in the terminal summary."""

    def record(label: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        return passed

    return record


@pytest.fixture
def record_info():
    """Log an informational line that is not a pass/fail gate."""

    def record(label: str, detail: str) -> None:
        _ACCEPTANCE_LINES.append(f"INFO  {label}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

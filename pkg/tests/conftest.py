import pytest

from helpers import Bus


@pytest.fixture
def bus():
    return Bus()


@pytest.fixture
def make_bus():
    return Bus


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def verdict():
    """Record and print one pass/fail line for an acceptance criterion, then assert it."""
    def record(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        print(line)
        _ACCEPTANCE.append((name, ok, detail))
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""
import pytest

_ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def record(criterion: int, title: str, passed: bool, detail: str) -> None:
    _ACCEPTANCE[criterion] = (passed, title, detail)
    print(f"ACCEPTANCE {criterion:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        passed, title, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{n:>2}] {'PASS' if passed else 'FAIL'}  {title}: {detail}")

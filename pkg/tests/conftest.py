import pytest

_ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one acceptance line: ``acceptance(number, name, passed, detail)``."""

    def record(number, name, passed, detail):
        line = (number, name, bool(passed), detail)
        _ACCEPTANCE.append(line)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} -- {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}")

import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, name, passed, detail)."""
    lines = request.config.stash[_KEY]

    def record(number: int, name: str, passed: bool, detail: str = "") -> bool:
        lines.append((number, f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash[_KEY]
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)

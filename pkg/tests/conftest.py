import pytest

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line, print it, then assert on it."""
    lines = request.config.stash[_VERDICTS]

    def record(number, name, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        lines.append((number, line))
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)

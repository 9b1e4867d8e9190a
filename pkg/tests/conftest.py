import pytest

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance():
    """Reporter: ``acceptance(n, title, passed, detail)`` records one line and asserts."""

    def report(number, title, passed, detail):
        line = f"AC{number:02d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

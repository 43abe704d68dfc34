import pytest

ACCEPTANCE_LINES: list = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict, print it, then assert it."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    def skip(number, title):
        line = f"criterion {number:>2} SKIP  {title}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        pytest.skip(title)

    record.skip = skip
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)

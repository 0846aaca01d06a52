import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one status line per checked criterion; printed in the terminal summary."""

    def record(criterion: str, ok: bool, detail: str, soft: bool = False) -> bool:
        status = "PASS" if ok else ("FAIL (soft)" if soft else "FAIL")
        line = f"[{status}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import pytest

# criterion -> (status, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def record():
    def _record(criterion: int, ok: bool, detail: str, status: str | None = None):
        ACCEPTANCE[criterion] = (status or ("PASS" if ok else "FAIL"), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:>2}: {status:<12} {detail}")

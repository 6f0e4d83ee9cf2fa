import pytest

# (criterion id, passed, detail) collected by the acceptance suite
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(cid: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append((cid, bool(passed), detail))
        print(f"criterion {cid}: {'PASS' if passed else 'FAIL'} ({detail})")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if passed else 'FAIL'} ({detail})")

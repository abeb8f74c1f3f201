import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record ``(passed, detail)`` for an acceptance criterion, then assert it."""
    def record(k, passed, detail):
        ACCEPTANCE[k] = (bool(passed), detail)
        print(f"CRITERION {k}: {'PASS' if passed else 'FAIL'} ({detail})")
        assert passed, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if passed else 'FAIL'} ({detail})")

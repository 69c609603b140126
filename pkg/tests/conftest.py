import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion."""
    state = {}

    def record(ok: bool, detail: str):
        state["ok"], state["detail"] = bool(ok), detail
        return ok

    yield record
    name = request.node.name.removeprefix("test_")
    if "ok" not in state:
        line = f"FAIL  {name}: did not finish"
    else:
        line = f"{'PASS' if state['ok'] else 'FAIL'}  {name}: {state['detail']}"
    ACCEPTANCE_LINES.append(line)
    print(line)

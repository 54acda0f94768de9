import pytest

_verdicts = {}


@pytest.fixture
def verdict(request):
    """Record a one-line outcome for an acceptance criterion."""
    def record(number, text):
        _verdicts[number] = text
    yield record
    number = getattr(request.node.function, "criterion", None)
    if number is not None:
        rep = getattr(request.node, "rep_call", None)
        ok = rep is not None and rep.passed
        _verdicts[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {_verdicts.get(number, '')}"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_verdicts):
            terminalreporter.write_line(_verdicts[n])

import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record(request):
    """Attach a one-line detail to the current acceptance criterion."""

    def _record(detail):
        request.node.user_properties.append(("acceptance", detail))

    return _record


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1]
        detail = next((v for k, v in report.user_properties if k == "acceptance"), "")
        _ACCEPTANCE[name] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        outcome, detail = _ACCEPTANCE[name]
        mark = "PASS" if outcome == "passed" else "FAIL"
        number = int(name.split("_")[2])
        terminalreporter.write_line(f"criterion {number:2d}: {mark}  {detail}")

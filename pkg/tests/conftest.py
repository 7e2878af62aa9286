import time

import pytest

# criterion number -> (title, passed, seconds, detail)
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    failed_setup = rep.when == "setup" and not rep.passed
    if rep.when == "call" or failed_setup:
        detail = getattr(item, "_acceptance_detail", "")
        if rep.failed:
            detail = (detail + " " if detail else "") + str(rep.longrepr.reprcrash.message
                                                            if hasattr(rep.longrepr, "reprcrash") else "")
        _ACCEPTANCE[number] = (title, rep.passed, call.duration, detail.strip())


@pytest.fixture
def criterion(request):
    """Stopwatch plus a place for a one-line result note, shown in the summary."""

    class Probe:
        start = time.perf_counter()

        def elapsed(self):
            return time.perf_counter() - self.start

        def note(self, text):
            request.node._acceptance_detail = text

    return Probe()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, seconds, detail = _ACCEPTANCE[number]
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  ({seconds:.1f} s)"
        if detail:
            line += f"  {detail.splitlines()[0][:160]}"
        tr.write_line(line)

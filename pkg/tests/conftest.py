"""Collects the outcome of every acceptance criterion and prints one
PASS/FAIL/SKIP line per criterion at the end of the run."""
import re

import pytest

_RESULTS: dict[str, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        label = marker.args[0]
        detail = dict(item.user_properties).get("detail", "")
        if rep.skipped and hasattr(rep, "wasxfail"):
            status = "XFAIL"
        elif rep.skipped:
            status = "SKIP"
            detail = detail or str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else detail
        else:
            status = "PASS" if rep.passed else "FAIL"
        _RESULTS.setdefault(label, []).append((item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def key(label):
        m = re.match(r"(\d+)(\S*)", label)
        return (int(m.group(1)), m.group(2)) if m else (10**6, label)

    for label in sorted(_RESULTS, key=key):
        for name, status, detail in _RESULTS[label]:
            tr.write_line(f"{status:5s}  criterion {label}  [{name}]  {detail}")

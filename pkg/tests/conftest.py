"""Shared pytest plumbing: a pass/fail summary line for each acceptance gate."""

import re

import pytest

_GATE_RE = re.compile(r"^test_0*(\d+)_(.*)")
_results: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        m = _GATE_RE.match(item.name)
        if m:
            num = int(m.group(1))
            label = m.group(2).replace("_", " ")
            detail = ""
            for name, value in report.user_properties:
                if name == "detail":
                    detail = str(value)
            if report.passed:
                status = "PASS"
            elif report.skipped:
                status = "SKIP"
            else:
                status = "FAIL"
            _results[num] = (label, status, detail)
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance gate")
    for num in sorted(_results):
        label, status, detail = _results[num]
        line = f"[{num}/8] {label}: {status}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)

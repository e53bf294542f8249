"""Collects the acceptance verdicts and prints them after the test summary."""

import re

# (criterion id such as "6b", passed, detail)
VERDICTS = []


def _order(item):
    number, suffix = re.fullmatch(r"(\d+)(\w*)", item[0]).groups()
    return int(number), suffix


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(VERDICTS, key=_order):
        terminalreporter.write_line(f"criterion {name:<3} {'PASS' if ok else 'FAIL'}  {detail}")

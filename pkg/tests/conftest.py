"""Shared fixtures and the acceptance-line reporter.

Acceptance tests record one ``ACCEPT-n: PASS/FAIL`` line each; the lines are
replayed in the terminal summary so they stay visible even when pytest
captures stdout.
"""

import pytest

_ACCEPT_LINES = []


@pytest.fixture
def accept():
    """Record and print an acceptance verdict, then assert on it."""

    def _report(criterion: int, ok: bool, detail: str = "") -> None:
        line = f"ACCEPT-{criterion}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        _ACCEPT_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPT_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPT_LINES:
        terminalreporter.write_line(line)

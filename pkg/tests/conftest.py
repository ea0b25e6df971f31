"""Shared pytest configuration: the acceptance-criteria report.

Tests marked ``@pytest.mark.criterion(n)`` roll up into one PASS/FAIL
line per criterion at the end of the run, so the acceptance status is
readable without scanning individual test ids.
"""

import pytest

CRITERIA = {
    1: "design fidelity: discrimination and event fraction on target",
    2: "reference cells reproduce the frozen summary values",
    3: "qualitative findings on the 16-cell subsample",
    4: "noise-padded designs leave test discrimination unchanged",
    5: "property suite",
    6: "forest probability spikes vs smooth GLM surface",
}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(n): ties a test to acceptance criterion n"
    )
    config._criterion_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    # setup failures/skips count too; teardown noise does not
    if report.when == "teardown":
        return
    if report.when == "setup" and report.outcome == "passed":
        return
    bucket = item.config._criterion_outcomes.setdefault(mark.args[0], [])
    bucket.append(report.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = getattr(config, "_criterion_outcomes", None)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        recorded = outcomes.get(n)
        if not recorded:
            continue
        if any(o == "failed" for o in recorded):
            verdict = "FAIL"
        elif all(o == "skipped" for o in recorded):
            verdict = "SKIPPED"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"ACCEPTANCE {n} ({CRITERIA[n]}): {verdict}")

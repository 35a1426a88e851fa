"""Gate reporting: every test named test_criterion_NN_* gets one
`[criterion-NN] PASS|FAIL` line on the terminal, written through the
reporter so output capture cannot swallow it."""

import re

_PATTERN = re.compile(r"test_criterion_(\d{2})")
_reporter = None


def pytest_configure(config):
    global _reporter
    _reporter = config.pluginmanager.get_plugin("terminalreporter")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if m is None:
        return
    # one line per criterion: the call phase, or a setup that broke
    if report.when == "call" or (report.when == "setup" and report.failed):
        verdict = "PASS" if report.passed else "FAIL"
        line = f"[criterion-{m.group(1)}] {verdict}"
        if _reporter is not None:
            _reporter.write_line(line)
        else:
            print(line)

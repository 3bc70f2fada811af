import pytest

_TITLES = {
    1: "loan-approval fixture paths reproduced",
    2: "metadata filter reproduced",
    3: "plan shape 3 STARJOIN / 2 CHAINJOIN",
    4: "path engine equals exhaustive DFS",
    5: "plan equals naive matcher, parallelism 1 vs 8",
    6: "correlation partition laws",
    7: "desk-scale throughput and join speedup",
    8: "snapshot immutability",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    n = mark.args[0]
    results = item.config._acceptance.setdefault(n, [])
    if report.when == "call" or report.failed or report.skipped:
        if hasattr(report, "wasxfail"):
            results.append("FAIL (expected: " + report.wasxfail + ")")
        else:
            results.append("PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter, config):
    results = config._acceptance
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        failed = [r for r in results[n] if r != "PASS"]
        verdict = failed[0] if failed else "PASS"
        terminalreporter.write_line(f"criterion {n}: {verdict}  {_TITLES.get(n, '')}")

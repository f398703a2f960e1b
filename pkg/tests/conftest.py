import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "Poisson capacity closed form and explicit/implicit agreement",
    2: "bound validity by slot-level simulation",
    3: "heavy-tailed scaling law slope 1/alpha",
    4: "Poisson scaling ratio band",
    5: "capacity monotonicity grids",
    6: "offline optimum equals enumeration",
    7: "LCP contract",
    8: "split-vs-virtual delay equivalence",
    9: "qualitative savings orderings",
    10: "byte-identical sweep outputs",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    # one entry per test: the call phase, or a setup/teardown failure
    if report.when == "call" or report.failed:
        _outcomes.setdefault(marker.args[0], []).append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            continue
        failed = [name for name, passed in results if not passed]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {n:2d}: {status}  {CRITERIA[n]} ({len(results) - len(failed)}/{len(results)} checks)"
        if failed:
            line += f"  failing: {', '.join(failed)}"
        tr.write_line(line)

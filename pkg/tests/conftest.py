import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fpplab.metric import AUDIT, set_audit  # noqa: E402

CRITERIA = {
    1: "discrete passage time equals simple-path enumeration",
    2: "continuous passage time: integer coincidence and polygonal oracle",
    3: "metric axioms and envelope on every GridMetric",
    4: "geodesic localization",
    5: "restriction identity on nested lattice boxes",
    6: "construction algebra (scale, translate, prescribe)",
    7: "gradient recovery for norms and stitched fields",
    8: "corridor lower bound",
    9: "path discretization bounds",
    10: "exact enumeration vs Monte Carlo",
    11: "elementary-rate bound and rate-zero event",
    12: "subadditive assembly",
    13: "one-sided event monotonicity",
    14: "crossing-rate structure",
    15: "ball map Lipschitz bound",
    16: "gauge, erosion and tiles",
    17: "CLI determinism across thread counts",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test backs acceptance criterion n")
    set_audit(True)


def pytest_runtest_logreport(report):
    crit = getattr(report, "_criteria", None)
    if not crit:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    for c in crit:
        ok, names = _outcomes.get(c, (True, []))
        if report.when == "call" or report.failed:
            names = names + [report.nodeid] if report.when == "call" else names
        _outcomes[c] = (ok and not failed, names)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report._criteria = [m.args[0] for m in item.iter_markers("criterion")]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c, title in CRITERIA.items():
        if c not in _outcomes:
            tr.write_line(f"criterion {c:2d}: NOT RUN  {title}")
            continue
        ok, names = _outcomes[c]
        extra = ""
        if c == 3:
            ok = ok and not AUDIT["violations"]
            extra = f" [{AUDIT['checked']} GridMetrics audited, {len(AUDIT['violations'])} violations]"
        tr.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {title} ({len(names)} tests){extra}")

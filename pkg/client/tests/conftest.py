import re

_CRITERIA = {
    10: "client contract: full session via serve, measured durations, schema round-trip",
}

_NODE_RE = re.compile(r"test_contract\.py::test_criterion_(\d+)_")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, immune to output capture."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            match = _NODE_RE.search(getattr(report, "nodeid", ""))
            if match:
                number = int(match.group(1))
                results[number] = "PASS" if outcome == "passed" else "FAIL"
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title = _CRITERIA.get(number, "")
        terminalreporter.write_line(f"ACCEPTANCE {number}: {results[number]} — {title}")

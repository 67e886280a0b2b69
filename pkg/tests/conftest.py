import re

_CRITERIA = {
    1: "reward formula suite",
    2: "time-ledger identity over randomized ledgers",
    3: "rounds law: completed calls = floor(B/L)",
    4: "budget soundness over randomized episodes",
    5: "regime flip: fast-weak vs slow-strong",
    6: "budget-response trends: step growth and accuracy plateau",
    7: "bench determinism: byte-identical traces and reports",
    8: "timer contract: exact reports, bounded jitter, seeded replay",
    9: "on-time rate: budget-aware vs never-concluding policy",
}

_NODE_RE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")


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

import re


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    lines = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if not m:
                continue
            n = int(m.group(1))
            recorded = [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
            if recorded:
                lines[n] = recorded[-1]
            elif rep.when == "call" or n not in lines:
                lines[n] = f"criterion {n:2d}: FAIL  (error before the verdict: {rep.outcome})"
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])

import re

_ACCEPTANCE = {}
_DESCRIPTIONS = {
    1: "opcode/gas fidelity (bit-exact, incl. every exception case)",
    2: "Bob/Mallory reentrancy reproduction",
    3: "atomicity banking example and corrected variant",
    4: "discrimination corpus (time/reentrant/exc fn+fp)",
    5: "randomized property suites (10,000 programs)",
    6: "theorem-1 empirical consistency",
    7: "runtime budget and official-test ingestion",
}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    crit = int(m.group(1))
    passed = report.outcome == "passed"
    _ACCEPTANCE[crit] = _ACCEPTANCE.get(crit, True) and passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("ACCEPTANCE CRITERIA")
    for crit in sorted(_ACCEPTANCE):
        status = "PASS" if _ACCEPTANCE[crit] else "FAIL"
        desc = _DESCRIPTIONS.get(crit, "")
        terminalreporter.write_line(f"  criterion {crit}: {status}  ({desc})")

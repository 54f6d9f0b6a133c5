import re

CRITERIA = {
    1: "full extraction reaches the ground state (d = 2..5)",
    2: "two-level demo pinned at k = 1; k sweep equals (1+k) h_B",
    3: "closed-form ergotropy vs unitary-orbit oracle",
    4: "Choi reconstruction and constraint identities",
    5: "certificate agrees with constrained search",
    6: "uncorrelated catalysts never beat ergotropy",
    7: "correlated catalysts never beat ergotropy; entropy and delta_E checks",
    8: "contrast script on a maximally mixed qubit",
}

_outcomes = {}
_notes = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if hasattr(report, "wasxfail"):
        # a documented defect in the source material, kept visible
        _notes.setdefault(n, []).append(f"expected failure: {report.wasxfail}")
        _outcomes.setdefault(n, True)
    elif report.when == "call" or report.failed:
        _outcomes[n] = report.passed and _outcomes.get(n, True)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n in _outcomes:
            note = "".join(f" [{x}]" for x in _notes.get(n, []))
            terminalreporter.write_line(f"criterion {n}: {'PASS' if _outcomes[n] else 'FAIL'}  {CRITERIA[n]}{note}")

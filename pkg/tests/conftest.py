import pytest

from cfakit.diagram import SfmProjection

# criterion id -> list of (label, ok, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def sfm_of(model):
    r = model.roles
    return SfmProjection(r.x, r.y, r.z, r.w)


@pytest.fixture
def record():
    def _record(criterion, label, ok, detail=""):
        ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=int):
        checks = ACCEPTANCE[crit]
        failed = [label for label, ok, _ in checks if not ok]
        verdict = "FAIL" if failed else "PASS"
        note = f"  (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {crit:>2}: {verdict}{note}")
        for label, ok, detail in checks:
            tr.write_line(f"    [{'ok' if ok else 'x '}] {label}: {detail}")

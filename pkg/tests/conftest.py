import pytest

ACCEPTANCE = []


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance line: criterion(id, ok, detail)."""

    def record(cid: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE.append((cid, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {cid}: {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {cid}: {detail}")
    n_ok = sum(ok for _, ok, _ in ACCEPTANCE)
    terminalreporter.write_line(f"{n_ok}/{len(ACCEPTANCE)} criteria passed")

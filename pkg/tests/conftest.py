import pytest

CRITERIA = {
    1: "divided differences vs extended-precision quotient oracle",
    2: "first-order MOI equals entrywise divided-difference scaling",
    3: "Frechet differential vs finite-difference oracle",
    4: "perturbation identities (single slot and telescoping)",
    5: "remainder: definitional form vs single-MOI form",
    6: "remainder bound ratio stability over (p, n) sweep",
    7: "grid engine convergence",
    8: "tensor engine vs spectral engine",
    9: "compression identity",
    10: "rank-one derivative diagnostic",
    11: "continuity of the differential under halved shifts",
    12: "determinism of suite JSON",
}

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record ``(passed, detail)`` for an acceptance criterion."""
    store = request.config.stash.setdefault(_RESULTS, {})

    def record(cid: int, passed: bool, detail: str) -> bool:
        store[cid] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_RESULTS, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for cid, title in CRITERIA.items():
        passed, detail = store.get(cid, (False, "not run or did not complete"))
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {cid:>2}  {status}  {title}: {detail}")

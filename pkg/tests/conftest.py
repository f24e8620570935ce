import pytest

from mecrelay import _backend
from mecrelay.scenario import default_scenario


@pytest.fixture
def sc3():
    return default_scenario(seed=3, N=3)


@pytest.fixture(params=["python", "compiled"])
def backend(request):
    if request.param == "compiled" and not _backend.compiled_available():
        pytest.skip("compiled core not built")
    with _backend.using(request.param):
        yield request.param


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(id, passed, detail)``; the test asserts afterwards."""
    log = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(cid, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {detail}"
        log.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

import pytest

from gaugedyn.dynamics import ExpMap, StripSpec
from gaugedyn.geometry import Box
from gaugedyn.nested import construct

# Desk-scale nested family used across test modules.
DESK = dict(mu=2.0, delta=0.05, r=0.2, seed=3.1 + 0j, depth=2)

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion."""
    lines = request.config.stash[_LINES_KEY]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mu2():
    return ExpMap.from_mu(2.0)


@pytest.fixture(scope="session")
def desk_family():
    m = ExpMap.from_mu(DESK["mu"])
    return construct(m, StripSpec(DESK["delta"]), Box(DESK["seed"], DESK["r"]), DESK["r"], DESK["depth"])

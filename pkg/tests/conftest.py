import pytest
from hypothesis import settings

from liouville.conditions import ProblemSpec
from liouville.nonlinearity import parse
from liouville.simulator import integrate_radial

settings.register_profile("repo", deadline=None, database=None, print_blob=True)
settings.load_profile("repo")

# (m, n, g, u0) for the blow-up profiles used by the harness checks
BLOWUP_CASES = [
    (2, 3, "zeta^2", 0.5),
    (2, 3, "zeta^2", 1.0),
    (2, 3, "zeta^2", 2.0),
    (2, 3, "zeta^2", 4.0),
    (2, 3, "zeta^3", 1.0),
]


@pytest.fixture(scope="session")
def blowup_profiles():
    out = []
    for m, n, g, u0 in BLOWUP_CASES:
        spec = ProblemSpec(m, n, parse(g))
        out.append((spec, integrate_radial(spec, u0, 50.0)))
    return out


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """Record and print one pass/fail line for an acceptance criterion."""
    def record(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])

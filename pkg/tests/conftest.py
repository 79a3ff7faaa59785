import pytest

from dnscpm.trafficgen import ScenarioKind, ScenarioSpec, generate


@pytest.fixture(scope="session")
def s_attack():
    return generate(ScenarioSpec(kind=ScenarioKind.S_ATTACK, seed=0))


@pytest.fixture(scope="session")
def interleaved():
    return generate(ScenarioSpec(kind=ScenarioKind.INTERLEAVED, seed=0))


@pytest.fixture(scope="session")
def benign():
    return generate(ScenarioSpec(kind=ScenarioKind.BENIGN_ONLY, seed=0, noise_count=10_000))


# one PASS/FAIL line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")

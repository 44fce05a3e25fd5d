import math

import pytest

from gfmstab import eac
from gfmstab.scenario import parse_scenario
from gfmstab.simulation import find_cct, prepare

FAULTS = ("kundur_fault1", "kundur_fault2", "kundur_fault3", "kundur_fault4")
LIMITERS = ("csa", "hcl")
FVB_MODES = ("none", "local", "wacs")


@pytest.fixture(scope="session")
def smib():
    return eac.SmibParams.from_setpoint(1.0, 0.1, 0.15, 0.7, 0.049)


@pytest.fixture(scope="session")
def eac_table(smib):
    return eac.table(smib)


def scenario(name, *overrides):
    return parse_scenario(name, list(overrides))


@pytest.fixture(scope="session")
def fault1_models():
    """Prepared Fault I models for every limiter/booster pairing."""
    return {
        (lim, fvb): prepare(scenario("kundur_fault1", f"limiter={lim}", f"fvb={fvb}"))
        for lim in LIMITERS
        for fvb in FVB_MODES
    }


class CctMatrix:
    """Lazily computed CCTs keyed by (fault, limiter, fvb, tau_ms)."""

    def __init__(self):
        self._cache = {}

    def __call__(self, fault, limiter, fvb, tau_ms=0):
        key = (fault, limiter, fvb, tau_ms)
        if key not in self._cache:
            scn = scenario(fault, f"limiter={limiter}", f"fvb={fvb}", f"tau_ms={tau_ms}")
            self._cache[key] = find_cct(scn)
        return self._cache[key]


@pytest.fixture(scope="session")
def cct():
    return CctMatrix()


def deg(x):
    return math.degrees(x)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def emit(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

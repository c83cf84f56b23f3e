import math

import pytest

from symblend.arithmetic import RotationNumber
from symblend.twist_maps import T0Spec, T1Spec, make_t0, make_t1
from symblend.normal_form import select_regime, build_chart

GOLDEN = RotationNumber.golden()

# desk-scale regime used across the blender tests
CHI, KAPPA, TAU, N_TARGET = 0.05, 0.005, 1.0, 10**6
EPS = CHI * CHI / (N_TARGET * TAU) * (1 + 1e-9)


@pytest.fixture(scope="session")
def maps():
    return make_t0(T0Spec(GOLDEN, TAU, mu3=0.05)), make_t1(T1Spec(EPS, (0.3, 0.1)))


@pytest.fixture(scope="session")
def regime(maps):
    return select_regime(CHI, KAPPA, *maps)


@pytest.fixture(scope="session")
def chart(regime):
    return build_chart(regime)


@pytest.fixture(scope="session")
def double_blender(regime):
    from symblend.blender import build_double_blender
    return build_double_blender(regime)


@pytest.fixture(scope="session")
def transit(regime, double_blender):
    from symblend.blender import Transitivity
    return Transitivity(regime, double=double_blender)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def accept():
    def record(k, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append((k, line))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from trapcheck import sds_metric as sm


@pytest.fixture
def p4():
    """n=4, M=1, λ=0.01 (Λ = 0.03): the reference parameter set."""
    return sm.SdsParams.from_lambda(4, 1.0, 0.01)


@pytest.fixture
def p5():
    return sm.SdsParams.from_lambda(5, 1.0, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def valid_param_sets():
    """Twenty valid (n, M, λ) triples spread over dimension, mass and distance to criticality."""
    out = []
    for n in (4, 5, 6, 7):
        for mass in (0.5, 1.0, 2.0):
            crit = ((n - 3) ** (n - 3) / (n - 1) ** (n - 1) / mass**2) ** (1.0 / (n - 3))
            for frac in (0.05, 0.5):
                out.append((n, mass, frac * crit))
    out = out[:18] + [(4, 1.0, 0.99 * 1 / 27), (6, 0.7, 1e-4)]
    return out


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for idx in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[idx])

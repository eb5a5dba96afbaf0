import math

import pytest

from cv2x.channel import NetworkParams, dbm_to_watts, equivalent_densities

KM = 1000.0

_REPORT = []


def fig5_params(**over):
    base = dict(mu_l=10 / KM, lambda_1=0.5 / KM ** 2, lambda_2=4 / KM, lambda_r=15 / KM,
                alpha=4.0, P1=dbm_to_watts(40), P2=dbm_to_watts(23),
                G1=1.0, g1=0.01, G2=1.0, g2=0.01, q_c=0.05,
                sigma_1=4.0, sigma_20=2.0, sigma_21=4.0)
    base.update(over)
    return NetworkParams(**base)


@pytest.fixture(scope="session")
def fig5():
    return fig5_params()


@pytest.fixture(scope="session")
def fig5_eq(fig5):
    return equivalent_densities(fig5)


@pytest.fixture(scope="session")
def report():
    """Collects one summary line per acceptance criterion."""
    def add(tag, ok, detail):
        line = f"{tag}: {'PASS' if ok else 'FAIL'}  {detail}"
        _REPORT.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)

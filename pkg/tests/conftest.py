import numpy as np
import pytest

from willmore_foliation.metric import ConformalMetric
from willmore_foliation.surface import build_graph, geometry

ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str):
    """Store the one-line acceptance verdict printed at the end of the run."""
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def bumpy_coeffs(grid, radius, amplitude=0.3):
    """Sphere of ``radius`` plus fixed low-degree bumps of sup size about ``amplitude``."""
    c = np.zeros(grid.ncoef)
    c[0] = radius * np.sqrt(4.0 * np.pi)
    c[4 + 2] = 0.6 * amplitude
    c[9 + 1] = -0.4 * amplitude
    c[16 + 5] = 0.3 * amplitude
    c[2] = 0.2 * amplitude
    return c


@pytest.fixture(scope="session")
def schwarzschild():
    return ConformalMetric(1.0)


@pytest.fixture(scope="session")
def bumpy_schwarzschild_geometry(schwarzschild):
    """Non-round surface at scale 10 around an off-center point in Schwarzschild."""
    g = build_graph([0.5, -0.3, 0.2], 10.0, 16)
    g = g.with_coeffs(bumpy_coeffs(g.grid, 10.0))
    return geometry(g, schwarzschild)

import numpy as np
import pytest

from spinlab.grid import MetricField, TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_spd_field(grid: TorusGrid, amplitude: float = 0.15, phase: float = 0.0) -> np.ndarray:
    """Identity plus ``L L^T`` with ``L`` built from low-frequency sinusoids."""
    X = grid.coords()
    m = grid.m
    L = np.zeros(grid.shape + (m, m))
    for i in range(m):
        for j in range(m):
            L[..., i, j] = amplitude * np.sin(X[0] + (i + 1) * X[-1] + j + phase)
    return np.eye(m) + L @ np.swapaxes(L, -1, -2)


def riemannian_pair(n: int, amplitude: float = 0.15):
    grid = TorusGrid((n, n))
    g = MetricField(grid, smooth_spd_field(grid, amplitude), (2, 0))
    h = MetricField(grid, g.values + smooth_spd_field(grid, 0.2, 1.0) - np.eye(2), (2, 0))
    return g, h


def anisotropic_metric(grid: TorusGrid) -> MetricField:
    x, y = grid.coords()
    vals = np.stack(
        [np.stack([1.2 + 0.2 * np.sin(x), 0.1 * np.cos(y)], -1), np.stack([0.1 * np.cos(y), 1.0 + 0.15 * np.cos(x + y)], -1)],
        -2,
    )
    return MetricField(grid, vals, (2, 0))


# one "PASS/FAIL criterion N: ..." line per acceptance criterion, collected by
# tests/test_acceptance.py and repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

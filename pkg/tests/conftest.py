import numpy as np
import pytest

from relaxfield.grid import (
    DeviceLayout,
    ElectrodeRegion,
    GridSpec,
    OverlapConflict,
    build_grid,
    canonical_layout,
)
from relaxfield.solver import SolverConfig, solve

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_layout(rng: np.random.Generator, n: int, max_regions: int = 4):
    """Random non-conflicting electrodes strictly inside the shield, plus a free monitor node."""
    roles = ("source", "drain", "gate")
    while True:
        regions = []
        for _ in range(rng.integers(1, max_regions + 1)):
            x0, y0 = rng.uniform(0.1, 0.75, size=2)
            w, h = rng.uniform(0.02, 0.25, size=2)
            rect = (x0, y0, min(x0 + w, 0.9), min(y0 + h, 0.9))
            regions.append(ElectrodeRegion(str(rng.choice(roles)), rect, float(rng.uniform(-5, 5))))
        layout = DeviceLayout(tuple(regions))
        try:
            grid = build_grid(layout, GridSpec(n))
        except OverlapConflict:
            continue
        free = np.argwhere(grid.free)
        centre = np.array([n / 2, n / 2])
        monitor = tuple(int(c) for c in free[np.argmin(((free - centre) ** 2).sum(axis=1))])
        return layout, grid, monitor


@pytest.fixture
def rng():
    return np.random.default_rng(20080556)


_SOLVED = {}


def solved_canonical(n: int, method="sor", beta0=1.9, tol=1e-4):
    key = (n, method, beta0, tol)
    if key not in _SOLVED:
        grid = build_grid(canonical_layout(), GridSpec(n))
        _SOLVED[key] = (grid, *solve(grid, SolverConfig(method=method, beta0=beta0, tol=tol)))
    return _SOLVED[key]

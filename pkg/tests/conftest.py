import numpy as np
import pytest

from ringfilm.geometry import DimpleTexture, GapModel, Grid, RingProfile, WearProfile, gap_field


def random_gap(rng, grid: Grid, Z=None):
    """Crowned gap with a random smooth ripple, strictly positive."""
    Z = rng.uniform(0.6, 1.5) if Z is None else Z
    gm = GapModel(RingProfile(rng.uniform(30.0, 120.0)), WearProfile(0.0))
    h = gap_field(grid, gm, Z)
    X1, X2 = grid.centers()
    k = rng.integers(1, 4)
    ripple = 0.2 * Z * np.sin(2 * np.pi * k * X1 + rng.uniform(0, 2 * np.pi))
    if grid.n_x2 > 1:
        ripple = ripple * np.cos(2 * np.pi * X2 / grid.length_x2)
    return np.ascontiguousarray(h + ripple)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def textured_gap():
    return GapModel(RingProfile(64.0), WearProfile(0.0), DimpleTexture())


# one line per acceptance criterion, filled in by test_acceptance.py
CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

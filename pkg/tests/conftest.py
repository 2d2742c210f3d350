import math

import numpy as np
import pytest

from vvlab.fields import Grid2D, ScalarField2D


ACCEPTANCE_LINES: list[str] = []


def record_acceptance_line(line: str) -> None:
    """Append to every loaded instance of this module.

    pytest imports conftest.py under its own module name, so a plain
    ``from tests.conftest import ACCEPTANCE_LINES`` can land on a second copy;
    this helper reaches the one whose hook actually runs.
    """
    import sys

    seen = []
    for mod in list(sys.modules.values()):
        target = getattr(mod, "ACCEPTANCE_LINES", None)
        if isinstance(target, list) and id(target) not in seen:
            if getattr(mod, "__file__", "") == __file__:
                target.append(line)
                seen.append(id(target))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def grid64():
    return Grid2D(64, 2 * math.pi)


@pytest.fixture
def grid32():
    return Grid2D(32, 1.0)


def random_mean_zero_field(grid: Grid2D, seed: int, k_max: int = 8) -> ScalarField2D:
    """Band-limited random mean-zero field, smooth enough for spectral tests."""
    rng = np.random.default_rng(seed)
    n = grid.n
    coef = np.zeros((n, n), dtype=complex)
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    for i, mi in enumerate(freqs):
        for j, mj in enumerate(freqs):
            if 0 < mi * mi + mj * mj <= k_max * k_max:
                coef[i, j] = rng.normal() + 1j * rng.normal()
    vals = np.fft.ifft2(coef).real
    vals -= vals.mean()
    return ScalarField2D(grid, vals)

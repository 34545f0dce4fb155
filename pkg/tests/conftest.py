import numpy as np
import pytest

from helmstack.core import Grid, MediaModel, NATURAL_GAMMA, apply_abc, builtin_grid, builtin_media
from helmstack.discretize import assemble_saddle


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_media(cells=(8, 8), name="linear", abc=2, lambda_factor=1.0):
    g = builtin_grid(name, cells)
    m = builtin_media(name, g, lambda_factor)
    return apply_abc(m, abc) if abc else m


def constant_media(cells, rho=1.7, lam=6.0, mu=1.3, gamma=NATURAL_GAMMA):
    return MediaModel(Grid(tuple(cells), (1.0,) * len(cells)), rho, lam, mu, gamma)


@pytest.fixture
def saddle_8x8():
    return assemble_saddle(small_media((8, 8)), 1.1)


def crand(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

"""Iteration-count baselines on the synthetic layered stand-in model.

These counts are regression anchors, not reproductions of published values.
"""
import json
import pathlib

import pytest

from helmstack.core import apply_abc, default_abc_width, extend_bottom, synthetic_layered
from helmstack.experiments import multigrid_run

pytestmark = pytest.mark.slow

BASELINES = json.loads((pathlib.Path(__file__).with_name("baselines.json")).read_text())


@pytest.fixture(scope="module")
def layered():
    m = extend_bottom(synthetic_layered(), 16)
    return apply_abc(m, default_abc_width(m.grid.cells))


@pytest.mark.parametrize("levels", [2, 3])
def test_layered_baseline(layered, levels):
    assert layered.grid.cells == (544, 128)
    rep, total, prec = multigrid_run(layered, "block-acoustic", levels, 0.2)
    assert rep.converged
    assert rep.iterations == BASELINES[f"layered_544x128_levels{levels}_alpha0.2"]

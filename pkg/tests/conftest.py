"""Shared fixtures: seeded textures and backend handling."""

from __future__ import annotations

import numpy as np
import pytest

from flownav.flow.imops import gaussian_blur


def make_texture(shape: tuple[int, int], seed: int, smooth: float = 2.0) -> np.ndarray:
    """Smooth random texture in [0,1]-ish range; the standard test signal.

    Low-passed white noise has energy at every scale but no aliasing traps,
    which is what the displacement estimator assumes of real footage.
    """
    rng = np.random.default_rng(seed)
    tex = gaussian_blur(rng.random(shape), smooth)
    return tex


@pytest.fixture
def texture() -> np.ndarray:
    return make_texture((120, 160), seed=42)


@pytest.fixture
def texture_large() -> np.ndarray:
    return make_texture((240, 320), seed=7)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines after the run, capture or not."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

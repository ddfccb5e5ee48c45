from __future__ import annotations

import pytest

from helpers import BENCHMARK_SYSTEM
from zolqr import harness
from zolqr.lqr_core import LinearQuadraticSystem


@pytest.fixture(scope="session")
def benchmark():
    """The bundled unstable 3-state / 1-input system: (system, K0, x0)."""
    return harness.load_system(BENCHMARK_SYSTEM)


@pytest.fixture(scope="session")
def scalar_system():
    """a=0.5, b=1, q=1, r=1, sigma0=1: everything has a closed form."""
    return LinearQuadraticSystem(
        a=[[0.5]], b=[[1.0]], q=[[1.0]], r=[[1.0]], sigma0=[[1.0]]
    )

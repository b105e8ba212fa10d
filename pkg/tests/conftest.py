from __future__ import annotations

import numpy as np
import pytest

from acoustic_lab.mesh import build_mesh
from acoustic_lab.model import State, functional_constants, make_nonlinearity


@pytest.fixture(scope="session")
def mesh201():
    return build_mesh(201, 1.0)


@pytest.fixture(scope="session")
def mesh51():
    return build_mesh(51, 1.0)


@pytest.fixture(scope="session")
def dwell():
    return make_nonlinearity("double_well", k=1.0)


@pytest.fixture(scope="session")
def zero_nl():
    return make_nonlinearity("zero")


@pytest.fixture(scope="session")
def fc201(mesh201, dwell):
    return functional_constants(mesh201, dwell)


def random_state(rng, n, eps, scale=1.0, t=0.0):
    return State(scale * rng.normal(size=n), scale * rng.normal(size=n),
                 scale * rng.normal(size=2), scale * rng.normal(size=2), eps, t)


def smooth_state(mesh, eps, amp=0.5):
    x = mesh.x
    return State(amp * np.cos(np.pi * x) + 0.3, amp * np.sin(2 * np.pi * x),
                 np.array([0.2, -0.1]), np.array([0.1, 0.3]), eps)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

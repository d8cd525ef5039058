import math

import numpy as np
import pytest
from hypothesis import settings

from rgflow.curvature import FlowParams
from rgflow.flow import run
from rgflow.initial import sinusoid
from rgflow.surface import build_sphere, build_torus

settings.register_profile("rgflow", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("rgflow")

TWO_PI = 2 * math.pi

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def torus64():
    return build_torus(64, 64, TWO_PI, TWO_PI)


@pytest.fixture(scope="session")
def unit_torus32():
    return build_torus(32, 32, 1.0, 1.0)


@pytest.fixture(scope="session")
def sphere4():
    return build_sphere(4, 1.0)


@pytest.fixture(scope="session")
def sphere3():
    return build_sphere(3, 1.0)


@pytest.fixture(scope="session")
def sphere_run(sphere4):
    """Perturbed unit sphere with positive curvature throughout, alpha' = 0.1."""
    p = FlowParams(alpha_prime=0.1, t_end=0.5, sample_stride=40)
    u0 = sinusoid(sphere4, 0.05, 2, 0)
    return sphere4, p, run(sphere4, u0, p)


@pytest.fixture(scope="session")
def unit_torus_run(unit_torus32):
    """``u0 = 0.05 sin(2 pi x)`` on the unit torus, alpha' = 0.1, to t = 1."""
    d = unit_torus32
    p = FlowParams(alpha_prime=0.1, t_end=1.0, sample_stride=500)
    u0 = 0.05 * np.sin(2 * np.pi * d.points[:, 0])
    return d, p, run(d, u0, p)


@pytest.fixture
def acceptance():
    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(ACCEPTANCE_LINES)):
            terminalreporter.write_line(line)

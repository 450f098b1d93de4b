"""Shared fixtures: canonical cells and the manufactured solution."""

import numpy as np
import pytest

from quadfem.geometry import Quad, unit_square


@pytest.fixture
def square():
    return unit_square()


@pytest.fixture
def trapezoid():
    return Quad([(0.0, 0.0), (4.0, 0.0), (3.5, 2.0), (0.5, 2.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def exact_p(x):
    x = np.atleast_2d(x)
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def exact_grad(x):
    x = np.atleast_2d(x)
    sx, cx = np.sin(np.pi * x[:, 0]), np.cos(np.pi * x[:, 0])
    sy, cy = np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 1])
    return np.pi * np.column_stack([cx * sy, sx * cy])


def exact_u(x):
    return -exact_grad(x)


def exact_div_u(x):
    return load_f(x)


def load_f(x):
    return 2.0 * np.pi**2 * exact_p(x)

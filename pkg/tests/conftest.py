import math

import numpy as np
import pytest

from qfbsim import PhysicalParams, TargetState, ideal_params, measured_params

GAMMA1 = 1.0 / 4.7e-6


@pytest.fixture
def params() -> PhysicalParams:
    return measured_params()


@pytest.fixture
def ideal() -> PhysicalParams:
    return ideal_params()


@pytest.fixture
def equator() -> TargetState:
    return TargetState(math.pi / 2.0, math.pi / 2.0)


@pytest.fixture
def excited() -> TargetState:
    return TargetState(0.0, 0.0)


def gauss_hermite_2d(n: int = 21):
    """Nodes/weights for E over two independent N(0,1) variables."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    W1, W2 = np.meshgrid(x, x)
    WT = np.outer(w, w) / (2.0 * np.pi)
    return W1.ravel(), W2.ravel(), WT.ravel()

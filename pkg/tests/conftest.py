import math

import numpy as np
import pytest

from ibrlyap import models


@pytest.fixture(scope="session")
def gfl():
    return models.gfl_table_a1()


@pytest.fixture(scope="session")
def gfm():
    return models.gfm_table_a1()


@pytest.fixture(scope="session")
def scenario():
    return models.table_a1_scenario()


def rk4_reference(f, y0, t_end, h):
    """Plain numpy RK4 used where a test needs an integrator independent of
    the compiled kernels."""
    y = np.asarray(y0, dtype=float)
    ts, ys = [0.0], [y]
    n = int(round(t_end / h))
    for k in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ts.append((k + 1) * h)
        ys.append(y)
    return np.array(ts), np.array(ys)


def five_point_derivative(values, h):
    """Fourth-order central difference on interior samples [2:-2]."""
    v = np.asarray(values)
    return (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)


GFL_W_CRI_CLOSED_FORM = -0.5 * (math.pi - 2 * math.pi / 6) + 2 * math.cos(math.pi / 6)

import numpy as np
import pytest

from weakident.models import FeatureSpec, GridSpec, ObservationSet
from weakident.suite.models import SystemDefinition

ADVECTION_SPEED = 1.0
DIFFUSIVITY = 0.01
# (wavenumber, amplitude, phase) of the advected modes
ADVECTION_MODES = [(4, 1.0, 0.0), (6, 0.6, 1.0), (10, 0.4, 2.0)]


def advection_diffusion_solution(t, x):
    """Exact solution of u_t = -c u_x + nu u_xx on a periodic domain."""
    u = np.zeros(np.broadcast(t, x).shape)
    for k, amplitude, phase in ADVECTION_MODES:
        u = u + (
            amplitude
            * np.exp(-DIFFUSIVITY * k**2 * t)
            * np.sin(k * (x - ADVECTION_SPEED * t) + phase)
        )
    return u


def linear_spiral_solution(t):
    """Exact solution of the damped rotation x' = -0.15x + 2.5y,
    y' = -2.5x - 0.15y from (2, 50)."""
    decay = np.exp(-0.15 * t)
    c, s = np.cos(2.5 * t), np.sin(2.5 * t)
    return decay * (2 * c + 50 * s), decay * (-2 * s + 50 * c)


@pytest.fixture(scope="function")
def advection_grid():
    return GridSpec(nt=251, dt=0.02, nx=(256,), dx=(2 * np.pi / 256,))


@pytest.fixture(scope="function")
def advection_data(advection_grid):
    t = advection_grid.time_points()[:, None]
    x = advection_grid.space_points(0)[None, :]
    return ObservationSet(
        advection_grid, [advection_diffusion_solution(t, x)], ["u"]
    )


@pytest.fixture(scope="function")
def spiral_data():
    grid = GridSpec(nt=1001, dt=0.01)
    x, y = linear_spiral_solution(grid.time_points())
    return ObservationSet(grid, [x, y], ["x", "y"])


@pytest.fixture(scope="function")
def small_2d_data():
    grid = GridSpec(
        nt=40, dt=0.05, nx=(32, 24), dx=(2 * np.pi / 32, 2 * np.pi / 24)
    )
    t = grid.time_points()[:, None, None]
    y = grid.space_points(1)[None, :, None]
    x = grid.space_points(0)[None, None, :]
    u = np.exp(-t) * np.sin(x) * np.cos(y) + 0.2 * np.cos(2 * x - t)
    return ObservationSet(grid, [u], ["u"])


def _heat_ic(grid):
    x = grid.space_points(0)
    return [np.sin(x) + 0.5 * np.sin(3 * x)]


@pytest.fixture(scope="function")
def heat_definition():
    return SystemDefinition(
        name="heat",
        names=("u",),
        terms=([(FeatureSpec((2,), (1,)), 1.0)],),
        grid=GridSpec(nt=51, dt=0.01, nx=(64,), dx=(2 * np.pi / 64,)),
        initial_condition=_heat_ic,
        alpha_cap=2,
        beta_cap=2,
        scheme="spectral",
    )

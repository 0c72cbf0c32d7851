import sys
sys.path.append("../weakident")
import numpy as np
import pytest

from weakident.assembly import (
    SubsampleSpec,
    assemble,
    axis_kernels,
    centers_from_counts,
    direct_quadrature_reference,
    monomial,
    separable_kernel,
    subsample_centers,
    subsample_count,
    windows,
)
from weakident.exceptions import EmptyInterior, NonFiniteFeature
from weakident.models import GridSpec, ObservationSet, build_dictionary
from weakident.test_functions import AxisTestFunction, TestFunction
from tests.fixtures import *


@pytest.fixture(scope="function")
def line_tf(advection_grid):
    return TestFunction(
        AxisTestFunction(20, 6, advection_grid.dt),
        (AxisTestFunction(30, 8, advection_grid.dx[0]),),
    )


@pytest.fixture(scope="function")
def planar_tf(small_2d_data):
    grid = small_2d_data.grid
    return TestFunction(
        AxisTestFunction(5, 4, grid.dt),
        (
            AxisTestFunction(6, 6, grid.dx[0]),
            AxisTestFunction(4, 5, grid.dx[1]),
        ),
    )


def test_subsample_spec():
    spec = SubsampleSpec((50,))
    assert spec.target(0) == 50
    assert spec.target(2) == 50
    assert SubsampleSpec((10, 20)).target(2) == 20
    assert spec.grow(20).targets == (70,)


def test_subsample_count():
    assert subsample_count(256, 17, 50) == 46
    assert subsample_count(100, 10, 1000) == 80
    assert subsample_count(23, 10, 5) == 2

    with pytest.raises(EmptyInterior):
        subsample_count(21, 10, 50)


def test_centers(advection_data, line_tf):
    centers = subsample_centers(advection_data, line_tf, SubsampleSpec((50,)))
    t_index, x_index = centers.axis_indices
    assert t_index[0] == 20 and t_index[-1] == 251 - 1 - 20
    assert x_index[0] == 30 and x_index[-1] == 256 - 1 - 30
    assert centers.counts == (
        subsample_count(251, 20, 50),
        subsample_count(256, 30, 50),
    )
    assert np.all(np.diff(t_index) > 0)
    assert np.all(np.diff(x_index) > 0)
    assert len(centers) == centers.counts[0] * centers.counts[1]

    rows = centers.rows
    assert rows.shape == (len(centers), 2)
    # time index varies slowest
    assert np.all(rows[: centers.counts[1], 0] == t_index[0])
    assert np.array_equal(rows[: centers.counts[1], 1], x_index)

    again = centers_from_counts(advection_data, line_tf, centers.counts)
    assert all(
        np.array_equal(a, b)
        for a, b in zip(again.axis_indices, centers.axis_indices)
    )


def test_centers_empty_interior(advection_grid):
    data = ObservationSet(advection_grid, [np.zeros(advection_grid.shape)])
    tf = TestFunction(
        AxisTestFunction(125, 4, advection_grid.dt),
        (AxisTestFunction(10, 4, advection_grid.dx[0]),),
    )
    with pytest.raises(EmptyInterior):
        subsample_centers(data, tf, SubsampleSpec((50,)))


def test_monomial():
    u = np.array([1.0, 2.0, 3.0])
    v = np.array([2.0, 0.5, -1.0])
    assert np.allclose(monomial([u, v], (0, 0)), 1.0)
    assert np.allclose(monomial([u, v], (2, 1)), u**2 * v)


def test_assemble_matches_direct_quadrature_1d(advection_data, line_tf):
    dictionary = build_dictionary(1, 1, 3, 3)
    centers = subsample_centers(advection_data, line_tf, SubsampleSpec((8,)))
    system = assemble(advection_data, dictionary, line_tf, centers)
    assert system.w.shape == (len(centers), len(dictionary))
    assert system.b.shape == (len(centers), 1)
    assert system.num_rows == len(centers)

    rows = centers.rows
    for h in (0, len(rows) // 2, len(rows) - 1):
        for index, feature in enumerate(dictionary):
            expected = direct_quadrature_reference(
                advection_data, feature, line_tf, rows[h]
            )
            column = np.max(np.abs(system.w[:, index]))
            assert system.w[h, index] == pytest.approx(
                expected, rel=1e-10, abs=1e-10 * column
            )


def test_assemble_matches_direct_quadrature_2d(small_2d_data, planar_tf):
    dictionary = build_dictionary(1, 2, 3, 2)
    centers = centers_from_counts(small_2d_data, planar_tf, (3, 2, 3))
    system = assemble(small_2d_data, dictionary, planar_tf, centers)
    rows = centers.rows
    assert rows.shape == (18, 3)
    for h in (0, 7, 17):
        for index, feature in enumerate(dictionary):
            expected = direct_quadrature_reference(
                small_2d_data, feature, planar_tf, rows[h]
            )
            column = np.max(np.abs(system.w[:, index]))
            assert system.w[h, index] == pytest.approx(
                expected, rel=1e-10, abs=1e-10 * column
            )


def test_assemble_rhs_is_weak_time_derivative(advection_data):
    """-∫ u ∂_t phi equals ∫ u_t phi for data with known u_t."""
    grid = advection_data.grid
    tf = TestFunction(
        AxisTestFunction(30, 10, grid.dt),
        (AxisTestFunction(40, 12, grid.dx[0]),),
    )
    dictionary = build_dictionary(1, 1, 2, 1)
    centers = subsample_centers(advection_data, tf, SubsampleSpec((10,)))
    system = assemble(advection_data, dictionary, tf, centers)

    # u_t = -c u_x + nu u_xx holds exactly for the fixture
    u_x = dictionary.index_of_label("u_x", ["u"])
    u_xx = dictionary.index_of_label("u_xx", ["u"])
    predicted = (
        -ADVECTION_SPEED * system.w[:, u_x] + DIFFUSIVITY * system.w[:, u_xx]
    )
    b = system.b[:, 0]
    assert np.linalg.norm(predicted - b) <= 1e-6 * np.linalg.norm(b)


def test_assemble_selected_columns(advection_data, line_tf):
    dictionary = build_dictionary(1, 1, 2, 2)
    centers = subsample_centers(advection_data, line_tf, SubsampleSpec((8,)))
    full = assemble(advection_data, dictionary, line_tf, centers)
    partial = assemble(advection_data, dictionary, line_tf, centers, [2, 5])
    assert np.allclose(partial.w[:, [2, 5]], full.w[:, [2, 5]])
    assert np.all(partial.w[:, [0, 1, 3, 4, 6]] == 0)
    assert np.allclose(partial.b, full.b)


def test_assemble_overflow(advection_grid, line_tf):
    values = np.full(advection_grid.shape, 1e200)
    data = ObservationSet(advection_grid, [values])
    dictionary = build_dictionary(1, 1, 1, 2)
    centers = subsample_centers(data, line_tf, SubsampleSpec((8,)))
    with pytest.raises(NonFiniteFeature):
        assemble(data, dictionary, line_tf, centers)


def test_windows(small_2d_data, planar_tf):
    centers = centers_from_counts(small_2d_data, planar_tf, (2, 2, 2))
    field = small_2d_data.values[0]
    stacked = windows(field, planar_tf, centers)
    assert stacked.shape == (8, 11, 9, 13)

    t, y, x = centers.rows[5]
    expected = field[t - 5 : t + 6, y - 4 : y + 5, x - 6 : x + 7]
    assert np.array_equal(stacked[5], expected)

    kernel = separable_kernel(axis_kernels(planar_tf, (0, 0)))
    assert kernel.shape == (11, 9, 13)


def test_constant_column_is_window_integral(advection_data, line_tf):
    dictionary = build_dictionary(1, 1, 1, 1)
    centers = subsample_centers(advection_data, line_tf, SubsampleSpec((8,)))
    system = assemble(advection_data, dictionary, line_tf, centers)
    # the normalized test function integrates to one
    assert np.allclose(system.w[:, 0], 1.0)


def _travelling_wave(nx, nt, dt):
    grid = GridSpec(nt=nt, dt=dt, nx=(nx,), dx=(2 * np.pi / nx,))
    t = grid.time_points()[:, None]
    x = grid.space_points(0)[None, :]
    return ObservationSet(grid, [np.sin(x - t)], ["u"])


def _transport_residual(data, m, p):
    """RMS of the weak residual for u_t = -u_x relative to the RMS of b."""
    tf = TestFunction(
        AxisTestFunction(m, p, data.grid.dt),
        (AxisTestFunction(m, p, data.grid.dx[0]),),
    )
    dictionary = build_dictionary(1, 1, 1, 1)
    centers = centers_from_counts(data, tf, (4, 4))
    system = assemble(data, dictionary, tf, centers)
    u_x = dictionary.index_of_label("u_x", ["u"])
    b = system.b[:, 0]
    residual = b + system.w[:, u_x]
    return np.linalg.norm(residual) / np.linalg.norm(b)


def test_assemble_converges_under_refinement():
    # same physical support on both grids
    coarse = _transport_residual(_travelling_wave(64, 64, 0.05), 8, 4)
    fine = _transport_residual(_travelling_wave(128, 127, 0.025), 16, 4)
    assert coarse < 1e-2
    assert fine <= coarse / 4


def test_assemble_is_linear_in_the_data(advection_data, line_tf):
    dictionary = build_dictionary(1, 1, 1, 1)
    centers = subsample_centers(advection_data, line_tf, SubsampleSpec((6,)))
    scaled = advection_data.replace_values([3.0 * advection_data.values[0]])
    base = assemble(advection_data, dictionary, line_tf, centers)
    tripled = assemble(scaled, dictionary, line_tf, centers)

    assert np.allclose(tripled.w[:, 0], base.w[:, 0])
    assert np.allclose(tripled.w[:, 1:], 3.0 * base.w[:, 1:])
    assert np.allclose(tripled.b, 3.0 * base.b)

    row = centers.rows[len(centers) // 2]
    for index, feature in enumerate(dictionary):
        expected = direct_quadrature_reference(scaled, feature, line_tf, row)
        assert tripled.w[len(centers) // 2, index] == pytest.approx(
            expected, rel=1e-10, abs=1e-10
        )

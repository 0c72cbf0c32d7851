import sys
sys.path.append("../weakident")
import numpy as np
import pytest

from weakident.assembly import centers_from_counts
from weakident.exceptions import UndefinedMetric
from weakident.metrics import (
    NoiseSpec,
    add_noise,
    error_report,
    forward_simulate,
    noise_level,
    polynomial_rhs,
    noise_error_check,
)
from weakident.models import (
    Coefficients,
    FeatureSpec,
    GridSpec,
    ObservationSet,
    build_dictionary,
)
from weakident.test_functions import AxisTestFunction, TestFunction
from tests.fixtures import *


def _spiral_coefficients(dictionary):
    return [
        Coefficients.from_terms(
            dictionary,
            [(FeatureSpec((), (1, 0)), -0.15), (FeatureSpec((), (0, 1)), 2.5)],
        ),
        Coefficients.from_terms(
            dictionary,
            [
                (FeatureSpec((), (1, 0)), -2.5),
                (FeatureSpec((), (0, 1)), -0.15),
            ],
        ),
    ]


def test_noise_level():
    values = np.array([0.0, 2.0, 0.0, 2.0])
    assert noise_level(values, 0.5) == pytest.approx(0.5)
    # offsets do not change the level
    assert noise_level(values + 100.0, 0.5) == pytest.approx(0.5)
    assert noise_level(values, 0.0) == 0.0


def test_add_noise(advection_data):
    assert add_noise(advection_data, NoiseSpec(0.0)) is advection_data

    noisy = add_noise(advection_data, NoiseSpec(0.1, seed=4))
    again = add_noise(advection_data, NoiseSpec(0.1, seed=4))
    other = add_noise(advection_data, NoiseSpec(0.1, seed=5))
    assert np.array_equal(noisy.values[0], again.values[0])
    assert not np.array_equal(noisy.values[0], other.values[0])
    assert noisy.grid == advection_data.grid
    assert noisy.names == advection_data.names

    residual = noisy.values[0] - advection_data.values[0]
    expected = noise_level(advection_data.values[0], 0.1)
    assert np.std(residual) == pytest.approx(expected, rel=0.02)

    with pytest.raises(ValueError):
        NoiseSpec(-0.1)


def test_add_noise_statistics():
    grid = GridSpec(nt=10**6, dt=1e-3)
    clean = ObservationSet(grid, [np.sin(grid.time_points())], ["x"])
    sigma = noise_level(clean.values[0], 0.2)

    first = add_noise(clean, NoiseSpec(0.2, seed=1)).values[0]
    second = add_noise(clean, NoiseSpec(0.2, seed=2)).values[0]
    e1 = first - clean.values[0]
    e2 = second - clean.values[0]
    assert 0.98 <= np.std(e1) / sigma <= 1.02
    assert 0.98 <= np.std(e2) / sigma <= 1.02
    assert abs(np.corrcoef(e1, e2)[0, 1]) < 0.01
    assert abs(np.corrcoef(e1, clean.values[0])[0, 1]) < 0.01


def test_error_report():
    c_true = Coefficients([0.0, 1.0, -2.0, 0.0])
    c_hat = Coefficients([0.0, 1.1, -2.0, 0.1])
    report = error_report(c_true, c_hat)
    assert report.e2 == pytest.approx(np.sqrt(0.02) / np.sqrt(5.0))
    assert report.e_inf == pytest.approx(0.1)
    assert report.tpr == 1.0
    assert report.ppv == pytest.approx(2 / 3)
    assert report.e_res is None
    assert report.e_dyn is None
    assert set(report.to_dict()) == {
        "e2",
        "e_inf",
        "tpr",
        "ppv",
        "e_res",
        "e_dyn",
    }

    missed = error_report(c_true, Coefficients([0.0, 1.0, 0.0, 0.0]))
    assert missed.tpr == 0.5
    assert missed.ppv == 1.0

    empty = error_report(c_true, Coefficients(np.zeros(4)))
    assert empty.ppv == 0.0
    assert empty.e2 == pytest.approx(1.0)

    with pytest.raises(UndefinedMetric):
        error_report(Coefficients(np.zeros(4)), c_hat)

    with pytest.raises(ValueError):
        error_report(c_true, Coefficients(np.zeros(3)))


def test_error_report_residual_and_dynamics():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(30, 3))
    c = np.array([1.0, 0.0, -1.0])
    report = error_report(Coefficients(c), Coefficients(c), w, w @ c)
    assert report.e_res == pytest.approx(0.0, abs=1e-12)

    # a system stacks one column of b per variable
    c2 = np.array([0.0, 2.0, 0.0])
    b = np.column_stack([w @ c, w @ c2])
    stacked = Coefficients(np.concatenate([c, c2]))
    report = error_report(stacked, stacked, w, b)
    assert report.e_res == pytest.approx(0.0, abs=1e-12)

    forward = np.ones((5, 2))
    clean = np.zeros((8, 2))
    report = error_report(
        Coefficients(c), Coefficients(c), dynamics=(forward, clean)
    )
    assert report.e_dyn == pytest.approx(1.0)

    with pytest.raises(UndefinedMetric):
        error_report(Coefficients(c), Coefficients(c), w, np.zeros(30))


def test_polynomial_rhs():
    dictionary = build_dictionary(2, 0, 0, 2)
    coefficients = [
        Coefficients([1.0, 0.0, 0.0, 0.0, 2.0, 0.0]),
        Coefficients([0.0, -1.0, 0.0, 0.0, 0.0, 3.0]),
    ]
    rhs = polynomial_rhs(dictionary, coefficients)
    assert np.allclose(rhs(0.0, np.array([2.0, 3.0])), [13.0, 25.0])


def test_forward_simulate(spiral_data):
    dictionary = build_dictionary(2, 0, 0, 5)
    trajectory = forward_simulate(
        dictionary, _spiral_coefficients(dictionary), spiral_data
    )
    assert trajectory.shape == (spiral_data.grid.nt, 2)
    clean = np.column_stack(spiral_data.values)
    assert np.max(np.abs(trajectory - clean)) < 1e-6


def test_forward_simulate_blowup():
    grid = GridSpec(nt=201, dt=0.01)
    t = grid.time_points()
    data = ObservationSet(grid, [np.exp(-t)], ["x"])
    dictionary = build_dictionary(1, 0, 0, 2)
    # x' = x^2 from x(0) = 1 blows up at t = 1
    coefficients = [Coefficients([0.0, 0.0, 1.0])]
    trajectory = forward_simulate(dictionary, coefficients, data)
    assert len(trajectory) < grid.nt
    assert len(trajectory) <= 101

    with pytest.raises(ValueError):
        forward_simulate(
            build_dictionary(1, 1, 0, 1),
            [Coefficients([0.0, 1.0])],
            ObservationSet(
                GridSpec(nt=4, dt=1.0, nx=(4,), dx=(1.0,)),
                [np.zeros((4, 4))],
            ),
        )


@pytest.mark.slow
def test_noise_error_matches_monte_carlo(advection_grid):
    grid = GridSpec(
        nt=61, dt=advection_grid.dt, nx=(64,), dx=advection_grid.dx
    )
    t = grid.time_points()[:, None]
    x = grid.space_points(0)[None, :]
    clean = ObservationSet(grid, [advection_diffusion_solution(t, x)])
    tf = TestFunction(
        AxisTestFunction(8, 6, grid.dt), (AxisTestFunction(10, 8, grid.dx[0]),)
    )
    centers = centers_from_counts(clean, tf, (4, 4))
    dictionary = build_dictionary(1, 1, 2, 1)
    true_model = Coefficients.from_terms(
        dictionary,
        [
            (FeatureSpec((1,), (1,)), -ADVECTION_SPEED),
            (FeatureSpec((2,), (1,)), DIFFUSIVITY),
        ],
    )
    estimate = noise_error_check(
        clean,
        true_model,
        tf,
        centers,
        sigma=1e-3,
        mc_trials=10_000,
        dictionary=dictionary,
        seed=11,
    )
    assert estimate.s_h_star.shape == (16,)
    assert np.all(estimate.s_h_star > 0)
    assert np.all(estimate.row_pass)
    assert np.all((estimate.ratio > 0.8) & (estimate.ratio < 1.2))
    assert estimate.bound_holds
    assert estimate.max_abs_error <= estimate.bound


def test_noise_error_without_noise(advection_grid):
    grid = GridSpec(
        nt=41, dt=advection_grid.dt, nx=(48,), dx=advection_grid.dx
    )
    t = grid.time_points()[:, None]
    x = grid.space_points(0)[None, :]
    clean = ObservationSet(grid, [advection_diffusion_solution(t, x)])
    tf = TestFunction(
        AxisTestFunction(6, 6, grid.dt), (AxisTestFunction(8, 8, grid.dx[0]),)
    )
    centers = centers_from_counts(clean, tf, (2, 2))
    dictionary = build_dictionary(1, 1, 2, 1)
    true_model = Coefficients.from_terms(
        dictionary, [(FeatureSpec((1,), (1,)), -ADVECTION_SPEED)]
    )
    estimate = noise_error_check(
        clean, true_model, tf, centers, 0.0, 3, dictionary
    )
    assert estimate.max_abs_error == 0.0
    assert estimate.bound_holds
    assert np.allclose(estimate.empirical_variance, 0.0)


@pytest.mark.slow
def test_noise_error_matches_monte_carlo_nonlinear():
    # u_t + u u_x + u_xxx = 0 with a single soliton of speed 1
    grid = GridSpec(nt=41, dt=0.05, nx=(64,), dx=(0.625,), x0=(-20.0,))
    t = grid.time_points()[:, None]
    x = grid.space_points(0)[None, :]
    u = 3.0 / np.cosh(0.5 * (x - t)) ** 2
    clean = ObservationSet(grid, [u], ["u"])
    tf = TestFunction(
        AxisTestFunction(6, 6, grid.dt), (AxisTestFunction(8, 8, grid.dx[0]),)
    )
    centers = centers_from_counts(clean, tf, (3, 4))
    dictionary = build_dictionary(1, 1, 3, 2)
    true_model = Coefficients.from_terms(
        dictionary,
        [
            (FeatureSpec((1,), (2,)), -0.5),
            (FeatureSpec((3,), (1,)), -1.0),
        ],
    )
    estimate = noise_error_check(
        clean,
        true_model,
        tf,
        centers,
        sigma=1e-3 * np.max(np.abs(u)),
        mc_trials=2000,
        dictionary=dictionary,
        seed=3,
        band=(0.7, 1.3),
    )
    assert estimate.s_h_star.shape == (12,)
    assert np.all(estimate.row_pass)
    assert np.all((estimate.ratio > 0.7) & (estimate.ratio < 1.3))

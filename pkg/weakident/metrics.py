import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from weakident.assembly import (
    Centers,
    assemble,
    axis_kernels,
    monomial,
    separable_kernel,
    windows,
)
from weakident.exceptions import UndefinedMetric
from weakident.models import Coefficients, Dictionary, ObservationSet
from weakident.test_functions import TestFunction
from weakident.types import Array

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

ODE_TOLERANCE = 1e-10
BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise at a noise-to-signal ratio.

    Args:
        sigma_nsr (float): Noise std relative to the midrange-centered RMS.
        seed (int): Generator seed.
    """

    sigma_nsr: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma_nsr < 0:
            raise ValueError(
                f"sigma_nsr must be non-negative: {self.sigma_nsr}"
            )


@dataclass
class ErrorReport:
    e2: float
    e_inf: float
    tpr: float
    ppv: float
    e_res: Optional[float] = None
    e_dyn: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "e2": self.e2,
            "e_inf": self.e_inf,
            "tpr": self.tpr,
            "ppv": self.ppv,
            "e_res": self.e_res,
            "e_dyn": self.e_dyn,
        }


@dataclass
class NoiseErrorEstimate:
    """Predicted and measured noise error per row.

    Attributes:
        s_bar_star: Largest weight any single noise value receives.
        s_h_star: Predicted variance of each row error divided by sigma^2.
        empirical_variance: Monte-Carlo variance of each row error.
        ratio: ``empirical_variance / (sigma^2 s_h_star)``.
        bound: Sup-norm bound on the row errors for the largest draw.
        max_abs_error: Largest row error seen over all draws.
        row_pass: Rows whose ratio lies inside the tolerance band.
        bound_holds: Whether every draw stayed under its bound.
    """

    s_bar_star: float
    s_h_star: Array
    empirical_variance: Array
    ratio: Array
    bound: float
    max_abs_error: float
    row_pass: Array
    bound_holds: bool


def noise_level(values: Array, sigma_nsr: float) -> float:
    midrange = (np.max(values) + np.min(values)) / 2
    return float(sigma_nsr * np.sqrt(np.mean((values - midrange) ** 2)))


def add_noise(clean: ObservationSet, spec: NoiseSpec) -> ObservationSet:
    """Add i.i.d. Gaussian noise scaled per variable."""
    if spec.sigma_nsr == 0:
        return clean
    rng = np.random.default_rng(spec.seed)
    noisy = []
    for name, values in zip(clean.names, clean.values):
        sigma = noise_level(values, spec.sigma_nsr)
        logger.debug(f"Noise std for {name}: {sigma:.4e}")
        noisy.append(values + rng.normal(0.0, sigma, size=values.shape))
    return clean.replace_values(noisy)


def error_report(
    c_true: Coefficients,
    c_hat: Coefficients,
    w: Optional[Array] = None,
    b: Optional[Array] = None,
    dynamics: Optional[Tuple[Array, Array]] = None,
) -> ErrorReport:
    """Compare identified coefficients with the true ones.

    Args:
        c_true (Coefficients): True coefficients. For a system of ``n``
            equations, the per-variable vectors stacked.
        c_hat (Coefficients): Identified coefficients, same layout.
        w (Array): Weak feature matrix for the residual error.
        b (Array): Right-hand side, ``(H,)`` or ``(H, n)`` for a system.
        dynamics (Tuple[Array, Array]): Forward-simulated and clean
            trajectories, compared over the shorter length.

    Raises:
        UndefinedMetric: ``c_true`` is zero.
    """
    true, found = c_true.values, c_hat.values
    if true.shape != found.shape:
        raise ValueError("coefficient vectors differ in length")
    true_norm = np.linalg.norm(true)
    if true_norm == 0:
        raise UndefinedMetric("E2")

    e2 = float(np.linalg.norm(true - found) / true_norm)
    nonzero = true != 0
    relative = np.abs(true - found)[nonzero] / np.abs(true[nonzero])
    e_inf = float(np.max(relative))
    true_support = set(np.flatnonzero(true))
    found_support = set(np.flatnonzero(found))
    hits = len(true_support & found_support)
    tpr = hits / len(true_support)
    ppv = hits / len(found_support) if found_support else 0.0

    e_res = None
    if w is not None and b is not None:
        rhs = np.asarray(b, dtype=float)
        rhs = rhs.reshape(rhs.shape[0], -1)
        columns = found.reshape(rhs.shape[1], w.shape[1]).T
        b_norm = np.linalg.norm(rhs)
        if b_norm == 0:
            raise UndefinedMetric("E_res")
        e_res = float(np.linalg.norm(w @ columns - rhs) / b_norm)

    e_dyn = None
    if dynamics is not None:
        forward, clean = (np.asarray(a, dtype=float) for a in dynamics)
        n = min(len(forward), len(clean))
        e_dyn = float(np.mean((forward[:n] - clean[:n]) ** 2))

    return ErrorReport(e2, e_inf, float(tpr), float(ppv), e_res, e_dyn)


def polynomial_rhs(
    dictionary: Dictionary, coefficients: Sequence[Coefficients]
):
    """Right-hand side ``f(t, y)`` of an ODE system over a dictionary."""
    betas = np.array([f.beta for f in dictionary], dtype=float)
    matrix = np.stack([c.values for c in coefficients])

    def rhs(t, y):
        return matrix @ np.prod(y[None, :] ** betas, axis=1)

    return rhs


def _blowup_event(threshold: float):
    def event(t, y):
        return np.linalg.norm(y, ord=np.inf) - threshold

    event.terminal = True
    event.direction = 0
    return event


def forward_simulate(
    dictionary: Dictionary,
    coefficients: Sequence[Coefficients],
    clean: ObservationSet,
    tolerance: float = ODE_TOLERANCE,
) -> Array:
    """Integrate an identified ODE from the clean initial state.

    The trajectory stops at the last sample before any state exceeds
    ``1e6`` times the largest clean magnitude.

    Returns:
        Array: ``(samples, num_vars)``, possibly shorter than the grid.
    """
    if clean.spatial_dims:
        raise ValueError("forward simulation applies to ODE data only")
    clean_states = np.column_stack(clean.values)
    times = clean.grid.time_points()
    threshold = BLOWUP_FACTOR * float(np.max(np.abs(clean_states)))
    sol = solve_ivp(
        polynomial_rhs(dictionary, coefficients),
        (times[0], times[-1]),
        clean_states[0],
        method="RK45",
        t_eval=times,
        rtol=tolerance,
        atol=tolerance,
        events=_blowup_event(threshold),
    )
    trajectory = sol.y.T
    if len(trajectory) < len(times):
        logger.warning(
            f"Identified system diverged after {len(trajectory)} of"
            f" {len(times)} samples"
        )
    return trajectory


def _noise_weights(
    clean: ObservationSet,
    dictionary: Dictionary,
    true_model: Coefficients,
    tf: TestFunction,
    centers: Centers,
    variable: int,
) -> Array:
    """Weight of each noise value in each row error, ``(vars, H, *window)``.

    Linearizing the row residual in the noise gives
    ``e_h = sum_j g_j eps_j dV`` with
    ``g = sum_l (-1)^|alpha| c_l d f_l / d u ∂^alpha phi + ∂_t phi``.
    """
    spatial_dims = clean.spatial_dims
    weights = []
    for noisy in range(clean.num_vars):
        g = 0.0
        for index in true_model.support:
            feature = dictionary[index]
            power = feature.beta[noisy]
            if power == 0:
                continue
            lowered = list(feature.beta)
            lowered[noisy] -= 1
            derivative = power * monomial(clean.values, lowered)
            kernel = separable_kernel(axis_kernels(tf, feature.alpha))
            g = g + (
                (-1) ** feature.order
                * true_model.values[index]
                * windows(derivative, tf, centers)
                * kernel
            )
        if noisy == variable:
            time_kernel = separable_kernel(
                axis_kernels(tf, (0,) * spatial_dims, 1)
            )
            g = g + time_kernel
        shape = (len(centers),) + tuple(f.width for f in tf.array_axes)
        weights.append(np.broadcast_to(g, shape))
    return np.stack(weights)


def noise_error_check(
    clean: ObservationSet,
    true_model: Coefficients,
    tf: TestFunction,
    centers: Centers,
    sigma: float,
    mc_trials: int,
    dictionary: Dictionary,
    variable: int = 0,
    seed: int = 0,
    band: Tuple[float, float] = (0.8, 1.2),
    slack: float = 0.1,
) -> NoiseErrorEstimate:
    """Compare the predicted noise error of the true model with Monte-Carlo.

    Args:
        clean (ObservationSet): Noise-free data.
        true_model (Coefficients): True coefficients of ``variable``.
        sigma (float): Absolute noise std added to every variable.
        mc_trials (int): Number of noise draws.
        dictionary (Dictionary): Dictionary the coefficients refer to.
        band (Tuple[float, float]): Accepted range of the variance ratio.
        slack (float): Relative allowance on the sup bound for terms of
            second order in the noise.
    """
    cell = clean.grid.cell_volume
    g = _noise_weights(clean, dictionary, true_model, tf, centers, variable)
    rows = len(centers)
    flat = g.reshape(g.shape[0], rows, -1)
    s_h_star = cell**2 * np.sum(flat**2, axis=(0, 2))
    s_bar_star = float(np.max(np.sum(np.abs(flat), axis=0)))
    region_volume = tf.window_points * cell

    support = list(true_model.support)
    c = true_model.values

    def _row_residual(data):
        system = assemble(data, dictionary, tf, centers, columns=support)
        return system.w @ c - system.b[:, variable]

    reference = _row_residual(clean)
    rng = np.random.default_rng(seed)
    mean = np.zeros(rows)
    second = np.zeros(rows)
    max_error, bound, holds = 0.0, 0.0, True
    for trial in range(1, mc_trials + 1):
        noise = [rng.normal(0.0, sigma, size=v.shape) for v in clean.values]
        noisy = clean.replace_values(
            [v + e for v, e in zip(clean.values, noise)]
        )
        error = _row_residual(noisy) - reference
        # Welford update
        delta = error - mean
        mean += delta / trial
        second += delta * (error - mean)

        eps = max(float(np.max(np.abs(e))) for e in noise) if sigma else 0.0
        trial_bound = s_bar_star * region_volume * eps * (1 + slack)
        trial_max = float(np.max(np.abs(error)))
        max_error = max(max_error, trial_max)
        bound = max(bound, trial_bound)
        if trial_max > trial_bound and trial_max > 0:
            holds = False

    empirical = second / max(mc_trials - 1, 1)
    predicted = sigma**2 * s_h_star
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(predicted > 0, empirical / predicted, np.nan)
    row_pass = (ratio >= band[0]) & (ratio <= band[1])
    logger.info(
        "Noise error check: median ratio"
        f" {np.nanmedian(ratio) if sigma else 0:.3f},"
        f" bound {'held' if holds else 'violated'}"
    )
    return NoiseErrorEstimate(
        s_bar_star,
        s_h_star,
        empirical,
        ratio,
        bound,
        max_error,
        row_pass,
        holds,
    )

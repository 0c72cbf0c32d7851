import logging
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.fft
from scipy.integrate import solve_ivp

from weakident.config import RunConfig
from weakident.exceptions import SimulationError
from weakident.metrics import (
    ErrorReport,
    NoiseSpec,
    add_noise,
    error_report,
    forward_simulate,
    polynomial_rhs,
)
from weakident.models import ObservationSet, stack_coefficients
from weakident.regression import IdentResult, weak_ident
from weakident.suite.models import SystemDefinition
from weakident.types import Array

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

CONTOUR_POINTS = 32
BLOWUP_FACTOR = 1e6


class EtdCoefficients(NamedTuple):
    e: Array
    e2: Array
    q: Array
    f1: Array
    f2: Array
    f3: Array


def wavenumbers(n: int, spacing: float, real: bool = True) -> Array:
    """Angular wavenumbers of an ``n``-point periodic grid."""
    frequencies = (
        scipy.fft.rfftfreq(n, d=spacing)
        if real
        else scipy.fft.fftfreq(n, d=spacing)
    )
    return 2 * np.pi * frequencies


def etdrk4_coefficients(
    linear: Array, h: float, contour_points: int = CONTOUR_POINTS
) -> EtdCoefficients:
    """Fourth-order exponential time differencing coefficients.

    The phi-functions are averaged over a circle of radius 1 around each
    ``h L`` to avoid cancellation near zero.
    """
    points = np.arange(1, contour_points + 1)
    roots = np.exp(1j * np.pi * (points - 0.5) / contour_points)
    lr = h * linear[:, None] + roots[None, :]
    q = h * np.mean((np.exp(lr / 2) - 1) / lr, axis=1)
    f1 = h * np.mean(
        (-4 - lr + np.exp(lr) * (4 - 3 * lr + lr**2)) / lr**3, axis=1
    )
    f2 = h * np.mean((2 + lr + np.exp(lr) * (-2 + lr)) / lr**3, axis=1)
    f3 = h * np.mean(
        (-4 - 3 * lr - lr**2 + np.exp(lr) * (4 - lr)) / lr**3, axis=1
    )
    if np.isrealobj(linear):
        q, f1, f2, f3 = (c.real for c in (q, f1, f2, f3))
    return EtdCoefficients(
        np.exp(h * linear), np.exp(h * linear / 2), q, f1, f2, f3
    )


def etdrk4_step(
    v: Array, nonlinear: Callable[[Array], Array], c: EtdCoefficients
) -> Array:
    nv = nonlinear(v)
    a = c.e2 * v + c.q * nv
    na = nonlinear(a)
    b = c.e2 * v + c.q * na
    nb = nonlinear(b)
    d = c.e2 * a + c.q * (2 * nb - nv)
    nd = nonlinear(d)
    return c.e * v + nv * c.f1 + 2 * (na + nb) * c.f2 + nd * c.f3


def simulate_ode(
    definition: SystemDefinition, tolerance: float = 1e-10
) -> ObservationSet:
    """Integrate an ODE benchmark with adaptive RK45 on its sample grid.

    Raises:
        SimulationError: The integrator stopped early.
    """
    if definition.spatial_dims:
        raise ValueError(f"{definition.name} is not an ODE system")
    dictionary = definition.dictionary()
    rhs = polynomial_rhs(dictionary, definition.true_coefficients(dictionary))
    grid = definition.grid
    times = grid.time_points()
    state = np.concatenate(definition.initial_condition(grid))
    sol = solve_ivp(
        rhs,
        (times[0], times[-1]),
        state,
        method="RK45",
        t_eval=times,
        rtol=tolerance,
        atol=tolerance,
    )
    if sol.status != 0 or sol.y.shape[1] != len(times):
        raise SimulationError(definition.name, sol.message)
    logger.info(f"Simulated {definition.name} over {len(times)} samples")
    return ObservationSet(grid, list(sol.y), definition.names)


def _scalar_operators(definition: SystemDefinition, k: Array, n: int):
    """Linear Fourier symbol and nonlinear term of a scalar 1D PDE."""
    linear = np.zeros_like(k, dtype=complex)
    nonlinear_terms = []
    for feature, value in definition.terms[0]:
        symbol = value * (1j * k) ** feature.alpha[0]
        if feature.beta == (1,):
            linear = linear + symbol
        else:
            nonlinear_terms.append((feature.beta[0], symbol))
    if np.allclose(linear.imag, 0):
        linear = linear.real

    def nonlinear(v_hat: Array) -> Array:
        u = scipy.fft.irfft(v_hat, n=n)
        out = np.zeros_like(v_hat, dtype=complex)
        for power, symbol in nonlinear_terms:
            out += symbol * scipy.fft.rfft(u**power)
        return out

    return linear, nonlinear, bool(nonlinear_terms)


def _check_bounded(name: str, field: Array, limit: float, step: int):
    if not np.all(np.isfinite(field)) or np.max(np.abs(field)) > limit:
        raise SimulationError(name, f"solution blew up at sample {step}")


def _simulate_scalar(definition: SystemDefinition, u0: Array) -> Array:
    grid = definition.grid
    n = len(u0)
    k = wavenumbers(n, grid.dx[0])
    linear, nonlinear, has_nonlinear = _scalar_operators(definition, k, n)
    v = scipy.fft.rfft(u0)
    limit = BLOWUP_FACTOR * max(float(np.max(np.abs(u0))), 1.0)
    samples = [u0]

    if not has_nonlinear:
        # exact integrating factor
        for step in range(1, grid.nt):
            samples.append(
                scipy.fft.irfft(np.exp(linear * step * grid.dt) * v, n=n)
            )
        return np.array(samples)

    h = grid.dt / definition.substeps
    coefficients = etdrk4_coefficients(linear, h)
    for step in range(1, grid.nt):
        for _ in range(definition.substeps):
            v = etdrk4_step(v, nonlinear, coefficients)
        u = scipy.fft.irfft(v, n=n)
        _check_bounded(definition.name, u, limit, step)
        samples.append(u)
    return np.array(samples)


def _simulate_nls(definition: SystemDefinition, u0: Array, v0: Array):
    """Integrate the real pair through ``psi = u + i v``.

    ``psi_t = -i a psi_xx - i c |psi|^2 psi`` with dispersion ``a`` and
    cubic coefficient ``c``.
    """
    grid = definition.grid
    n = len(u0)
    k = wavenumbers(n, grid.dx[0], real=False)
    a = definition.params["dispersion"]
    c = definition.params["cubic"]
    linear = 1j * a * k**2

    def nonlinear(psi_hat: Array) -> Array:
        psi = scipy.fft.ifft(psi_hat)
        return -1j * c * scipy.fft.fft(np.abs(psi) ** 2 * psi)

    psi0 = u0 + 1j * v0
    psi_hat = scipy.fft.fft(psi0)
    coefficients = etdrk4_coefficients(linear, grid.dt / definition.substeps)
    limit = BLOWUP_FACTOR * float(np.max(np.abs(psi0)))
    samples = [psi0]
    for step in range(1, grid.nt):
        for _ in range(definition.substeps):
            psi_hat = etdrk4_step(psi_hat, nonlinear, coefficients)
        psi = scipy.fft.ifft(psi_hat)
        _check_bounded(definition.name, psi, limit, step)
        samples.append(psi)
    samples = np.array(samples)
    return samples.real, samples.imag


def simulate_pde_1d(definition: SystemDefinition) -> ObservationSet:
    """Pseudospectral simulation of a periodic 1D benchmark.

    Linear-only equations use the exact integrating factor, others use
    ETDRK4 with ``definition.substeps`` steps per sample.

    Raises:
        SimulationError: The solution became non-finite or blew up.
    """
    if definition.spatial_dims != 1:
        raise ValueError(f"{definition.name} is not a 1D PDE system")
    grid = definition.grid
    initial = definition.initial_condition(grid)
    if definition.periodic_endpoint:
        initial = [u[:-1] for u in initial]

    if definition.scheme == "nls":
        fields = list(_simulate_nls(definition, *initial))
    elif definition.scheme == "spectral" and definition.num_vars == 1:
        fields = [_simulate_scalar(definition, initial[0])]
    else:
        raise SimulationError(
            definition.name, f"no 1D scheme {definition.scheme!r}"
        )

    if definition.periodic_endpoint:
        fields = [np.concatenate([f, f[:, :1]], axis=1) for f in fields]
    logger.info(
        f"Simulated {definition.name} on a {grid.nt} x {grid.nx[0]} grid"
    )
    return ObservationSet(grid, fields, definition.names)


def simulate(
    definition: SystemDefinition, tolerance: Optional[float] = None
) -> ObservationSet:
    if definition.kind == "ode":
        return simulate_ode(definition, tolerance or 1e-10)
    return simulate_pde_1d(definition)


def evaluate_identification(
    result: IdentResult,
    definition: SystemDefinition,
    clean: Optional[ObservationSet] = None,
) -> ErrorReport:
    """Score an identification against the true equations of a benchmark.

    The dynamic error is added for ODE systems when ``clean`` is given.
    """
    truth = stack_coefficients(definition.true_coefficients(result.dictionary))
    found = stack_coefficients(result.coefficients)
    dynamics = None
    if clean is not None and definition.kind == "ode":
        forward = forward_simulate(
            result.dictionary, result.coefficients, clean
        )
        dynamics = (forward, np.column_stack(clean.values))
    return error_report(
        truth, found, result.system.w, result.system.b, dynamics
    )


def run_case(
    definition: SystemDefinition,
    clean: ObservationSet,
    sigma_nsr: float,
    seed: int,
    config: Optional[RunConfig] = None,
) -> ErrorReport:
    """Add noise to clean benchmark data, identify and score the result."""
    noisy = add_noise(clean, NoiseSpec(sigma_nsr, seed))
    config = (config or RunConfig()).replace(seed=seed)
    result = weak_ident(noisy, config, system_name=definition.name)
    return evaluate_identification(result, definition, clean)

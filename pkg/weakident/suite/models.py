# Benchmark systems with known governing equations
# Simulators are available in weakident.suite.utils
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from weakident.exceptions import UnknownSystem
from weakident.models import (
    Coefficients,
    Dictionary,
    FeatureSpec,
    GridSpec,
    build_dictionary,
)
from weakident.types import Array, TermList

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


@dataclass(frozen=True)
class SystemDefinition:
    """A benchmark system with its true equations and sampling grid.

    Args:
        name (str): Registry key.
        names (Tuple[str, ...]): Variable names.
        terms (Tuple[TermList, ...]): ``(FeatureSpec, value)`` pairs of the
            right-hand side of every variable.
        grid (GridSpec): Sampling grid.
        initial_condition (Callable): Maps the grid to one array per
            variable at the first time sample.
        alpha_cap (int): Derivative cap of the benchmark dictionary.
        beta_cap (int): Degree cap of the benchmark dictionary.
        scheme (str): ``rk45``, ``spectral`` or ``nls``.
        substeps (int): Solver steps per sample for spectral schemes.
        periodic_endpoint (bool): The last grid point repeats the first.
    """

    name: str
    names: Tuple[str, ...]
    terms: Tuple[TermList, ...]
    grid: GridSpec
    initial_condition: Callable[[GridSpec], List[Array]]
    alpha_cap: int
    beta_cap: int
    scheme: str = "rk45"
    substeps: int = 1
    periodic_endpoint: bool = False
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def spatial_dims(self) -> int:
        return self.grid.spatial_dims

    @property
    def kind(self) -> str:
        return "pde" if self.spatial_dims else "ode"

    def dictionary(self) -> Dictionary:
        return build_dictionary(
            self.num_vars, self.spatial_dims, self.alpha_cap, self.beta_cap
        )

    def true_coefficients(
        self, dictionary: Dictionary = None
    ) -> List[Coefficients]:
        dictionary = dictionary or self.dictionary()
        return [Coefficients.from_terms(dictionary, t) for t in self.terms]


def _pde(alpha: int, beta: Sequence[int], value: float):
    return (FeatureSpec((alpha,), tuple(beta)), value)


def _ode(beta: Sequence[int], value: float):
    return (FeatureSpec((), tuple(beta)), value)


def _transport_ic(grid: GridSpec) -> List[Array]:
    x = grid.space_points(0)
    u = np.where(
        x < 0.7,
        np.sin(4 * np.pi * x / 0.7) ** 3 * np.cos(np.pi * x / 0.7),
        0.0,
    )
    return [u]


def _sech(x: Array) -> Array:
    return 1.0 / np.cosh(x)


def _kdv_ic(grid: GridSpec) -> List[Array]:
    x = grid.space_points(0)
    a, b = 25.0, 16.0
    u = 3 * a**2 * _sech(0.5 * a * (x + 2)) ** 2
    u += 3 * b**2 * _sech(0.5 * b * (x + 1)) ** 2
    return [u]


def _ks_ic(grid: GridSpec) -> List[Array]:
    x = grid.space_points(0)
    return [np.cos(x / 16) * (1 + np.sin(x / 16))]


def _nls_ic(grid: GridSpec) -> List[Array]:
    x = grid.space_points(0)
    return [2 * _sech(x), np.zeros_like(x)]


def _constant_ic(*state: float):
    def initial_condition(grid: GridSpec) -> List[Array]:
        return [np.array([s], dtype=float) for s in state]

    return initial_condition


def _ode_grid(dt: float, end: float) -> GridSpec:
    return GridSpec(nt=int(round(end / dt)) + 1, dt=dt)


system_definitions: Dict[str, SystemDefinition] = {
    "transport": SystemDefinition(
        name="transport",
        names=("u",),
        terms=([_pde(1, (1,), -1.0), _pde(2, (1,), 0.05)],),
        grid=GridSpec(nt=300, dt=0.001, nx=(257,), dx=(1 / 256,), x0=(0.0,)),
        initial_condition=_transport_ic,
        alpha_cap=6,
        beta_cap=6,
        scheme="spectral",
        periodic_endpoint=True,
    ),
    "kdv": SystemDefinition(
        name="kdv",
        names=("u",),
        terms=([_pde(1, (2,), -0.5), _pde(3, (1,), -1.0)],),
        grid=GridSpec(
            nt=601, dt=1e-5, nx=(400,), dx=(2 * np.pi / 400,), x0=(-np.pi,)
        ),
        initial_condition=_kdv_ic,
        alpha_cap=6,
        beta_cap=6,
        scheme="spectral",
        substeps=10,
    ),
    "ks": SystemDefinition(
        name="ks",
        names=("u",),
        terms=(
            [
                _pde(1, (2,), -0.5),
                _pde(2, (1,), -1.0),
                _pde(4, (1,), -1.0),
            ],
        ),
        grid=GridSpec(
            nt=301, dt=0.5, nx=(256,), dx=(32 * np.pi / 256,), x0=(0.0,)
        ),
        initial_condition=_ks_ic,
        alpha_cap=6,
        beta_cap=6,
        scheme="spectral",
        substeps=2,
    ),
    "nls": SystemDefinition(
        name="nls",
        names=("u", "v"),
        terms=(
            [_pde(2, (0, 1), 0.5), _pde(0, (2, 1), 1.0), _pde(0, (0, 3), 1.0)],
            [
                _pde(2, (1, 0), -0.5),
                _pde(0, (1, 2), -1.0),
                _pde(0, (3, 0), -1.0),
            ],
        ),
        grid=GridSpec(
            nt=251, dt=np.pi / 250, nx=(256,), dx=(10 / 256,), x0=(-5.0,)
        ),
        initial_condition=_nls_ic,
        alpha_cap=6,
        beta_cap=6,
        scheme="nls",
        substeps=10,
        params={"dispersion": 0.5, "cubic": 1.0},
    ),
    "linear2d": SystemDefinition(
        name="linear2d",
        names=("x", "y"),
        terms=(
            [_ode((1, 0), -0.15), _ode((0, 1), 2.5)],
            [_ode((1, 0), -2.5), _ode((0, 1), -0.15)],
        ),
        grid=_ode_grid(0.01, 10.0),
        initial_condition=_constant_ic(2.0, 50.0),
        alpha_cap=0,
        beta_cap=5,
    ),
    "vanderpol": SystemDefinition(
        name="vanderpol",
        names=("x", "y"),
        terms=(
            [_ode((0, 1), 1.0)],
            [_ode((1, 0), -1.0), _ode((0, 1), 4.0), _ode((2, 1), -4.0)],
        ),
        grid=_ode_grid(0.001, 15.0),
        initial_condition=_constant_ic(0.0, 1.0),
        alpha_cap=0,
        beta_cap=5,
    ),
    "duffing": SystemDefinition(
        name="duffing",
        names=("x", "y"),
        terms=(
            [_ode((0, 1), 1.0)],
            [_ode((1, 0), -0.2), _ode((0, 1), -0.05), _ode((3, 0), -1.0)],
        ),
        grid=_ode_grid(0.01, 10.0),
        initial_condition=_constant_ic(0.0, 2.0),
        alpha_cap=0,
        beta_cap=5,
    ),
    "lotka_volterra": SystemDefinition(
        name="lotka_volterra",
        names=("x", "y"),
        terms=(
            [_ode((1, 0), 0.67), _ode((1, 1), -1.33)],
            [_ode((0, 1), -1.0), _ode((1, 1), 1.0)],
        ),
        grid=_ode_grid(0.05, 50.0),
        initial_condition=_constant_ic(10.0, 10.0),
        alpha_cap=0,
        beta_cap=5,
    ),
    "lorenz": SystemDefinition(
        name="lorenz",
        names=("x", "y", "z"),
        terms=(
            [_ode((1, 0, 0), -10.2), _ode((0, 1, 0), 10.2)],
            [
                _ode((1, 0, 0), 29.0),
                _ode((0, 1, 0), -1.0),
                _ode((1, 0, 1), -1.0),
            ],
            [_ode((0, 0, 1), -2.0), _ode((1, 1, 0), 1.0)],
        ),
        grid=_ode_grid(0.001, 15.0),
        initial_condition=_constant_ic(-8.0, 7.0, 10.0),
        alpha_cap=0,
        beta_cap=3,
    ),
}

available_systems = list(system_definitions.keys())


def get_system(name: str) -> SystemDefinition:
    try:
        return system_definitions[name]
    except KeyError:
        raise UnknownSystem(name, available_systems) from None

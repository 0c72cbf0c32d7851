import logging
import itertools
import json
from pathlib import Path
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from weakident.constants import default_variable_names, spatial_axis_names
from weakident.exceptions import (
    FeatureNotFound,
    InvalidGrid,
    UnsupportedDimension,
)
from weakident.types import Array, DatasetPath, MultiIndex

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

dictionary_rules = ("per_axis", "no_cross", "explicit")


class ResultEncoder(json.JSONEncoder):
    """Extension of ``json.JSONEncoder`` for numpy values and paths."""

    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, Path):
            return str(obj)
        return super().default(obj)


def array_axis(spatial_axis: int, spatial_dims: int) -> int:
    """Map a spatial axis (0 = x, 1 = y) to its position in a data array.

    Arrays store time first and x last, so ``(nt, nx)`` or ``(nt, ny, nx)``.
    """
    return spatial_dims - spatial_axis


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid.

    Args:
        nt (int): Number of time samples.
        dt (float): Time spacing.
        nx (Tuple[int, ...]): Points per spatial axis, x first.
        dx (Tuple[float, ...]): Spacing per spatial axis, x first.
        t0 (float): First time sample.
        x0 (Tuple[float, ...]): Origin per spatial axis.

    Raises:
        UnsupportedDimension: More than two spatial axes.
        InvalidGrid: Non-positive counts or spacings.
    """

    nt: int
    dt: float
    nx: Tuple[int, ...] = ()
    dx: Tuple[float, ...] = ()
    t0: float = 0.0
    x0: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nx", tuple(int(n) for n in self.nx))
        object.__setattr__(self, "dx", tuple(float(d) for d in self.dx))
        if not self.x0:
            object.__setattr__(self, "x0", (0.0,) * len(self.nx))
        object.__setattr__(self, "x0", tuple(float(x) for x in self.x0))
        if len(self.nx) > 2:
            raise UnsupportedDimension(len(self.nx))
        if len(self.dx) != len(self.nx) or len(self.x0) != len(self.nx):
            raise InvalidGrid("nx, dx and x0 must have the same length")
        if self.nt < 3 or any(n < 3 for n in self.nx):
            raise InvalidGrid(f"counts must be at least 3, got {self.shape}")
        if not self.dt > 0 or any(not d > 0 for d in self.dx):
            raise InvalidGrid("spacings must be positive")

    @property
    def spatial_dims(self) -> int:
        return len(self.nx)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.nt,) + tuple(reversed(self.nx))

    @property
    def cell_volume(self) -> float:
        return float(self.dt * np.prod(self.dx))

    @property
    def axis_names(self) -> Tuple[str, ...]:
        """Axis names in array order, e.g. ``("t", "y", "x")``."""
        spatial = spatial_axis_names[: self.spatial_dims]
        return ("t",) + tuple(reversed(spatial))

    @property
    def spacings(self) -> Tuple[float, ...]:
        """Spacings in array order."""
        return (self.dt,) + tuple(reversed(self.dx))

    def time_points(self) -> Array:
        return self.t0 + self.dt * np.arange(self.nt)

    def space_points(self, axis: int) -> Array:
        return self.x0[axis] + self.dx[axis] * np.arange(self.nx[axis])


@dataclass(frozen=True)
class FeatureSpec:
    """A weak feature ``∂^alpha (u_1^beta_1 ... u_n^beta_n)``."""

    alpha: MultiIndex
    beta: MultiIndex

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(int(b) for b in self.beta))
        if any(a < 0 for a in self.alpha) or any(b < 0 for b in self.beta):
            raise ValueError(f"negative exponent in {self}")

    @property
    def degree(self) -> int:
        return sum(self.beta)

    @property
    def order(self) -> int:
        return sum(self.alpha)

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def _monomial(self, names: Sequence[str]) -> str:
        parts = []
        for name, power in zip(names, self.beta):
            if power == 1:
                parts.append(name)
            elif power > 1:
                parts.append(f"{name}^{power}")
        return "".join(parts) if parts else "1"

    def _subscript(self) -> str:
        return "".join(
            axis * a for axis, a in zip(spatial_axis_names, self.alpha)
        )

    def label(self, names: Sequence[str], braces: bool = False) -> str:
        """Readable label such as ``u_xx``, ``(u^2)_x`` or ``uv``.

        Args:
            names (Sequence[str]): Variable names.
            braces (bool): Wrap derivative subscripts as ``u_{xx}``.
        """
        monomial = self._monomial(names)
        subscript = self._subscript()
        if not subscript:
            return monomial
        if braces:
            subscript = "{" + subscript + "}"
        if self.degree == 1 and len(monomial) == 1:
            return f"{monomial}_{subscript}"
        return f"({monomial})_{subscript}"


def _monomial_exponents(num_vars: int, degree: int) -> Iterable[MultiIndex]:
    """All exponent tuples of a given total degree, first variable
    with the largest power first."""
    exponents = [
        beta
        for beta in itertools.product(range(degree + 1), repeat=num_vars)
        if sum(beta) == degree
    ]
    return sorted(exponents, reverse=True)


def _derivative_orders(
    spatial_dims: int, alpha_cap: int, rule: str
) -> Iterable[MultiIndex]:
    if spatial_dims == 0:
        return [()]
    if spatial_dims == 1:
        return [(a,) for a in range(alpha_cap + 1)]
    if rule == "no_cross":
        orders = [(0, 0)]
        for a in range(1, alpha_cap + 1):
            orders.extend([(a, 0), (0, a)])
        return orders
    # per_axis: each component capped at alpha_cap - 1 in 2D
    cap = max(alpha_cap - 1, 0)
    return list(itertools.product(range(cap + 1), repeat=2))


@dataclass(frozen=True)
class Dictionary:
    """Ordered feature list with its generation parameters.

    The first entry is always the constant feature.
    """

    features: Tuple[FeatureSpec, ...]
    num_vars: int
    spatial_dims: int
    alpha_cap: int
    beta_cap: int
    rule: str = "per_axis"

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, index: int) -> FeatureSpec:
        return self.features[index]

    @cached_property
    def _index(self) -> Dict[FeatureSpec, int]:
        return {feature: i for i, feature in enumerate(self.features)}

    @property
    def max_derivative(self) -> Tuple[int, ...]:
        """Largest derivative order per spatial axis."""
        return tuple(
            max((f.alpha[a] for f in self.features), default=0)
            for a in range(self.spatial_dims)
        )

    def labels(self, names: Sequence[str], braces: bool = False):
        return [f.label(names, braces=braces) for f in self.features]

    def index_of_label(self, label: str, names: Sequence[str]) -> int:
        for i, candidate in enumerate(self.labels(names)):
            if candidate == label:
                return i
        raise FeatureNotFound(label)


def build_dictionary(
    num_vars: int,
    spatial_dims: int,
    alpha_cap: int,
    beta_cap: int,
    rule: str = "per_axis",
    features: Optional[Sequence[FeatureSpec]] = None,
) -> Dictionary:
    """Enumerate the candidate features.

    Features are ordered by total degree, then by exponent tuple in
    descending order (``u^2`` before ``uv`` before ``v^2``), then by
    derivative order ascending. With ``rule="explicit"`` the given
    ``features`` are used as they are, after the constant feature.

    Args:
        num_vars (int): Number of state variables.
        spatial_dims (int): 0, 1 or 2.
        alpha_cap (int): Largest derivative order.
        beta_cap (int): Largest monomial degree.
        rule (str): One of ``per_axis``, ``no_cross`` or ``explicit``.
        features (Sequence[FeatureSpec]): Feature list for ``explicit``.

    Returns:
        Dictionary: The ordered dictionary.
    """
    if spatial_dims not in (0, 1, 2):
        raise UnsupportedDimension(spatial_dims)
    if rule not in dictionary_rules:
        raise ValueError(f"rule must be one of {dictionary_rules}")
    if num_vars < 1 or alpha_cap < 0 or beta_cap < 0:
        raise ValueError("num_vars must be positive and caps non-negative")

    constant = FeatureSpec((0,) * spatial_dims, (0,) * num_vars)
    if rule == "explicit":
        if not features:
            raise ValueError("explicit dictionaries need a feature list")
        entries = [constant] + [f for f in features if f != constant]
        for f in entries:
            if len(f.alpha) != spatial_dims or len(f.beta) != num_vars:
                raise ValueError(f"{f} does not match the dimensions")
        if len(set(entries)) != len(entries):
            raise ValueError("duplicate features in explicit dictionary")
        return Dictionary(
            tuple(entries), num_vars, spatial_dims, alpha_cap, beta_cap, rule
        )

    entries = [constant]
    orders = _derivative_orders(spatial_dims, alpha_cap, rule)
    for degree in range(1, beta_cap + 1):
        for beta in _monomial_exponents(num_vars, degree):
            for alpha in orders:
                entries.append(FeatureSpec(alpha, beta))
    logger.debug(f"Built {rule} dictionary with {len(entries)} features")
    return Dictionary(
        tuple(entries), num_vars, spatial_dims, alpha_cap, beta_cap, rule
    )


def feature_order_lookup(dictionary: Dictionary, feature: FeatureSpec) -> int:
    """Return the position of ``feature`` in ``dictionary``.

    Raises:
        FeatureNotFound: The feature is not in the dictionary.
    """
    try:
        return dictionary._index[feature]
    except KeyError:
        raise FeatureNotFound(feature) from None


@dataclass(frozen=True)
class Coefficients:
    """Coefficient vector over a dictionary."""

    values: Array

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.values))

    @classmethod
    def from_terms(cls, dictionary: Dictionary, terms) -> "Coefficients":
        """Build from ``(FeatureSpec, value)`` pairs."""
        values = np.zeros(len(dictionary))
        for feature, value in terms:
            values[feature_order_lookup(dictionary, feature)] = value
        return cls(values)

    def as_dict(
        self, dictionary: Dictionary, names: Sequence[str]
    ) -> Dict[str, float]:
        labels = dictionary.labels(names)
        return {labels[i]: float(self.values[i]) for i in self.support}


def stack_coefficients(coefficients: Sequence[Coefficients]) -> Coefficients:
    """Concatenate per-variable coefficients into one system vector."""
    return Coefficients(np.concatenate([c.values for c in coefficients]))


def format_equation(
    name: str,
    coefficients: Coefficients,
    dictionary: Dictionary,
    names: Sequence[str],
) -> str:
    labels = dictionary.labels(names, braces=True)
    terms = []
    for i in coefficients.support:
        value = coefficients.values[i]
        sign = "-" if value < 0 else "+"
        term = f"{abs(value):.5g}"
        if not dictionary[i].is_constant:
            term = f"{term} {labels[i]}"
        terms.append((sign, term))
    if not terms:
        return f"{name}_t = 0"
    first_sign, first = terms[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, term in terms[1:]:
        text += f" {sign} {term}"
    return f"{name}_t = {text}"


class ObservationSet:
    """Gridded observations of one or more state variables.

    Args:
        grid (GridSpec): The sampling grid.
        values (Sequence[Array]): One array per variable, shaped
            ``grid.shape``.
        names (Sequence[str]): Variable names. Defaults to ``u, v, w`` for
            spatial data and ``x, y, z`` for ODE data.
        path (DatasetPath): A WIDENT1 header to read instead.

    Raises:
        TypeError: If both ``values`` and ``path`` are passed.
        InvalidGrid: Shape mismatch or non-finite values.
    """

    __slots__ = "__dict__"

    def __init__(
        self,
        grid: Optional[GridSpec] = None,
        values: Optional[Sequence[Array]] = None,
        names: Optional[Sequence[str]] = None,
        path: Optional[DatasetPath] = None,
    ) -> None:
        if values is not None and path is not None:
            raise TypeError(
                "ObservationSet() takes either a path or values but not both"
            )
        if path is not None:
            loaded = self.load(path)
            grid, values, names = loaded.grid, loaded.values, loaded.names
        if grid is None or values is None:
            raise TypeError("ObservationSet() needs a grid and values")

        self.grid: GridSpec = grid
        self.values: Tuple[Array, ...] = tuple(
            np.asarray(v, dtype=float) for v in values
        )
        if not self.values:
            raise InvalidGrid("at least one variable is required")
        kind = "pde" if grid.spatial_dims else "ode"
        self.names: Tuple[str, ...] = tuple(
            names
            if names is not None
            else default_variable_names[kind][: len(self.values)]
        )
        if len(self.names) != len(self.values):
            raise InvalidGrid("one name per variable is required")
        for name, v in zip(self.names, self.values):
            if v.shape != grid.shape:
                raise InvalidGrid(
                    f"{name} has shape {v.shape}, grid expects {grid.shape}"
                )
            if not np.all(np.isfinite(v)):
                raise InvalidGrid(f"{name} contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return (
            f"ObservationSet(names={self.names}, shape={self.grid.shape})"
        )

    @property
    def num_vars(self) -> int:
        return len(self.values)

    @property
    def spatial_dims(self) -> int:
        return self.grid.spatial_dims

    @property
    def kind(self) -> str:
        return "pde" if self.spatial_dims else "ode"

    def replace_values(self, values: Sequence[Array]) -> "ObservationSet":
        return ObservationSet(self.grid, values, self.names)

    @staticmethod
    def load(path: DatasetPath) -> "ObservationSet":
        from weakident.suite.storage import load_dataset

        return load_dataset(path)

    def save(self, path: DatasetPath, name: Optional[str] = None):
        from weakident.suite.storage import save_dataset

        return save_dataset(self, path, name=name)

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.signal

from weakident.exceptions import EmptyInterior, NonFiniteFeature
from weakident.models import Dictionary, FeatureSpec, ObservationSet
from weakident.test_functions import TestFunction, sample_test_function
from weakident.types import Array

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


@dataclass(frozen=True)
class SubsampleSpec:
    """Target number of test-region centers per axis.

    ``targets`` is given in axis-name order ``(t, x, y)``. A shorter tuple
    repeats its last value.
    """

    targets: Tuple[int, ...]

    def target(self, position: int) -> int:
        # the last target repeats for any remaining axes
        return int(self.targets[min(position, len(self.targets) - 1)])

    def grow(self, step: int) -> "SubsampleSpec":
        return SubsampleSpec(tuple(t + step for t in self.targets))


@dataclass(frozen=True)
class Centers:
    """Test-region centers.

    Attributes:
        axis_indices: Center indices along each array axis (time first).
        rows: ``(H, ndim)`` center indices in row order, time slowest.
    """

    axis_indices: Tuple[Array, ...]

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(len(i) for i in self.axis_indices)

    @property
    def rows(self) -> Array:
        mesh = np.meshgrid(*self.axis_indices, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def __len__(self) -> int:
        return int(np.prod(self.counts))


@dataclass
class WeakSystem:
    """Assembled weak feature matrix and per-variable right-hand sides.

    ``w`` has shape ``(H, L)`` and ``b`` has shape ``(H, num_vars)``.
    """

    w: Array
    b: Array
    dictionary: Dictionary
    test_function: TestFunction
    centers: Centers

    @property
    def num_rows(self) -> int:
        return self.w.shape[0]


def subsample_count(
    n_points: int, m: int, target: int, axis: str = "t"
) -> int:
    """Number of centers on one axis.

    ``ceil((n - 2m - 1) / max(1, n // target) + 1)``, at most the number of
    interior points.
    """
    if n_points <= 2 * m + 1:
        raise EmptyInterior(axis, n_points, m)
    stride = max(1, n_points // max(int(target), 1))
    count = math.ceil((n_points - 2 * m - 1) / stride + 1)
    return int(min(count, n_points - 2 * m))


def subsample_centers(
    data: ObservationSet, tf: TestFunction, spec: SubsampleSpec
) -> Centers:
    """Place test-region centers on every axis.

    The first center sits ``m`` points from the start and the last ``m``
    points from the end, so every window lies inside the grid. Centers in
    between are spread evenly and rounded to grid points.

    Raises:
        EmptyInterior: An axis has no more than ``2m + 1`` points.
    """
    grid = data.grid
    names = grid.axis_names
    # targets follow (t, x, y); arrays follow (t, y, x)
    target_position = {"t": 0, "x": 1, "y": 2}
    counts = []
    for name, factor, count in zip(names, tf.array_axes, grid.shape):
        if count <= 2 * factor.m + 1:
            raise EmptyInterior(name, count, factor.m)
        counts.append(
            subsample_count(
                count, factor.m, spec.target(target_position[name]), name
            )
        )
    centers = centers_from_counts(data, tf, counts)
    logger.debug(f"Centers per axis {dict(zip(names, centers.counts))}")
    return centers


def centers_from_counts(
    data: ObservationSet, tf: TestFunction, counts: Sequence[int]
) -> Centers:
    """Spread ``counts[i]`` centers evenly over the interior of each axis."""
    indices = []
    shape = data.grid.shape
    for factor, count, n_centers in zip(tf.array_axes, shape, counts):
        last = count - 1 - factor.m
        positions = np.linspace(factor.m, last, int(n_centers))
        indices.append(np.round(positions).astype(int))
    return Centers(tuple(indices))


def axis_kernels(
    tf: TestFunction, alpha: Sequence[int], time_derivative: int = 0
) -> Tuple[Array, ...]:
    """Sampled test-function factors in array order for ``∂^alpha``."""
    spatial = [
        sample_test_function(tf, name, int(order))
        for name, order in zip(("x", "y"), alpha)
    ]
    time = sample_test_function(tf, "t", time_derivative)
    return (time,) + tuple(reversed(spatial))


def weak_correlate(
    field: Array,
    kernels: Sequence[Array],
    centers: Centers,
    spacings: Sequence[float],
) -> Array:
    """Integrate ``field`` against a separable kernel at every center.

    Each axis is correlated by FFT in ``valid`` mode and immediately
    restricted to the center indices of that axis.

    Returns:
        Array: One value per row, time slowest.
    """
    out = np.asarray(field, dtype=float)
    for axis, (kernel, index) in enumerate(
        zip(kernels, centers.axis_indices)
    ):
        m = (len(kernel) - 1) // 2
        shape = [1] * out.ndim
        shape[axis] = len(kernel)
        reversed_kernel = kernel[::-1].reshape(shape)
        out = scipy.signal.fftconvolve(
            out, reversed_kernel, mode="valid", axes=axis
        )
        out = np.take(out, index - m, axis=axis)
    return out.ravel() * float(np.prod(spacings))


def monomial(values: Sequence[Array], beta: Sequence[int]) -> Array:
    field = np.ones_like(values[0])
    for v, power in zip(values, beta):
        if power:
            field = field * v**power
    return field


def assemble(
    data: ObservationSet,
    dictionary: Dictionary,
    tf: TestFunction,
    centers: Centers,
    columns: Optional[Sequence[int]] = None,
) -> WeakSystem:
    """Build the weak feature matrix and right-hand sides.

    Column ``l`` holds ``(-1)^|alpha| ∫ u^beta ∂^alpha phi`` and column
    ``v`` of ``b`` holds ``-∫ u_v ∂_t phi``, both over each test region.

    Args:
        columns (Sequence[int]): Restrict to these dictionary entries.
            Others are left as zero.

    Raises:
        NonFiniteFeature: A monomial overflows.
    """
    grid = data.grid
    spacings = grid.spacings
    rows = len(centers)
    selected = range(len(dictionary)) if columns is None else columns
    w = np.zeros((rows, len(dictionary)))

    fields = {}
    for index in selected:
        feature = dictionary[index]
        if feature.beta not in fields:
            field = monomial(data.values, feature.beta)
            if not np.all(np.isfinite(field)):
                raise NonFiniteFeature(index)
            fields[feature.beta] = field
        kernels = axis_kernels(tf, feature.alpha)
        sign = (-1) ** feature.order
        w[:, index] = sign * weak_correlate(
            fields[feature.beta], kernels, centers, spacings
        )

    time_kernels = axis_kernels(tf, (0,) * grid.spatial_dims, 1)
    b = np.column_stack(
        [
            -weak_correlate(u, time_kernels, centers, spacings)
            for u in data.values
        ]
    )
    logger.info(
        f"Assembled weak system with {rows} rows, {w.shape[1]} columns"
    )
    return WeakSystem(w, b, dictionary, tf, centers)


def windows(field: Array, tf: TestFunction, centers: Centers) -> Array:
    """Stack the test-region window of ``field`` for every row.

    Returns:
        Array: Shape ``(H, *window)``.
    """
    shape = tuple(f.width for f in tf.array_axes)
    view = np.lib.stride_tricks.sliding_window_view(field, shape)
    starts = [
        index - f.m for index, f in zip(centers.axis_indices, tf.array_axes)
    ]
    mesh = np.meshgrid(*starts, indexing="ij")
    return view[tuple(g.ravel() for g in mesh)]


def separable_kernel(kernels: Sequence[Array]) -> Array:
    out = np.asarray(kernels[0])
    for k in kernels[1:]:
        out = np.multiply.outer(out, k)
    return out


def direct_quadrature_reference(
    data: ObservationSet,
    feature: FeatureSpec,
    tf: TestFunction,
    center: Sequence[int],
) -> float:
    """Evaluate one weak feature at one center by explicit summation.

    Args:
        center (Sequence[int]): Center indices in array order.
    """
    field = monomial(data.values, feature.beta)
    kernel = separable_kernel(axis_kernels(tf, feature.alpha))
    window = tuple(
        slice(c - f.m, c + f.m + 1) for c, f in zip(center, tf.array_axes)
    )
    total = 0.0
    for offset in np.ndindex(kernel.shape):
        point = tuple(s.start + o for s, o in zip(window, offset))
        total += field[point] * kernel[offset]
    return (-1) ** feature.order * total * data.grid.cell_volume

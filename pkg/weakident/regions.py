import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from weakident.assembly import Centers, axis_kernels, monomial, weak_correlate
from weakident.exceptions import FeatureNotFound
from weakident.models import (
    Dictionary,
    FeatureSpec,
    ObservationSet,
    feature_order_lookup,
)
from weakident.test_functions import TestFunction
from weakident.types import Array
from weakident.utils import fit_one_junction

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


@dataclass
class ScaleTable:
    """Leading error scale of every feature at every row, shape ``(H, L)``."""

    s: Array

    def column_means(self, rows: Optional[Array] = None) -> Array:
        block = self.s if rows is None else self.s[rows]
        return np.mean(np.abs(block), axis=0)


@dataclass
class DynamicRegionSet:
    """Rows selected as highly dynamic.

    Attributes:
        rows: Selected row indices, ascending.
        threshold: Cut-off on the mean scale of the features of interest.
        mean_scales: Mean scale per row that the threshold is applied to.
        histogram: Bin counts used for the change-point fit.
        edges: Histogram bin edges.
    """

    rows: Array
    threshold: float
    mean_scales: Array
    histogram: Array
    edges: Array

    def __len__(self) -> int:
        return len(self.rows)


def _lowered(beta: Sequence[int]) -> List[int]:
    # drop one power of the dominant variable, first on ties
    lowered = list(beta)
    lowered[int(np.argmax(lowered))] -= 1
    return lowered


def leading_scales(
    data: ObservationSet,
    dictionary: Dictionary,
    tf: TestFunction,
    centers: Centers,
) -> ScaleTable:
    """Estimate how strongly noise enters every feature at every row.

    For ``∂^alpha u^beta`` the scale is
    ``|beta| * |∫ u^(beta - e) ∂^alpha phi|`` where ``e`` lowers the
    dominant exponent by one. The constant feature has scale 1.
    """
    spacings = data.grid.spacings
    s = np.ones((len(centers), len(dictionary)))
    fields = {}
    for index, feature in enumerate(dictionary):
        if feature.is_constant:
            continue
        lowered = tuple(_lowered(feature.beta))
        if lowered not in fields:
            fields[lowered] = monomial(data.values, lowered)
        kernels = axis_kernels(tf, feature.alpha)
        s[:, index] = feature.degree * np.abs(
            weak_correlate(fields[lowered], kernels, centers, spacings)
        )
    return ScaleTable(s)


def _default_features(num_vars: int, spatial_dims: int) -> List[FeatureSpec]:
    squares = [
        tuple(2 if i == v else 0 for i in range(num_vars))
        for v in range(num_vars)
    ]
    if spatial_dims == 0:
        return [FeatureSpec((), beta) for beta in squares]
    if spatial_dims == 1:
        return [FeatureSpec((1,), beta) for beta in squares]
    if num_vars == 1:
        return [
            FeatureSpec((1, 0), (2,)),
            FeatureSpec((0, 1), (2,)),
            FeatureSpec((1, 1), (3,)),
        ]
    features = []
    for beta in squares:
        features.extend([FeatureSpec((1, 0), beta), FeatureSpec((0, 1), beta)])
    if num_vars == 2:
        features.extend(
            [FeatureSpec((1, 0), (2, 1)), FeatureSpec((0, 1), (1, 2))]
        )
    return features


def features_of_interest(
    num_vars: int,
    spatial_dims: int,
    dictionary: Dictionary,
    labels: Optional[Sequence[str]] = None,
    names: Optional[Sequence[str]] = None,
) -> List[int]:
    """Dictionary indices of the features that drive region selection.

    Nonlinear transport terms such as ``(u^2)_x`` are used by default;
    ``labels`` overrides them.

    Raises:
        FeatureNotFound: A required feature is missing from the dictionary.
    """
    if labels:
        return [dictionary.index_of_label(label, names) for label in labels]
    indices = [
        feature_order_lookup(dictionary, feature)
        for feature in _default_features(num_vars, spatial_dims)
    ]
    if not indices:
        raise FeatureNotFound("features of interest")
    return indices


def select_regions(
    scales: ScaleTable, features: Sequence[int], bins: int
) -> DynamicRegionSet:
    """Select the rows whose mean scale lies past the histogram change point.

    The cumulative histogram of the mean scale is fitted with a continuous
    two-piece line under relative weights. Rows at or above the left edge
    of the junction bin are kept.
    """
    mean_scales = np.mean(np.abs(scales.s[:, list(features)]), axis=1)
    low, high = float(mean_scales.min()), float(mean_scales.max())
    if not high > low:
        logger.info("Scales are uniform, keeping every row")
        rows = np.arange(len(mean_scales))
        return DynamicRegionSet(
            rows,
            low,
            mean_scales,
            np.array([len(rows)]),
            np.array([low, high]),
        )

    histogram, edges = np.histogram(mean_scales, bins=bins, range=(low, high))
    cumulative = np.cumsum(histogram).astype(float)
    weights = np.zeros_like(cumulative)
    occupied = cumulative > 0
    weights[occupied] = 1.0 / cumulative[occupied] ** 2
    fit = fit_one_junction(cumulative, weights)

    threshold = float(edges[fit.index])
    rows = np.flatnonzero(mean_scales >= threshold)
    logger.info(
        f"Selected {len(rows)} of {len(mean_scales)} rows"
        f" (threshold {threshold:.4e})"
    )
    return DynamicRegionSet(rows, threshold, mean_scales, histogram, edges)

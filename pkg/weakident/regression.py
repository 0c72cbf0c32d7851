import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from weakident.assembly import (
    SubsampleSpec,
    WeakSystem,
    assemble,
    subsample_centers,
)
from weakident.config import RunConfig
from weakident.constants import diagnostic_columns
from weakident.exceptions import (
    CrossValidationError,
    DegenerateColumn,
    NoModel,
    WeakIdentError,
)
from weakident.models import (
    Coefficients,
    Dictionary,
    GridSpec,
    ObservationSet,
    build_dictionary,
    format_equation,
)
from weakident.regions import (
    DynamicRegionSet,
    ScaleTable,
    features_of_interest,
    leading_scales,
    select_regions,
)
from weakident.test_functions import TestFunction, design_test_function
from weakident.types import Array
from weakident.utils import solve_least_squares

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

SP_MAX_ITERATIONS = 20
SP_RELATIVE_DECREASE = 1e-12
# Relative size below which a region mean is treated as zero
SCALE_FLOOR = 1e-10
RHS_FLOOR = 1e-12


@dataclass
class NarrowFit:
    """Result of a fit restricted to the highly dynamic rows.

    Attributes:
        coefficients: Coefficients in physical units.
        scaled_coefficients: Coefficients of the scaled system.
        scaled_columns: Scaled feature columns of the support over the
            selected rows.
        column_scales: Scale divisor of every dictionary column.
        rhs_scale: Scale divisor of the right-hand side.
    """

    coefficients: Coefficients
    scaled_coefficients: Array
    scaled_columns: Array
    column_scales: Array
    rhs_scale: float


@dataclass
class CandidateModel:
    """Outcome of one sparsity level for one variable."""

    k: int
    support: Tuple[int, ...] = ()
    coefficients: Optional[Coefficients] = None
    cv_error: float = float("inf")
    sp_support: Tuple[int, ...] = ()
    removed: List[int] = field(default_factory=list)
    status: str = "ok"

    @property
    def trim_iterations(self) -> int:
        return len(self.removed)


@dataclass
class VariableResult:
    name: str
    coefficients: Coefficients
    cv_error: float
    candidates: List[CandidateModel]

    @property
    def support(self) -> Tuple[int, ...]:
        return self.coefficients.support

    @property
    def sparsity(self) -> int:
        return len(self.support)


@dataclass
class IdentResult:
    """Identified equations together with everything needed to audit them."""

    variables: List[VariableResult]
    names: Tuple[str, ...]
    dictionary: Dictionary
    test_function: TestFunction
    system: WeakSystem
    scales: ScaleTable
    regions: DynamicRegionSet
    config: RunConfig
    grid: GridSpec

    @property
    def coefficients(self) -> List[Coefficients]:
        return [v.coefficients for v in self.variables]

    def equations(self) -> List[str]:
        return [
            format_equation(
                v.name, v.coefficients, self.dictionary, self.names
            )
            for v in self.variables
        ]

    def to_dict(self) -> dict:
        labels = self.dictionary.labels(self.names)

        def _finite(x):
            return float(x) if np.isfinite(x) else None

        variables = {}
        for v, equation in zip(self.variables, self.equations()):
            variables[v.name] = {
                "equation": equation,
                "support": [labels[i] for i in v.support],
                "coefficients": v.coefficients.as_dict(
                    self.dictionary, self.names
                ),
                "cv_error": _finite(v.cv_error),
                "sparsity": v.sparsity,
                "candidates": [
                    {
                        "k": c.k,
                        "support": [labels[i] for i in c.support],
                        "cv_error": _finite(c.cv_error),
                        "trim_iterations": c.trim_iterations,
                        "status": c.status,
                    }
                    for c in v.candidates
                ],
            }
        grid = self.grid
        return {
            "config": self.config.to_dict(),
            "dictionary_size": len(self.dictionary),
            "test_function": self.test_function.to_dict(),
            "region_rows": len(self.regions),
            "subsample_counts": list(self.system.centers.counts),
            "variables": variables,
            "grid": {
                "nt": grid.nt,
                "dt": grid.dt,
                "t0": grid.t0,
                "nx": list(grid.nx),
                "dx": list(grid.dx),
                "x0": list(grid.x0),
            },
        }

    def diagnostics_frame(self) -> pd.DataFrame:
        labels = self.dictionary.labels(self.names)

        def _join(indices):
            return ";".join(labels[i] for i in indices)

        records = [
            {
                "variable": v.name,
                "k": c.k,
                "cv_error": c.cv_error,
                "support_size": len(c.support),
                "trim_iterations": c.trim_iterations,
                "sp_support": _join(c.sp_support),
                "final_support": _join(c.support),
                "status": c.status,
            }
            for v in self.variables
            for c in v.candidates
        ]
        return pd.DataFrame.from_records(records, columns=diagnostic_columns)


def column_normalize(w: Array) -> Tuple[Array, Array]:
    """Scale every column of ``w`` to unit Euclidean norm.

    Raises:
        DegenerateColumn: A column is identically zero.
    """
    norms = np.linalg.norm(w, axis=0)
    zero = np.flatnonzero(norms == 0)
    if len(zero):
        raise DegenerateColumn(zero)
    return w / norms, norms


def _top(scores: Array, k: int) -> Array:
    # largest first, lowest index on ties
    return np.argsort(-scores, kind="stable")[:k]


def _residual(w: Array, b: Array, support: Array) -> Tuple[Array, float]:
    x = solve_least_squares(w[:, support], b).x
    r = b - w[:, support] @ x
    return r, float(np.linalg.norm(r))


def subspace_pursuit(w: Array, b: Array, k: int) -> Tuple[int, ...]:
    """Greedy support of size ``k`` for ``w c ≈ b``.

    Args:
        w (Array): Column-normalized matrix.
        b (Array): Right-hand side.
        k (int): Support size, ``1 <= k <= min(rows, cols)``.

    Returns:
        Tuple[int, ...]: Sorted support indices.
    """
    rows, cols = w.shape
    if not 1 <= k <= min(rows, cols):
        raise ValueError(f"k = {k} outside [1, {min(rows, cols)}]")

    support = np.sort(_top(np.abs(w.T @ b), k))
    r, res = _residual(w, b, support)
    for _ in range(SP_MAX_ITERATIONS):
        expanded = np.union1d(support, _top(np.abs(w.T @ r), k))
        x = solve_least_squares(w[:, expanded], b).x
        candidate = np.sort(expanded[_top(np.abs(x), k)])
        r_new, res_new = _residual(w, b, candidate)
        if not res_new < res * (1 - SP_RELATIVE_DECREASE):
            break
        support, r, res = candidate, r_new, res_new
    return tuple(int(i) for i in support)


def _region_means(
    w: Array, regions: DynamicRegionSet, scales: ScaleTable
) -> Array:
    means = scales.column_means(regions.rows)
    magnitude = np.mean(np.abs(w[regions.rows]), axis=0)
    # scales that telescope to rounding level fall back to |w|
    small = means <= SCALE_FLOOR * magnitude
    means = np.where(small, magnitude, means)
    return np.where(means > 0, means, 1.0)


def _rhs_scale(b: Array, regions: DynamicRegionSet) -> float:
    b_bar = float(np.mean(b[regions.rows]))
    magnitude = float(np.mean(np.abs(b[regions.rows])))
    if abs(b_bar) < RHS_FLOOR * magnitude or b_bar == 0:
        logger.warning(
            f"Mean right-hand side {b_bar:.3e} is near zero,"
            " using its mean magnitude"
        )
        b_bar = magnitude if magnitude > 0 else 1.0
    return b_bar


def narrow_fit(
    w: Array,
    b: Array,
    support: Sequence[int],
    regions: DynamicRegionSet,
    scales: ScaleTable,
) -> NarrowFit:
    """Least-squares fit over the selected rows of the scaled system.

    Columns are divided by their mean leading scale over the region and
    ``b`` by its region mean, then mapped back to physical units.
    """
    support = np.asarray(support, dtype=int)
    column_scales = _region_means(w, regions, scales)
    rhs_scale = _rhs_scale(b, regions)

    scaled_columns = w[np.ix_(regions.rows, support)] / column_scales[support]
    scaled_rhs = b[regions.rows] / rhs_scale
    scaled = solve_least_squares(scaled_columns, scaled_rhs).x

    values = np.zeros(w.shape[1])
    values[support] = rhs_scale * scaled / column_scales[support]
    return NarrowFit(
        Coefficients(values), scaled, scaled_columns, column_scales, rhs_scale
    )


def contribution_scores(scaled_columns: Array, scaled_coefficients: Array):
    """Relative contribution of every support feature.

    Raises:
        NoModel: All contributions are zero.
    """
    contribution = np.linalg.norm(scaled_columns, axis=0) * np.abs(
        scaled_coefficients
    )
    top = float(np.max(contribution)) if len(contribution) else 0.0
    if not top > 0:
        raise NoModel("all coefficients are zero")
    return contribution / top


def trim_once(
    support: Sequence[int], scores: Array, threshold: float
) -> Tuple[int, ...]:
    """Drop the weakest feature when its score is below ``threshold``."""
    weakest = int(np.argmin(scores))
    if scores[weakest] < threshold:
        return tuple(s for i, s in enumerate(support) if i != weakest)
    return tuple(support)


def cross_validation_error(
    w: Array,
    b: Array,
    support: Sequence[int],
    cv_lambda: float = 0.01,
    trials: int = 30,
    seed: Union[int, Sequence[int]] = 0,
    rows: Optional[Array] = None,
) -> float:
    """Mean two-fold cross-validation error of a support.

    Each trial splits ``rows`` into two random equal halves A and B, fits
    on each and scores
    ``cv_lambda * |W_A c_B - b_A| + (1 - cv_lambda) * |W_B c_A - b_B|``.

    Raises:
        CrossValidationError: Every split was singular.
    """
    rows = np.arange(w.shape[0]) if rows is None else np.asarray(rows)
    half = len(rows) // 2
    support = list(support)
    if half < len(support):
        raise CrossValidationError(trials)
    entropy = [seed] if np.isscalar(seed) else list(seed)

    errors = []
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(entropy + [trial]))
        order = rng.permutation(rows)
        part_a, part_b = order[:half], order[half : 2 * half]
        w_a, w_b = w[np.ix_(part_a, support)], w[np.ix_(part_b, support)]
        fit_a = solve_least_squares(w_a, b[part_a])
        fit_b = solve_least_squares(w_b, b[part_b])
        if fit_a.regularized or fit_b.regularized:
            logger.warning(f"Skipping singular cross-validation split {trial}")
            continue
        errors.append(
            cv_lambda * np.linalg.norm(w_a @ fit_b.x - b[part_a])
            + (1 - cv_lambda) * np.linalg.norm(w_b @ fit_a.x - b[part_b])
        )
    if not errors:
        raise CrossValidationError(trials)
    return float(np.mean(errors))


def identify_variable(
    system: WeakSystem,
    scales: ScaleTable,
    regions: DynamicRegionSet,
    variable: int,
    config: RunConfig,
) -> Tuple[Coefficients, float, List[CandidateModel]]:
    """Select a model for one variable across sparsity levels."""
    w, b = system.w, system.b[:, variable]
    normalized, _ = column_normalize(w)
    b_norm = np.linalg.norm(b)
    unit_b = b / b_norm if b_norm > 0 else b

    k_max = min(config.max_sparsity, w.shape[1], len(regions) // 2)
    if k_max < 1:
        raise NoModel(f"only {len(regions)} rows selected")

    candidates = []
    for k in range(1, k_max + 1):
        candidate = CandidateModel(k)
        try:
            support = subspace_pursuit(normalized, unit_b, k)
            candidate.sp_support = support
            while True:
                fit = narrow_fit(w, b, support, regions, scales)
                scores = contribution_scores(
                    fit.scaled_columns, fit.scaled_coefficients
                )
                trimmed = trim_once(support, scores, config.trim_threshold)
                if trimmed == support:
                    break
                candidate.removed.extend(
                    s for s in support if s not in trimmed
                )
                support = trimmed
            candidate.support = support
            candidate.coefficients = fit.coefficients
            candidate.cv_error = cross_validation_error(
                w / fit.column_scales,
                b / fit.rhs_scale,
                support,
                config.cv_lambda,
                config.cv_trials,
                (config.seed, variable, k),
                regions.rows,
            )
        except (WeakIdentError, ArithmeticError, ValueError) as e:
            logger.warning(f"Variable {variable}, k = {k} failed: {e}")
            candidate.status = type(e).__name__
            candidate.cv_error = float("inf")
        candidates.append(candidate)

    usable = [c for c in candidates if c.status == "ok"]
    if not usable:
        raise NoModel(f"every sparsity level failed for variable {variable}")
    # min keeps the first, so ties go to the smallest k
    best = min(usable, key=lambda c: c.cv_error)
    return best.coefficients, best.cv_error, candidates


def weak_ident(
    data: ObservationSet,
    config: Optional[RunConfig] = None,
    system_name: Optional[str] = None,
    dictionary: Optional[Dictionary] = None,
) -> IdentResult:
    """Identify one differential equation per variable of ``data``.

    Args:
        data (ObservationSet): Observations, possibly noisy.
        config (RunConfig): Settings; unset fields take the defaults.
        system_name (str): Benchmark name used for default overrides.
        dictionary (Dictionary): Feature dictionary to use instead of the
            one built from ``config``.

    Returns:
        IdentResult: Coefficients per variable with diagnostics.
    """
    config = (config or RunConfig()).resolved(data.kind, system_name)
    if dictionary is None:
        dictionary = build_dictionary(
            data.num_vars,
            data.spatial_dims,
            config.alpha_cap,
            config.beta_cap,
            config.dictionary_rule,
        )
    tf = design_test_function(
        data, dictionary, config.tau_hat, config.tau_decay, config.p_max
    )
    interest = features_of_interest(
        data.num_vars,
        data.spatial_dims,
        dictionary,
        config.features_of_interest,
        data.names,
    )

    spec = SubsampleSpec(config.subsample)
    retries = 0
    while True:
        centers = subsample_centers(data, tf, spec)
        system = assemble(data, dictionary, tf, centers)
        scales = leading_scales(data, dictionary, tf, centers)
        regions = select_regions(scales, interest, config.hist_bins)
        if (
            data.kind == "ode"
            or not config.adaptive_subsample
            or len(regions) >= config.min_region_rows
            or retries >= config.max_subsample_retries
        ):
            break
        retries += 1
        spec = spec.grow(config.subsample_increment)
        logger.info(
            f"Only {len(regions)} selected rows, retrying with"
            f" subsample targets {spec.targets}"
        )

    variables = []
    for index, name in enumerate(data.names):
        coefficients, cv_error, candidates = identify_variable(
            system, scales, regions, index, config
        )
        variables.append(
            VariableResult(name, coefficients, cv_error, candidates)
        )
        logger.info(
            format_equation(name, coefficients, dictionary, data.names)
        )
    return IdentResult(
        variables,
        tuple(data.names),
        dictionary,
        tf,
        system,
        scales,
        regions,
        config,
        data.grid,
    )

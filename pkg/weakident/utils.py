import json
import logging
from typing import Any, Callable, Dict, NamedTuple, Optional

import numpy as np
import scipy.linalg

from weakident.types import Array

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


class LeastSquares(NamedTuple):
    x: Array
    rank: int
    regularized: bool


class JunctionFit(NamedTuple):
    index: int
    cost: float
    costs: Array
    single_line_cost: float
    fitted: Array


def solve_least_squares(a: Array, b: Array) -> LeastSquares:
    """Minimum-residual solution of ``a x = b``.

    Uses a rank-revealing QR solve. A rank-deficient system falls back to
    a ridge solve with a tiny penalty scaled to the largest column norm.

    Args:
        a (Array): Matrix of shape (rows, cols).
        b (Array): Right-hand side of shape (rows,).

    Returns:
        LeastSquares: Solution, numerical rank and whether ridge was used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[1] == 0:
        return LeastSquares(np.zeros(0), 0, False)
    x, _, rank, _ = scipy.linalg.lstsq(a, b, lapack_driver="gelsy")
    if rank >= a.shape[1]:
        return LeastSquares(x, int(rank), False)

    mu = 1e-10 * float(np.max(np.sum(a**2, axis=0)))
    logger.warning(
        f"Rank-deficient system (rank {rank} < {a.shape[1]}),"
        f" using ridge penalty {mu:.3e}"
    )
    gram = a.T @ a + mu * np.eye(a.shape[1])
    x = scipy.linalg.solve(gram, a.T @ b, assume_a="pos")
    return LeastSquares(x, int(rank), True)


def _hinge_fit(y: Array, sqrt_w: Array, junction: int):
    j = np.arange(len(y), dtype=float)
    basis = np.column_stack(
        [np.ones_like(j), j, np.maximum(j - junction, 0.0)]
    )
    coef, *_ = scipy.linalg.lstsq(basis * sqrt_w[:, None], y * sqrt_w)
    fitted = basis @ coef
    return float(np.sum((sqrt_w * (y - fitted)) ** 2)), fitted


def fit_one_junction(y: Array, weights: Optional[Array] = None) -> JunctionFit:
    """Fit a continuous two-piece line to ``y`` by exhaustive search.

    Every interior index is tried as the junction. Ties go to the lowest
    index.

    Args:
        y (Array): Sequence to fit, at least 3 values.
        weights (Array): Non-negative weight per value. Defaults to 1.

    Returns:
        JunctionFit: Best junction, its weighted cost, the cost of every
        candidate (NaN at the end points) and the single-line cost.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 3:
        raise ValueError(f"need at least 3 values, got {n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    sqrt_w = np.sqrt(w)

    j = np.arange(n, dtype=float)
    line = np.column_stack([np.ones_like(j), j])
    coef, *_ = scipy.linalg.lstsq(line * sqrt_w[:, None], y * sqrt_w)
    single = float(np.sum((sqrt_w * (y - line @ coef)) ** 2))

    costs = np.full(n, np.nan)
    best, best_cost, best_fit = 1, np.inf, None
    for c in range(1, n - 1):
        cost, fitted = _hinge_fit(y, sqrt_w, c)
        costs[c] = cost
        if cost < best_cost:
            best, best_cost, best_fit = c, cost, fitted
    return JunctionFit(best, best_cost, costs, single, best_fit)


def parse_key_value(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines, skipping blanks and ``#`` comments.

    Raises:
        ValueError: A line without ``=`` or a repeated key.
    """
    entries = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {number}: empty key")
        if key in entries:
            raise ValueError(f"line {number}: duplicate key {key!r}")
        entries[key] = value
    return entries


def format_key_value(entries: Dict[str, str]) -> str:
    return "".join(f"{key} = {value}\n" for key, value in entries.items())


def format_json(
    value: Any,
    default: Optional[Callable[[Any], Any]] = None,
    indent: int = 2,
    _level: int = 0,
) -> str:
    """Render ``value`` as indented JSON with sorted keys.

    Finite floats are written with 17 significant digits so every value
    reads back bit for bit. Objects JSON cannot represent are passed to
    ``default`` first.

    Raises:
        TypeError: A value is not serializable.
    """
    if isinstance(value, (str, bool, int)) or value is None:
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, float):
        if np.isfinite(value):
            return f"{value:.17g}"
        return json.dumps(value)

    inner = " " * (indent * (_level + 1))
    outer = " " * (indent * _level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(key), ensure_ascii=False)}: "
            + format_json(value[key], default, indent, _level + 1)
            for key in sorted(value, key=str)
        ]
        return "{\n" + ",\n".join(items) + "\n" + outer + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [
            inner + format_json(item, default, indent, _level + 1)
            for item in value
        ]
        return "[\n" + ",\n".join(items) + "\n" + outer + "]"

    if default is None:
        raise TypeError(
            f"Object of type {type(value).__name__} is not JSON serializable"
        )
    return format_json(default(value), default, indent, _level)

"""
Martingale transforms, their maximal truncations and square functions.

Every operator here is assembled from the level stacks in ``dyadic``: the
difference stack D (row k is df_k), the expectation stack E and a sign stack
S (row k is sigma_k spread over the leaves). Localization at a stopping time
nu keeps the rows k > nu(x) and adds the head term sigma_nu E_nu f at nu(x).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .dyadic import (
    DyadicGrid,
    GridFunction,
    StoppingTime,
    _check_same_grid,
    as_ratio,
    cube_percentiles,
    difference_stack,
    expectation_stack,
    localized_doob_stack,
    take_at,
)
from .reports import DominationReport, check_domination

logger = logging.getLogger(__name__)

TRANSFORM = "transform"
SQUARE = "square"


def _parent_count(k: int) -> int:
    #sigma_0 lives on F_0 (F_{-1} := F_0); sigma_k on the level-(k-1) cubes
    return 1 << max(k - 1, 0)


@dataclass(frozen=True, eq=False)
class PredictableSigns:
    """
    Multipliers sigma_0, ..., sigma_N stored one value per parent cube,
    so predictability holds by construction.
    """

    grid: DyadicGrid
    levels: Tuple[np.ndarray, ...]
    bound: float = 1.0

    def __post_init__(self):
        depth = self.grid.depth
        if len(self.levels) != depth + 1:
            raise ValueError(f"need {depth + 1} sign levels, got {len(self.levels)}")
        frozen = []
        for k, values in enumerate(self.levels):
            values = np.array(values, dtype=float).ravel()
            if values.shape[0] != _parent_count(k):
                raise ValueError(
                    f"sign level {k} needs {_parent_count(k)} values (one per parent cube), got {values.shape[0]}"
                )
            if not np.all(np.isfinite(values)):
                raise ValueError(f"sign level {k} has non-finite entries")
            if np.abs(values).max(initial=0.0) > self.bound:
                raise ValueError(f"sign level {k} exceeds the magnitude bound {self.bound}")
            values.setflags(write=False)
            frozen.append(values)
        object.__setattr__(self, "levels", tuple(frozen))

    @classmethod
    def constant(cls, grid: DyadicGrid, value: float = 1.0, bound: Optional[float] = None) -> "PredictableSigns":
        bound = max(1.0, abs(value)) if bound is None else bound
        levels = tuple(np.full(_parent_count(k), float(value)) for k in range(grid.depth + 1))
        return cls(grid, levels, bound)

    @classmethod
    def rademacher(cls, grid: DyadicGrid, seed: int) -> "PredictableSigns":
        rng = np.random.default_rng(seed)
        levels = tuple(rng.choice([-1.0, 1.0], size=_parent_count(k)) for k in range(grid.depth + 1))
        return cls(grid, levels)

    @classmethod
    def from_mapping(cls, grid: DyadicGrid, mapping: Dict[int, Sequence[float]], bound: float = 1.0) -> "PredictableSigns":
        #Levels missing from the mapping default to sigma = 1
        levels = []
        for k in range(grid.depth + 1):
            levels.append(mapping.get(k, np.ones(_parent_count(k))))
        unknown = set(mapping) - set(range(grid.depth + 1))
        if unknown:
            raise ValueError(f"sign levels {sorted(unknown)} are outside the grid")
        return cls(grid, tuple(levels), bound)

    def leaf_stack(self) -> np.ndarray:
        depth = self.grid.depth
        return np.vstack([
            np.repeat(values, 1 << (depth - max(k - 1, 0))) for k, values in enumerate(self.levels)
        ])


def _transform_terms(f: GridFunction, sigma: PredictableSigns) -> np.ndarray:
    _check_same_grid(f, sigma)
    return sigma.leaf_stack() * difference_stack(f)


def _head_term(f: GridFunction, sigma: PredictableSigns, nu: StoppingTime) -> np.ndarray:
    head = take_at(sigma.leaf_stack() * expectation_stack(f), nu)
    return np.where(nu.finite, head, 0)


def martingale_transform(
    f: GridFunction, sigma: PredictableSigns, nu: Optional[StoppingTime] = None,
) -> GridFunction:
    terms = _transform_terms(f, sigma)
    if nu is None:
        return f.with_values(terms.sum(axis=0))
    _check_same_grid(f, nu)
    levels = np.arange(f.grid.depth + 1)[:, None]
    tail = np.where(levels > nu.levels[None, :], terms, 0).sum(axis=0)
    return f.with_values(_head_term(f, sigma, nu) + tail)


def transform_partials(f: GridFunction, sigma: PredictableSigns, nu: Optional[StoppingTime] = None) -> np.ndarray:
    """
    Row l is the truncated transform at level l; with nu, rows below nu(x)
    are zero and row l >= nu(x) is the localized partial sum.
    """
    terms = _transform_terms(f, sigma)
    partials = np.cumsum(terms, axis=0)
    if nu is None:
        return partials
    _check_same_grid(f, nu)
    levels = np.arange(f.grid.depth + 1)[:, None]
    started = _head_term(f, sigma, nu) + partials - take_at(partials, nu)
    return np.where((levels >= nu.levels[None, :]) & nu.finite[None, :], started, 0)


def transform_max_trunc(
    f: GridFunction, sigma: PredictableSigns, nu: Optional[StoppingTime] = None,
) -> GridFunction:
    return f.with_values(np.abs(transform_partials(f, sigma, nu)).max(axis=0))


def square_function(f: GridFunction, nu: Optional[StoppingTime] = None) -> GridFunction:
    squares = np.asarray(difference_stack(f), dtype=float) ** 2
    if nu is None:
        return f.with_values(np.sqrt(squares.sum(axis=0)))
    _check_same_grid(f, nu)
    levels = np.arange(f.grid.depth + 1)[:, None]
    head = take_at(np.asarray(expectation_stack(f), dtype=float) ** 2, nu)
    tail = np.where(levels > nu.levels[None, :], squares, 0.0).sum(axis=0)
    return f.with_values(np.where(nu.finite, np.sqrt(head + tail), 0.0))


def square_partials(f: GridFunction, nu: Optional[StoppingTime] = None) -> np.ndarray:
    """Row m is the square function truncated at level m (started at nu where given)."""
    squares = np.asarray(difference_stack(f), dtype=float) ** 2
    partials = np.cumsum(squares, axis=0)
    if nu is None:
        return np.sqrt(partials)
    _check_same_grid(f, nu)
    levels = np.arange(f.grid.depth + 1)[:, None]
    head = take_at(np.asarray(expectation_stack(f), dtype=float) ** 2, nu)
    started = head + partials - take_at(partials, nu)
    inside = (levels >= nu.levels[None, :]) & nu.finite[None, :]
    return np.where(inside, np.sqrt(np.maximum(started, 0.0)), 0.0)


def conditional_isometry_gap(f: GridFunction, k: int) -> float:
    """max over level-k cubes A of |int_A (S_(k) f)^2 - int_A f^2|."""
    grid = f.grid
    localized = square_function(f, StoppingTime.constant(grid, k)).as_float()
    measure = np.asarray(grid.leaf_measure, dtype=float)
    values = f.as_float()
    gap = grid.reduce(localized ** 2 * measure, k) - grid.reduce(values ** 2 * measure, k)
    return float(np.abs(gap).max())


def median_bound_audit(
    f: GridFunction,
    sigma: Optional[PredictableSigns] = None,
    r=None,
    operator: str = TRANSFORM,
) -> DominationReport:
    """
    Per level k and level-k cube A:
    P_k^{(R+2)r}(T_(k) f) <= sqrt(2/r) P_k^r(M_(k) f),
    with T the maximal transform truncation or the square function.
    """
    grid = f.grid
    regularity = float(grid.regularity)
    ceiling = 1.0 / (2.0 * (regularity + 2.0))
    r = ceiling if r is None else float(as_ratio(r))
    if r > ceiling:
        raise ValueError(f"median bound needs r <= 1/(2(R+2)) = {ceiling:.6g}, got {r}")
    if operator == TRANSFORM and sigma is None:
        raise ValueError("the transform operator needs predictable signs")
    if operator not in (TRANSFORM, SQUARE):
        raise ValueError(f"unknown operator {operator!r}")

    local_maximal = localized_doob_stack(f).astype(float)
    upper = (regularity + 2.0) * r
    lhs_rows, rhs_rows = [], []
    for k in range(grid.depth + 1):
        nu = StoppingTime.constant(grid, k)
        if operator == TRANSFORM:
            localized = transform_max_trunc(f, sigma, nu).as_float()
        else:
            localized = square_function(f, nu).as_float()
        lhs_rows.append(grid.expand(cube_percentiles(localized, grid, k, upper), k))
        rhs_rows.append(math.sqrt(2.0 / r) * grid.expand(cube_percentiles(local_maximal[k], grid, k, r), k))

    report = check_domination(
        np.vstack(lhs_rows), np.vstack(rhs_rows), 1.0, f"median-bound-{operator}",
        {"r": r, "R": regularity, "operator": operator, "witness_kind": "level*leaves+leaf"},
    )
    return report

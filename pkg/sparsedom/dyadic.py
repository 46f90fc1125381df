"""
Finite dyadic probability space shared by every audit in the lab.

Layout
The space is [0,1) cut into 2^N leaves. A level-k cube owns a contiguous block
of 2^(N-k) leaves, so per-cube quantities come from reshaping a leaf vector to
(2^k, 2^(N-k)) and reducing along the second axis. Stacks of shape
(N+1, 2^N) hold one leaf-expanded row per level; they are how this module
hands conditional expectations and percentiles to the operator modules.

Arithmetic
float64 by default. Averages of dyadic-rational inputs are exact because every
division is by a dyadic mass. Grids built with ``exact=True`` carry Fraction
objects in numpy object arrays (depth <= EXACT_MAX_DEPTH) for oracle runs.

Thread safety
Grids, functions and stopping times freeze their arrays on construction and
are shared between worker threads without copying.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .reports import DominationReport, check_domination, check_ratio, merge_reports

logger = logging.getLogger(__name__)

#Grid limits
MAX_DEPTH = 24
EXACT_MAX_DEPTH = 12

#Stopping level meaning "never stops"
NEVER = np.iinfo(np.int64).max


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(str(float(value)))


def as_ratio(r, exact: bool = False):
    """Validate a ratio in (0,1). Exact grids get a Fraction, others a float."""
    value = to_fraction(r) if (exact or isinstance(r, str)) else r
    if not 0 < value < 1:
        raise ValueError(f"ratio must lie in (0,1), got {r!r}")
    return value if exact else float(value)


@dataclass(frozen=True, order=True)
class Cube:
    """Dyadic interval [index 2^-level, (index+1) 2^-level)."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or not 0 <= self.index < (1 << self.level):
            raise ValueError(f"cube index {self.index} out of range at level {self.level}")

    @property
    def interval(self) -> Tuple[float, float]:
        size = 2.0 ** -self.level
        return self.index * size, (self.index + 1) * size

    def children(self) -> Tuple["Cube", "Cube"]:
        return Cube(self.level + 1, 2 * self.index), Cube(self.level + 1, 2 * self.index + 1)

    def parent(self) -> "Cube":
        if self.level == 0:
            raise ValueError("the root cube has no parent")
        return Cube(self.level - 1, self.index // 2)

    def ancestor(self, level: int) -> "Cube":
        if not 0 <= level <= self.level:
            raise ValueError(f"level {level} is not above cube level {self.level}")
        return Cube(level, self.index >> (self.level - level))

    def contains(self, other: "Cube") -> bool:
        return other.level >= self.level and (other.index >> (other.level - self.level)) == self.index

    def leaf_slice(self, depth: int) -> slice:
        if self.level > depth:
            raise ValueError(f"cube level {self.level} is below grid depth {depth}")
        width = 1 << (depth - self.level)
        return slice(self.index * width, (self.index + 1) * width)

    def as_pair(self) -> List[int]:
        return [self.level, self.index]


class DyadicGrid:
    """
    Dyadic filtration on [0,1) with 2^depth leaves of positive mass.

    Level masses and the regularity constant R = max mu(parent)/mu(child)
    are computed once here and reused by every operator.
    """

    def __init__(self, depth: int, leaf_measure: np.ndarray, exact: bool = False):
        self.depth = depth
        self.exact = exact
        self.leaf_count = 1 << depth
        self.leaf_measure = _frozen(leaf_measure)
        self._level_measures = tuple(
            _frozen(leaf_measure.reshape(1 << k, -1).sum(axis=1)) for k in range(depth + 1)
        )
        self.total_mass = self._level_measures[0][0]
        self.is_uniform = bool(np.all(leaf_measure == leaf_measure[0]))
        self.regularity = self._regularity()

    def __repr__(self) -> str:
        return f"DyadicGrid(depth={self.depth}, uniform={self.is_uniform}, exact={self.exact})"

    def check_level(self, k: int) -> None:
        if not 0 <= k <= self.depth:
            raise ValueError(f"level {k} out of range [0, {self.depth}]")

    def same_as(self, other: "DyadicGrid") -> bool:
        return other is self or (
            other.depth == self.depth
            and other.exact == self.exact
            and bool(np.all(other.leaf_measure == self.leaf_measure))
        )

    def level_measure(self, k: int) -> np.ndarray:
        self.check_level(k)
        return self._level_measures[k]

    def cube_measure(self, cube: Cube):
        return self.level_measure(cube.level)[cube.index]

    def reduce(self, leaf_values, k: int) -> np.ndarray:
        """Per-cube sums of a leaf vector at level k."""
        self.check_level(k)
        return np.asarray(leaf_values).reshape(1 << k, -1).sum(axis=1)

    def expand(self, cube_values, k: int) -> np.ndarray:
        """Repeat per-cube values of level k onto the leaves."""
        self.check_level(k)
        return np.repeat(np.asarray(cube_values), 1 << (self.depth - k))

    def average(self, leaf_values, k: int) -> np.ndarray:
        """Measure-weighted cube averages at level k (one entry per cube)."""
        weighted = np.asarray(leaf_values) * self.leaf_measure
        return self.reduce(weighted, k) / self._level_measures[k]

    def mass(self, leaf_mask: np.ndarray):
        return self.leaf_measure[np.asarray(leaf_mask, dtype=bool)].sum()

    def cubes(self, k: int) -> List[Cube]:
        self.check_level(k)
        return [Cube(k, i) for i in range(1 << k)]

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def _regularity(self):
        if self.depth == 0:
            return Fraction(1) if self.exact else 1.0
        worst = max(
            (np.repeat(self._level_measures[k - 1], 2) / self._level_measures[k]).max()
            for k in range(1, self.depth + 1)
        )
        return worst if self.exact else float(worst)


def build_grid(depth: int, leaf_measure: Optional[Sequence] = None, exact: bool = False) -> DyadicGrid:
    """Build a dyadic grid, uniform unless leaf masses are supplied."""
    if isinstance(depth, bool) or not isinstance(depth, (int, np.integer)) or depth < 0:
        raise ValueError(f"depth must be a nonnegative integer, got {depth!r}")
    limit = EXACT_MAX_DEPTH if exact else MAX_DEPTH
    if depth > limit:
        raise ValueError(f"depth {depth} exceeds the limit {limit}")
    count = 1 << int(depth)

    if leaf_measure is None:
        if exact:
            measure = np.array([Fraction(1, count)] * count, dtype=object)
        else:
            measure = np.full(count, 2.0 ** -int(depth))
    else:
        raw = list(np.ravel(np.asarray(leaf_measure, dtype=object)))
        if len(raw) != count:
            raise ValueError(f"leaf measure has length {len(raw)}, expected {count}")
        if exact:
            measure = np.array([to_fraction(m) for m in raw], dtype=object)
        else:
            measure = np.array([float(m) for m in raw], dtype=float)
            if not np.all(np.isfinite(measure)):
                raise ValueError("leaf measures must be finite")
        if np.any(measure <= 0):
            raise ValueError("leaf measures must be strictly positive")

    grid = DyadicGrid(int(depth), measure, exact=exact)
    logger.debug("Built %r with regularity %s", grid, grid.regularity)
    return grid


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Leaf values of a function on a dyadic grid."""

    grid: DyadicGrid
    values: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.values, dtype=object if self.grid.exact else float)
        if raw.ndim != 1 or raw.shape[0] != self.grid.leaf_count:
            raise ValueError(
                f"grid function needs {self.grid.leaf_count} leaf values, got shape {raw.shape}"
            )
        if self.grid.exact:
            values = np.array([to_fraction(v) for v in raw], dtype=object)
        else:
            values = np.array(raw, dtype=float)
            if not np.all(np.isfinite(values)):
                raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def constant(cls, grid: DyadicGrid, c) -> "GridFunction":
        return cls(grid, np.full(grid.leaf_count, c, dtype=object if grid.exact else float))

    @classmethod
    def indicator(cls, grid: DyadicGrid, cube: Cube) -> "GridFunction":
        values = np.zeros(grid.leaf_count)
        values[cube.leaf_slice(grid.depth)] = 1.0
        return cls(grid, values)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __abs__(self) -> "GridFunction":
        return self.with_values(np.abs(self.values))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def scaled(self, factor) -> "GridFunction":
        return self.with_values(self.values * factor)

    def integral(self):
        return (self.values * self.grid.leaf_measure).sum()

    def mean(self):
        return self.integral() / self.grid.total_mass

    def as_float(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _check_same_grid(*items) -> DyadicGrid:
    grid = items[0].grid
    for item in items[1:]:
        if not grid.same_as(item.grid):
            raise ValueError("inconsistent grids")
    return grid


def _coerce_levels(levels) -> np.ndarray:
    raw = np.asarray(levels, dtype=object).ravel()
    out = np.empty(raw.shape[0], dtype=np.int64)
    for position, value in enumerate(raw):
        if value is None or (isinstance(value, (float, np.floating)) and np.isinf(value)):
            out[position] = NEVER
        else:
            out[position] = int(value)
    return out


@dataclass(frozen=True, eq=False)
class StoppingTime:
    """
    Per-leaf stopping level, NEVER where the time is infinite.

    Adaptedness is checked cube by cube: a level-k cube is either entirely
    stopped at k or not stopped at k anywhere.
    """

    grid: DyadicGrid
    levels: np.ndarray

    def __post_init__(self):
        levels = _coerce_levels(self.levels)
        depth = self.grid.depth
        if levels.shape != (self.grid.leaf_count,):
            raise ValueError(f"stopping time needs {self.grid.leaf_count} levels, got {levels.shape[0]}")
        finite = levels != NEVER
        if np.any(levels[finite] < 0) or np.any(levels[finite] > depth):
            raise ValueError(f"stopping levels must lie in [0, {depth}] or be infinite")
        for k in range(depth + 1):
            hits = (levels == k).reshape(1 << k, -1)
            partial = hits.any(axis=1) & ~hits.all(axis=1)
            if partial.any():
                raise ValueError(
                    f"stopping time is not adapted: level-{k} cube {int(np.argmax(partial))} is only partly stopped"
                )
        object.__setattr__(self, "levels", _frozen(levels))

    @classmethod
    def constant(cls, grid: DyadicGrid, k: int) -> "StoppingTime":
        grid.check_level(k)
        return cls(grid, np.full(grid.leaf_count, k, dtype=np.int64))

    @classmethod
    def never(cls, grid: DyadicGrid) -> "StoppingTime":
        return cls(grid, np.full(grid.leaf_count, NEVER, dtype=np.int64))

    @property
    def finite(self) -> np.ndarray:
        return self.levels != NEVER

    def clipped(self) -> np.ndarray:
        """Levels with NEVER replaced by the leaf level, for indexing stacks."""
        return np.minimum(self.levels, self.grid.depth)

    def is_never(self) -> bool:
        return not bool(self.finite.any())


def take_at(stack: np.ndarray, nu: StoppingTime) -> np.ndarray:
    """Row nu(x) of a level stack at every leaf x (the leaf row where nu is infinite)."""
    return np.take_along_axis(stack, nu.clipped()[None, :], axis=0)[0]


#Stacks

def expectation_stack(f: GridFunction) -> np.ndarray:
    """Rows E_0 f, ..., E_N f expanded onto the leaves."""
    grid = f.grid
    return np.vstack([grid.expand(grid.average(f.values, k), k) for k in range(grid.depth + 1)])


def difference_stack(f: GridFunction) -> np.ndarray:
    """Rows df_0, ..., df_N; they telescope back to f."""
    stack = expectation_stack(f)
    differences = stack.copy()
    differences[1:] = stack[1:] - stack[:-1]
    return differences


def localized_doob_stack(f: GridFunction) -> np.ndarray:
    """Row k holds M_(k) f = sup_{j >= k} |E_j f|."""
    stack = np.abs(expectation_stack(f))
    return np.maximum.accumulate(stack[::-1], axis=0)[::-1]


def _row_percentiles(values: np.ndarray, masses: np.ndarray, r) -> np.ndarray:
    #Smallest attained value per row whose strict super-level set has mass <= r * row mass
    order = np.argsort(values, axis=1, kind="stable")
    ordered = np.take_along_axis(values, order, axis=1)
    cumulative = np.cumsum(np.take_along_axis(masses, order, axis=1), axis=1)
    total = cumulative[:, -1:]
    admissible = (total - cumulative) <= r * total
    first = np.argmax(admissible, axis=1)
    return ordered[np.arange(values.shape[0]), first]


def row_percentiles(values: np.ndarray, masses: np.ndarray, r) -> np.ndarray:
    """Percentile of each row of ``values`` under the matching row of ``masses``."""
    values = np.atleast_2d(values)
    masses = np.broadcast_to(np.atleast_2d(masses), values.shape)
    return _row_percentiles(values, masses, r)


def cube_percentiles(values: np.ndarray, grid: DyadicGrid, k: int, r) -> np.ndarray:
    """P^r over every level-k cube of a leaf vector, one entry per cube."""
    grid.check_level(k)
    rows = np.asarray(values).reshape(1 << k, -1)
    masses = grid.leaf_measure.reshape(1 << k, -1)
    return _row_percentiles(rows, masses, r)


def percentile_stack(values: np.ndarray, grid: DyadicGrid, r) -> np.ndarray:
    """Rows P_0^r g, ..., P_N^r g expanded onto the leaves."""
    r = as_ratio(r, grid.exact)
    return np.vstack([grid.expand(cube_percentiles(values, grid, k, r), k) for k in range(grid.depth + 1)])


#Operations

def cond_expect(f: GridFunction, k: int) -> GridFunction:
    grid = f.grid
    grid.check_level(k)
    return f.with_values(grid.expand(grid.average(f.values, k), k))


def mart_diff(f: GridFunction, k: int) -> GridFunction:
    grid = f.grid
    grid.check_level(k)
    current = grid.expand(grid.average(f.values, k), k)
    if k == 0:
        return f.with_values(current)
    return f.with_values(current - grid.expand(grid.average(f.values, k - 1), k - 1))


def percentile_on_cube(f: GridFunction, cube: Cube, r):
    grid = f.grid
    r = as_ratio(r, grid.exact)
    window = cube.leaf_slice(grid.depth)
    return _row_percentiles(f.values[window][None, :], grid.leaf_measure[window][None, :], r)[0]


def cond_percentile(f: GridFunction, k: int, r) -> GridFunction:
    grid = f.grid
    r = as_ratio(r, grid.exact)
    return f.with_values(grid.expand(cube_percentiles(f.values, grid, k, r), k))


def doob_maximal(
    f: GridFunction,
    start: Union[int, StoppingTime] = 0,
    stop: Optional[int] = None,
) -> GridFunction:
    """
    sup |E_k f| over start(x) <= k <= stop; zero where start is infinite.
    """
    grid = f.grid
    stop = grid.depth if stop is None else stop
    grid.check_level(stop)
    levels = np.arange(grid.depth + 1)[:, None]

    if isinstance(start, StoppingTime):
        _check_same_grid(f, start)
        if np.any(start.levels[start.finite] > stop):
            raise ValueError("stopping time exceeds the stop level")
        begin = start.levels[None, :]
    else:
        grid.check_level(start)
        if start > stop:
            raise ValueError(f"start level {start} exceeds stop level {stop}")
        begin = np.full((1, grid.leaf_count), start, dtype=np.int64)

    window = (levels >= begin) & (levels <= stop)
    stack = np.abs(expectation_stack(f))
    return f.with_values(np.where(window, stack, 0).max(axis=0))


def percentile_maximal(f: GridFunction, r, stop: Optional[int] = None) -> GridFunction:
    grid = f.grid
    stop = grid.depth if stop is None else stop
    grid.check_level(stop)
    stack = percentile_stack(np.abs(f.values), grid, r)
    return f.with_values(stack[: stop + 1].max(axis=0))


#Audits of the level-set and norm bounds

def _masses_above(values: np.ndarray, thresholds: np.ndarray, measure: np.ndarray) -> np.ndarray:
    above = np.asarray(values, dtype=float)[None, :] > np.asarray(thresholds, dtype=float)[:, None]
    return above.astype(float) @ np.asarray(measure, dtype=float)


def weak_type_audit(f: GridFunction, r) -> DominationReport:
    """mu{P_r f > lam} <= mu{|f| > lam} / r at every value lam attained by P_r f."""
    ratio = float(as_ratio(r))
    grid = f.grid
    maximal = percentile_maximal(f, ratio).as_float()
    levels = np.unique(maximal)
    lhs = _masses_above(maximal, levels, grid.leaf_measure)
    rhs = _masses_above(np.abs(f.as_float()), levels, grid.leaf_measure)
    report = check_domination(
        ratio * lhs, rhs, proof_constant=1.0, inequality_id="percentile-weak-type",
        measured={"r": ratio, "levels_checked": int(levels.size), "witness_kind": "level"},
    )
    if report.witness_leaf is not None:
        report.measured["witness_level_value"] = float(levels[report.witness_leaf])
    return report


def lp_norm(values: np.ndarray, measure: np.ndarray, p: float) -> float:
    if p <= 0:
        raise ValueError(f"exponent must be positive, got {p}")
    values = np.abs(np.asarray(values, dtype=float))
    return float((values ** p * np.asarray(measure, dtype=float)).sum() ** (1.0 / p))


def percentile_norm_audit(f: GridFunction, r, p: float) -> DominationReport:
    """||P_r f||_p <= r^(-1/p) ||f||_p."""
    ratio = float(as_ratio(r))
    measure = f.grid.leaf_measure
    lhs = lp_norm(percentile_maximal(f, ratio).values, measure, p)
    rhs = ratio ** (-1.0 / p) * lp_norm(f.values, measure, p)
    return check_ratio(lhs, rhs, 1.0, "percentile-norm", {"r": ratio, "p": p})


def percentile_moment_audit(f: GridFunction, k: int, r, q: float) -> DominationReport:
    """P_k^r |f| <= r^(-1/q) (E_k |f|^q)^(1/q) pointwise."""
    ratio = float(as_ratio(r))
    grid = f.grid
    absolute = np.abs(f.as_float())
    lhs = grid.expand(cube_percentiles(absolute, grid, k, ratio), k)
    moment = grid.expand(grid.average(absolute ** q, k), k).astype(float)
    rhs = ratio ** (-1.0 / q) * moment ** (1.0 / q)
    return check_domination(lhs, rhs, 1.0, "percentile-moment", {"r": ratio, "q": q, "level": k})


def doob_weak_audit(f: GridFunction) -> DominationReport:
    """lam mu{M f > lam} <= integral of |f| over {M f > lam}, for every attained lam > 0."""
    grid = f.grid
    measure = np.asarray(grid.leaf_measure, dtype=float)
    maximal = doob_maximal(f).as_float()
    levels = np.unique(maximal)
    levels = levels[levels > 0]
    above = maximal[None, :] > levels[:, None]
    lhs = levels * (above.astype(float) @ measure)
    rhs = above.astype(float) @ (np.abs(f.as_float()) * measure)
    return check_domination(lhs, rhs, 1.0, "doob-weak", {"levels_checked": int(levels.size)})


def cond_percentile_properties(f: GridFunction, k: int, r) -> DominationReport:
    """
    Both defining bounds of P_k^r on every level-k cube A:
    mu{f > P on A} <= r mu(A) and mu{f < P on A} <= (1-r) mu(A).
    """
    ratio = float(as_ratio(r))
    grid = f.grid
    values = f.as_float()
    percentile = cond_percentile(f, k, ratio).as_float()
    measure = np.asarray(grid.leaf_measure, dtype=float)
    cubes = np.asarray(grid.level_measure(k), dtype=float)
    over = grid.reduce((values > percentile) * measure, k)
    under = grid.reduce((values < percentile) * measure, k)
    upper = check_domination(over, ratio * cubes, 1.0, "percentile-upper")
    lower = check_domination(under, (1 - ratio) * cubes, 1.0, "percentile-lower")
    merged = merge_reports("percentile-properties", [upper, lower], 1.0)
    merged.measured.update({"r": ratio, "level": k})
    return merged

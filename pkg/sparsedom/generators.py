"""Named random inputs shared by the audits, the experiments and the tests."""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .dyadic import Cube, DyadicGrid, GridFunction, build_grid
from .euclid import LineFunction, LineGrid

logger = logging.getLogger(__name__)

#Constants to be applied
SPLIT_RANGE = (0.25, 0.75)
DEFAULT_AMPLITUDE = 10.0


def constant(grid: DyadicGrid, rng: np.random.Generator, value: float = 1.0) -> GridFunction:
    return GridFunction.constant(grid, value)


def indicator(grid: DyadicGrid, rng: np.random.Generator, cube: Optional[Cube] = None) -> GridFunction:
    if cube is None:
        level = int(rng.integers(0, grid.depth + 1))
        cube = Cube(level, int(rng.integers(0, 1 << level)))
    return GridFunction.indicator(grid, cube)


def haar(grid: DyadicGrid, rng: np.random.Generator, cube: Optional[Cube] = None) -> GridFunction:
    #h_Q = 1 on the left child, -1 on the right, unnormalized
    if grid.depth == 0:
        raise ValueError("Haar functions need depth >= 1")
    if cube is None:
        level = int(rng.integers(0, grid.depth))
        cube = Cube(level, int(rng.integers(0, 1 << level)))
    left, right = cube.children()
    values = np.zeros(grid.leaf_count)
    values[left.leaf_slice(grid.depth)] = 1.0
    values[right.leaf_slice(grid.depth)] = -1.0
    return GridFunction(grid, values)


def random_uniform(grid: DyadicGrid, rng: np.random.Generator, amplitude: float = DEFAULT_AMPLITUDE) -> GridFunction:
    return GridFunction(grid, rng.uniform(0.0, amplitude, size=grid.leaf_count))


def random_signed(grid: DyadicGrid, rng: np.random.Generator, amplitude: float = DEFAULT_AMPLITUDE) -> GridFunction:
    """Heavy-tailed signed leaves: a random sign times a Pareto magnitude, sparsified."""
    magnitudes = rng.pareto(1.5, size=grid.leaf_count) * amplitude / 4.0
    signs = rng.choice([-1.0, 1.0], size=grid.leaf_count)
    keep = rng.random(grid.leaf_count) < rng.uniform(0.1, 1.0)
    return GridFunction(grid, np.where(keep, signs * magnitudes, 0.0))


GENERATORS: Dict[str, Callable[..., GridFunction]] = {
    "constant": constant,
    "indicator": indicator,
    "haar": haar,
    "random-uniform": random_uniform,
    "random-signed": random_signed,
}


def generate(name: str, grid: DyadicGrid, rng: np.random.Generator) -> GridFunction:
    try:
        factory = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return factory(grid, rng)


def random_function(grid: DyadicGrid, rng: np.random.Generator) -> GridFunction:
    """One of the random generators, picked by the same rng."""
    name = ("random-uniform", "random-signed")[int(rng.integers(0, 2))]
    return generate(name, grid, rng)


def random_doubling_measure(depth: int, rng: np.random.Generator, split: Tuple[float, float] = SPLIT_RANGE) -> np.ndarray:
    """
    Leaf masses from recursive random splits of each cube's mass with child
    fractions in ``split``; the grid's regularity is then at most 1/split[0].
    """
    low, high = split
    if not 0 < low <= 0.5 <= high < 1 or abs(low + high - 1.0) > 1e-12:
        raise ValueError(f"split range {split} must be symmetric around 1/2 inside (0,1)")
    masses = np.ones(1)
    for _ in range(depth):
        fractions = rng.uniform(low, high, size=masses.size)
        masses = np.column_stack([masses * fractions, masses * (1.0 - fractions)]).ravel()
    return masses


def random_grid(depth: int, rng: np.random.Generator, uniform: bool = False) -> DyadicGrid:
    return build_grid(depth) if uniform else build_grid(depth, random_doubling_measure(depth, rng))


def random_line_function(grid: LineGrid, rng: np.random.Generator, support: Tuple[int, int], pieces: int = 8) -> LineFunction:
    """Piecewise-constant random function with ``pieces`` random levels on the cell range ``support``."""
    start, stop = support
    if not 0 <= start < stop <= grid.cells:
        raise ValueError(f"support [{start}, {stop}) is not inside the grid")
    cuts = np.sort(rng.choice(np.arange(start + 1, stop), size=min(pieces - 1, stop - start - 1), replace=False))
    bounds = np.concatenate([[start], cuts, [stop]])
    values = np.zeros(grid.cells)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        values[lo:hi] = rng.uniform(-1.0, 1.0)
    return LineFunction(grid, values)
